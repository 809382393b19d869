//! Manufactured solutions built from `cos^2(pi kx x) sin^2(pi ky y)`.

use crate::basis::{position, MultiIndex, MultiIndexSet};
use crate::geometry::{CutCellGeometry, Phase, Point};
use crate::mesh::{Mesh, VolumeKey};
use crate::stencil::JumpData;
use rand::Rng;
use std::f64::consts::PI;

/// Wave numbers of the basis slots: `kx` in `-2..=2`, `ky` in `{-2,-1,1,2}`.
pub const SLOTS: [(i32, i32); 20] = {
    let mut out = [(0, 0); 20];
    let ky = [-2, -1, 1, 2];
    let mut s = 0;
    let mut kx = -2;
    while kx <= 2 {
        let mut j = 0;
        while j < 4 {
            out[s] = (kx, ky[j]);
            s += 1;
            j += 1;
        }
        kx += 1;
    }
    out
};

/// `d^n/dx^n cos^2(pi k x)`.
fn cos2(k: i32, x: f64, n: usize) -> f64 {
    let w = 2.0 * PI * k as f64;
    if n == 0 {
        0.5 + 0.5 * (w * x).cos()
    } else {
        0.5 * w.powi(n as i32) * (w * x + n as f64 * PI / 2.0).cos()
    }
}

/// `d^n/dy^n sin^2(pi k y)`.
fn sin2(k: i32, y: f64, n: usize) -> f64 {
    let w = 2.0 * PI * k as f64;
    if n == 0 {
        0.5 - 0.5 * (w * y).cos()
    } else {
        -0.5 * w.powi(n as i32) * (w * y + n as f64 * PI / 2.0).cos()
    }
}

/// `scale * sum_k c_k p_k(x, y) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    pub coefficients: [f64; 20],
    pub scale: f64,
    pub offset: f64,
}

impl AnalyticField {
    pub fn constant(v: f64) -> Self {
        Self {
            coefficients: [0.0; 20],
            scale: 0.0,
            offset: v,
        }
    }

    /// Coefficients uniform in `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, scale: f64) -> Self {
        let mut coefficients = [0.0; 20];
        for c in &mut coefficients {
            *c = rng.gen_range(-1.0..=1.0);
        }
        Self {
            coefficients,
            scale,
            offset: 0.0,
        }
    }

    /// Shifts the field so that its minimum over a `65 x 65` sampling grid of
    /// `[-1, 1]^2` is at least `min`.
    pub fn with_minimum(mut self, min: f64) -> Self {
        let samples = 65;
        let mut lowest = f64::INFINITY;
        for j in 0..samples {
            for i in 0..samples {
                let x = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
                let y = -1.0 + 2.0 * j as f64 / (samples - 1) as f64;
                lowest = lowest.min(self.value(Point::new(x, y)));
            }
        }
        if lowest < min {
            self.offset += min - lowest;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.offset == 0.0 && (self.scale == 0.0 || self.coefficients.iter().all(|&c| c == 0.0))
    }

    pub fn multiplied(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self.offset *= factor;
        self
    }

    pub fn derivative(&self, p: Point, nx: usize, ny: usize) -> f64 {
        let mut acc = 0.0;
        for (&(kx, ky), &c) in SLOTS.iter().zip(&self.coefficients) {
            acc += c * cos2(kx, p.x, nx) * sin2(ky, p.y, ny);
        }
        let base = if nx == 0 && ny == 0 { self.offset } else { 0.0 };
        self.scale * acc + base
    }

    pub fn value(&self, p: Point) -> f64 {
        self.derivative(p, 0, 0)
    }

    /// Taylor coefficients `d^q f / q!` about `p` up to total degree `order`.
    pub fn taylor(&self, p: Point, order: usize) -> Taylor {
        let mut fx = vec![[0.0; 20]; order + 1];
        let mut fy = vec![[0.0; 20]; order + 1];
        for (s, &(kx, ky)) in SLOTS.iter().enumerate() {
            for n in 0..=order {
                fx[n][s] = cos2(kx, p.x, n);
                fy[n][s] = sin2(ky, p.y, n);
            }
        }
        let fact: Vec<f64> = (0..=order)
            .scan(1.0, |a, k| {
                let v = *a;
                *a *= (k + 1) as f64;
                Some(v)
            })
            .collect();
        let set = MultiIndexSet::enumerate(order);
        let c = set
            .iter()
            .map(|q| {
                let sum: f64 = (0..20)
                    .map(|s| self.coefficients[s] * fx[q.qx][s] * fy[q.qy][s])
                    .sum();
                let base = if q.order() == 0 { self.offset } else { 0.0 };
                (self.scale * sum + base) / (fact[q.qx] * fact[q.qy])
            })
            .collect();
        Taylor { order, c }
    }
}

/// Truncated Taylor polynomial in `(x - x0, y - y0)`, laid out as
/// [`MultiIndexSet::enumerate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    pub order: usize,
    pub c: Vec<f64>,
}

impl Taylor {
    pub fn get(&self, q: MultiIndex) -> f64 {
        if q.order() > self.order {
            0.0
        } else {
            self.c[position(q, self.order)]
        }
    }

    /// Product truncated at `order`.
    pub fn mul(&self, other: &Taylor, order: usize) -> Taylor {
        let set = MultiIndexSet::enumerate(order);
        let mut c = vec![0.0; set.len()];
        for a in MultiIndexSet::enumerate(self.order.min(order)).iter() {
            let ca = self.get(a);
            if ca == 0.0 {
                continue;
            }
            for b in MultiIndexSet::enumerate((order - a.order()).min(other.order)).iter() {
                c[position(a.add(b), order)] += ca * other.get(b);
            }
        }
        Taylor { order, c }
    }

    /// Derivative along `axis`, one degree lower.
    pub fn derivative(&self, axis: usize) -> Taylor {
        let order = self.order.saturating_sub(1);
        let c = MultiIndexSet::enumerate(order)
            .iter()
            .map(|q| {
                let up = if axis == 0 {
                    MultiIndex::new(q.qx + 1, q.qy)
                } else {
                    MultiIndex::new(q.qx, q.qy + 1)
                };
                let k = if axis == 0 { up.qx } else { up.qy };
                k as f64 * self.get(up)
            })
            .collect();
        Taylor { order, c }
    }

    pub fn combine(&self, a: f64, other: &Taylor, b: f64) -> Taylor {
        let order = self.order.max(other.order);
        let c = MultiIndexSet::enumerate(order)
            .iter()
            .map(|q| a * self.get(q) + b * other.get(q))
            .collect();
        Taylor { order, c }
    }

    /// `sum_q c_q m_q` against moments of order `moment_order`.
    pub fn integrate(&self, moments: &[f64], moment_order: usize) -> f64 {
        assert!(
            self.order <= moment_order,
            "moments of order {moment_order} cannot integrate degree {}",
            self.order
        );
        MultiIndexSet::enumerate(self.order)
            .iter()
            .zip(&self.c)
            .map(|(q, c)| c * moments[position(q, moment_order)])
            .sum()
    }
}

/// Fields of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFields {
    pub u: AnalyticField,
    pub alpha: AnalyticField,
    pub beta: AnalyticField,
}

impl PhaseFields {
    /// `f = alpha u - div(beta grad u)`, evaluated pointwise.
    pub fn source(&self, p: Point) -> f64 {
        let (u, a, b) = (&self.u, &self.alpha, &self.beta);
        a.value(p) * u.value(p)
            - b.value(p) * (u.derivative(p, 2, 0) + u.derivative(p, 0, 2))
            - b.derivative(p, 1, 0) * u.derivative(p, 1, 0)
            - b.derivative(p, 0, 1) * u.derivative(p, 0, 1)
    }

    /// Taylor coefficients of `f` about `p` to `order`.
    pub fn source_taylor(&self, p: Point, order: usize) -> Taylor {
        let u = self.u.taylor(p, order + 2);
        let alpha = self.alpha.taylor(p, order);
        let beta = self.beta.taylor(p, order + 1);
        let lap = u
            .derivative(0)
            .derivative(0)
            .combine(1.0, &u.derivative(1).derivative(1), 1.0);
        let mut f = alpha.mul(&u, order);
        f = f.combine(1.0, &beta.mul(&lap, order), -1.0);
        for axis in 0..2 {
            f = f.combine(
                1.0,
                &beta.derivative(axis).mul(&u.derivative(axis), order),
                -1.0,
            );
        }
        f
    }

    /// Taylor coefficients of `beta du/dx_axis` about `p`.
    pub fn flux_taylor(&self, p: Point, order: usize, axis: usize) -> Taylor {
        let u = self.u.taylor(p, order + 1);
        self.beta.taylor(p, order).mul(&u.derivative(axis), order)
    }
}

/// Both phases of a manufactured problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub phases: [PhaseFields; 2],
}

impl Manufactured {
    pub fn phase(&self, phase: Phase) -> &PhaseFields {
        &self.phases[phase.index()]
    }

    /// Taylor order used for cell averages and jump integrals.
    pub fn taylor_order(mesh: &Mesh) -> usize {
        (mesh.order + 2).min(mesh.moment_order)
    }

    fn volume_average(
        &self,
        mesh: &Mesh,
        key: VolumeKey,
        taylor: impl Fn(&PhaseFields, Point, usize) -> Taylor,
    ) -> f64 {
        let m = mesh.volume_moments(key).expect("volume exists");
        let center = mesh.center(key.cell.i, key.cell.j);
        let k = Self::taylor_order(mesh);
        taylor(self.phase(key.phase), center, k).integrate(m, mesh.moment_order) / m[0]
    }

    /// Cell average of `u`.
    pub fn average_u(&self, mesh: &Mesh, key: VolumeKey) -> f64 {
        self.volume_average(mesh, key, |f, p, k| f.u.taylor(p, k))
    }

    /// Cell average of `f`.
    pub fn average_f(&self, mesh: &Mesh, key: VolumeKey) -> f64 {
        self.volume_average(mesh, key, |f, p, k| f.source_taylor(p, k))
    }

    /// `(w, v)` of one cut cell: integrated value and flux jumps.
    pub fn jump(&self, mesh: &Mesh, g: &CutCellGeometry) -> (f64, f64) {
        let k = Self::taylor_order(mesh);
        let q = mesh.moment_order;
        let (p, m) = (self.phase(Phase::Plus), self.phase(Phase::Minus));
        let du =
            p.u.taylor(g.center, k)
                .combine(1.0, &m.u.taylor(g.center, k), -1.0);
        let w = du.integrate(&g.eb_area, q);
        let mut v = 0.0;
        for axis in 0..2 {
            let jump = p.flux_taylor(g.center, k, axis).combine(
                1.0,
                &m.flux_taylor(g.center, k, axis),
                -1.0,
            );
            v += jump.integrate(&g.eb_normal[axis], q);
        }
        (w, v)
    }

    pub fn jump_data(&self, mesh: &Mesh) -> JumpData {
        JumpData {
            values: mesh
                .cut_cells()
                .map(|(c, g)| (c, self.jump(mesh, g)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field(seed: u64) -> AnalyticField {
        AnalyticField::random(&mut ChaCha8Rng::seed_from_u64(seed), 1.0)
    }

    #[test]
    fn slots_cover_the_stated_wave_numbers() {
        assert_eq!(SLOTS.len(), 20);
        assert!(SLOTS
            .iter()
            .all(|&(kx, ky)| (-2..=2).contains(&kx) && ky != 0 && (-2..=2).contains(&ky)));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = field(3);
        let eps = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for (nx, ny) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)] {
                let dx = (f.derivative(Point::new(p.x + eps, p.y), nx, ny)
                    - f.derivative(Point::new(p.x - eps, p.y), nx, ny))
                    / (2.0 * eps);
                let dy = (f.derivative(Point::new(p.x, p.y + eps), nx, ny)
                    - f.derivative(Point::new(p.x, p.y - eps), nx, ny))
                    / (2.0 * eps);
                let scale = 1.0 + f.derivative(p, nx + 1, ny).abs();
                assert!((dx - f.derivative(p, nx + 1, ny)).abs() < 1e-6 * scale * 100.0);
                assert!((dy - f.derivative(p, nx, ny + 1)).abs() < 1e-6 * scale * 100.0);
            }
        }
    }

    #[test]
    fn seeded_fields_are_reproducible() {
        assert_eq!(field(5), field(5));
        assert_ne!(field(5), field(6));
    }

    #[test]
    fn offset_enforces_the_minimum() {
        let f = field(1).with_minimum(0.1);
        for j in 0..=64 {
            for i in 0..=64 {
                let p = Point::new(-1.0 + i as f64 / 32.0, -1.0 + j as f64 / 32.0);
                assert!(f.value(p) >= 0.1 - 1e-12);
            }
        }
    }

    #[test]
    fn source_of_a_single_basis_function() {
        // beta = 1, alpha = 0, u = p_{1,1}: f = -laplacian(u), checked with
        // central differences of u itself.
        let mut coefficients = [0.0; 20];
        let slot = SLOTS.iter().position(|&s| s == (1, 1)).unwrap();
        coefficients[slot] = 1.0;
        let u = AnalyticField {
            coefficients,
            scale: 1.0,
            offset: 0.0,
        };
        let fields = PhaseFields {
            u: u.clone(),
            alpha: AnalyticField::constant(0.0),
            beta: AnalyticField::constant(1.0),
        };
        let p = Point::new(0.25, 0.25);
        let e = 1e-3;
        let v = |x: f64, y: f64| u.value(Point::new(x, y));
        let lap = (v(p.x + e, p.y) + v(p.x - e, p.y) + v(p.x, p.y + e) + v(p.x, p.y - e)
            - 4.0 * v(p.x, p.y))
            / (e * e);
        assert!((fields.source(p) + lap).abs() < 1e-6 * 100.0);
        // At (1/4, 1/4): u = cos^2 sin^2 = 1/4, laplacian = 2 pi^2 (cos(pi/2)...) = -pi^2 * ... exact:
        // d2/dx2 cos^2(pi x) = -2 pi^2 cos(2 pi x) = 0 at x = 1/4, likewise for sin^2.
        assert!(fields.source(p).abs() < 1e-12);
    }

    #[test]
    fn taylor_source_matches_pointwise_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fields = PhaseFields {
            u: AnalyticField::random(&mut rng, 1.0),
            alpha: AnalyticField::random(&mut rng, 1.0).with_minimum(0.1),
            beta: AnalyticField::random(&mut rng, 1.0).with_minimum(0.1),
        };
        let c = Point::new(0.3, -0.2);
        let t = fields.source_taylor(c, 6);
        assert!((t.c[0] - fields.source(c)).abs() < 1e-10 * fields.source(c).abs().max(1.0));
        // A small offset is reproduced by the truncated series.
        let d = 1e-3;
        let series: f64 = MultiIndexSet::enumerate(6)
            .iter()
            .zip(&t.c)
            .map(|(q, c)| c * q.eval(d, -d))
            .sum();
        let direct = fields.source(Point::new(c.x + d, c.y - d));
        assert!((series - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn scaling_u_scales_source_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = AnalyticField::random(&mut rng, 1.0);
        let alpha = AnalyticField::random(&mut rng, 1.0).with_minimum(0.1);
        let beta = AnalyticField::random(&mut rng, 1.0).with_minimum(0.1);
        let a = PhaseFields {
            u: u.clone(),
            alpha: alpha.clone(),
            beta: beta.clone(),
        };
        let b = PhaseFields {
            u: u.multiplied(1e3),
            alpha,
            beta,
        };
        let p = Point::new(0.1, 0.7);
        assert!((b.source(p) - 1e3 * a.source(p)).abs() < 1e-9 * b.source(p).abs());
    }

    #[test]
    fn averages_of_simple_fields() {
        let mesh = Mesh::build(
            &|_: Point| 1.0,
            crate::mesh::Domain::default(),
            16,
            2,
            crate::mesh::BoundarySpec::PERIODIC,
        )
        .unwrap();
        let c = PhaseFields {
            u: AnalyticField::constant(2.5),
            alpha: AnalyticField::constant(1.0),
            beta: AnalyticField::constant(1.0),
        };
        let m = Manufactured {
            phases: [c.clone(), c],
        };
        let key = VolumeKey {
            cell: crate::mesh::CellIndex::new(3, 5),
            phase: Phase::Plus,
        };
        assert!((m.average_u(&mesh, key) - 2.5).abs() < 1e-14);
        assert!((m.average_f(&mesh, key) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn jumps_across_a_vertical_line() {
        // psi = x + 0.01 on a 16-cell grid cuts column 7 along a vertical
        // line; u+ = 1, u- = 0 gives w = |A_B| = h and no flux jump.
        let mesh = Mesh::build(
            &|q: Point| q.x + 0.01,
            crate::mesh::Domain::default(),
            16,
            2,
            crate::mesh::BoundarySpec::PERIODIC,
        )
        .unwrap();
        let one = PhaseFields {
            u: AnalyticField::constant(1.0),
            alpha: AnalyticField::constant(1.0),
            beta: AnalyticField::constant(1.0),
        };
        let zero = PhaseFields {
            u: AnalyticField::constant(0.0),
            ..one.clone()
        };
        let m = Manufactured {
            phases: [one.clone(), zero],
        };
        let data = m.jump_data(&mesh);
        assert_eq!(data.values.len(), 16);
        for (w, v) in data.values.values() {
            assert!((w - mesh.h).abs() < 1e-14, "{w}");
            assert!(v.abs() < 1e-14);
        }
        let same = Manufactured {
            phases: [one.clone(), one],
        };
        assert!(same
            .jump_data(&mesh)
            .values
            .values()
            .all(|&(w, v)| w == 0.0 && v == 0.0));
    }
}
