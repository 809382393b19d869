//! Independent oracle for polynomial data: exact cell averages, face fluxes
//! and interface fluxes computed straight from the geometric moments and
//! closed-form line integrals, without touching any stencil code.

#![allow(dead_code)]

use ebfv::basis::{position, MultiIndex};
use ebfv::geometry::{Face, Phase, Point};
use ebfv::mesh::{Cell, CellClass, Mesh, VolumeKey};
use ebfv::stencil::{Coefficients, JumpData, ScalarField};
use ebfv::system::LinearSystem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Polynomial in global coordinates, `sum c_ab x^a y^b`.
#[derive(Debug, Clone, Default)]
pub struct Poly {
    pub terms: Vec<((usize, usize), f64)>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![((0, 0), c)],
        }
    }

    /// Random coefficients in `[-1, 1]` for every monomial of degree `<= deg`,
    /// plus `offset` on the constant.
    pub fn random(rng: &mut ChaCha8Rng, deg: usize, offset: f64, amplitude: f64) -> Self {
        let mut terms = Vec::new();
        for d in 0..=deg {
            for a in 0..=d {
                terms.push(((a, d - a), amplitude * rng.gen_range(-1.0..1.0)));
            }
        }
        terms[0].1 += offset;
        Self { terms }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|((a, b), _)| a + b)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| c * x.powi(a as i32) * y.powi(b as i32))
            .sum()
    }

    pub fn dx(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|t| t.0 .0 > 0)
                .map(|&((a, b), c)| ((a - 1, b), c * a as f64))
                .collect(),
        }
    }

    pub fn dy(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|t| t.0 .1 > 0)
                .map(|&((a, b), c)| ((a, b - 1), c * b as f64))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::new();
        for &((a, b), c) in &self.terms {
            for &((p, q), d) in &other.terms {
                terms.push(((a + p, b + q), c * d));
            }
        }
        Poly { terms }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|&(k, c)| (k, -c)));
        Poly { terms }
    }

    /// `sum_q l_q m_q` where `l` are the coefficients in `(x - cx, y - cy)`
    /// and `m` a moment vector of order `order` about `(cx, cy)`.
    pub fn integrate_moments(&self, center: Point, moments: &[f64], order: usize) -> f64 {
        let mut acc = 0.0;
        for &((a, b), c) in &self.terms {
            assert!(
                a + b <= order,
                "moment order {order} too low for degree {}",
                a + b
            );
            for i in 0..=a {
                let cx = binom(a, i) * center.x.powi((a - i) as i32);
                for j in 0..=b {
                    let cy = binom(b, j) * center.y.powi((b - j) as i32);
                    acc += c * cx * cy * moments[position(MultiIndex::new(i, j), order)];
                }
            }
        }
        acc
    }

    /// `\int p(x, y) dy` along `x = x0` for `y` in `[y0, y1]` (or with the
    /// roles swapped for `axis = 1`).
    pub fn line_integral(&self, axis: usize, at: f64, t0: f64, t1: f64) -> f64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| {
                let (fixed, free) = if axis == 0 { (a, b) } else { (b, a) };
                let k = free as i32 + 1;
                c * at.powi(fixed as i32) * (t1.powi(k) - t0.powi(k)) / k as f64
            })
            .sum()
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smooth data of one phase.
#[derive(Debug, Clone)]
pub struct PhaseData {
    pub u: Poly,
    pub alpha: Poly,
    pub beta: Poly,
}

impl PhaseData {
    pub fn random(rng: &mut ChaCha8Rng, p: usize) -> Self {
        Self {
            u: Poly::random(rng, p, 0.0, 1.0),
            alpha: Poly::random(rng, p - 2, 1.5, 0.3),
            beta: Poly::random(rng, p - 1, 2.0, 0.3),
        }
    }

    fn flux(&self) -> [Poly; 2] {
        [self.beta.mul(&self.u.dx()), self.beta.mul(&self.u.dy())]
    }
}

pub struct Fields {
    pub phases: [PhaseData; 2],
}

impl Fields {
    pub fn get(&self, phase: Phase) -> &PhaseData {
        &self.phases[phase.index()]
    }

    pub fn closures(&self) -> [Box<dyn ScalarField + '_>; 4] {
        let f = |poly: &'_ Poly| -> Box<dyn ScalarField + '_> {
            let poly = poly.clone();
            Box::new(move |q: Point| poly.eval(q.x, q.y))
        };
        [
            f(&self.phases[0].alpha),
            f(&self.phases[1].alpha),
            f(&self.phases[0].beta),
            f(&self.phases[1].beta),
        ]
    }
}

pub fn coefficients<'a>(c: &'a [Box<dyn ScalarField + 'a>; 4]) -> Coefficients<'a> {
    Coefficients {
        alpha: [c[0].as_ref(), c[1].as_ref()],
        beta: [c[2].as_ref(), c[3].as_ref()],
    }
}

pub fn average(mesh: &Mesh, key: VolumeKey, poly: &Poly) -> f64 {
    let m = mesh.volume_moments(key).expect("volume exists");
    let center = mesh.center(key.cell.i, key.cell.j);
    poly.integrate_moments(center, m, mesh.moment_order) / m[0]
}

/// Exact `\int beta du/dx_d` through the `phase` piece of `face`.
pub fn face_flux(mesh: &Mesh, key: VolumeKey, face: Face, data: &PhaseData) -> f64 {
    let Some(piece) = mesh
        .face_pieces(key.cell, face)
        .and_then(|f| f.get(key.phase))
    else {
        return 0.0;
    };
    let c = mesh.center(key.cell.i, key.cell.j);
    let h = mesh.h;
    let axis = face.axis();
    let flux = &data.flux()[axis];
    let (at, t) = if axis == 0 {
        (c.x + face.side() * h, c.y)
    } else {
        (c.y + face.side() * h, c.x)
    };
    flux.line_integral(axis, at, t + piece.0 * h, t + piece.1 * h)
}

/// Exact `\int beta grad(u) . n dA` over the interface of a cut cell, `n`
/// pointing from plus to minus.
pub fn interface_flux(mesh: &Mesh, key: VolumeKey, data: &PhaseData) -> f64 {
    let Some(g) = mesh.cell(key.cell).and_then(Cell::geometry) else {
        return 0.0;
    };
    let [fx, fy] = data.flux();
    let q = mesh.moment_order;
    fx.integrate_moments(g.center, &g.eb_normal[0], q)
        + fy.integrate_moments(g.center, &g.eb_normal[1], q)
}

pub fn jump_data(mesh: &Mesh, fields: &Fields) -> JumpData {
    let mut out = JumpData::default();
    let q = mesh.moment_order;
    let (p, m) = (fields.get(Phase::Plus), fields.get(Phase::Minus));
    let du = p.u.sub(&m.u);
    let [pfx, pfy] = p.flux();
    let [mfx, mfy] = m.flux();
    let (jx, jy) = (pfx.sub(&mfx), pfy.sub(&mfy));
    for (c, g) in mesh.cut_cells() {
        let w = du.integrate_moments(g.center, &g.eb_area, q);
        let v = jx.integrate_moments(g.center, &g.eb_normal[0], q)
            + jy.integrate_moments(g.center, &g.eb_normal[1], q);
        out.values.insert(c, (w, v));
    }
    out
}

/// Exact cell averages of `u` on the dofs.
pub fn exact_solution(mesh: &Mesh, fields: &Fields) -> Vec<f64> {
    mesh.dof_keys()
        .iter()
        .map(|&k| average(mesh, k, &fields.get(k.phase).u))
        .collect()
}

pub fn ghost_values(mesh: &Mesh, sys: &LinearSystem, fields: &Fields) -> Vec<f64> {
    sys.ghost_keys
        .iter()
        .map(|&k| average(mesh, k, &fields.get(k.phase).u))
        .collect()
}

/// Exact `<alpha u> - <div beta grad u>` of a volume and the magnitude of
/// its largest term.
pub fn exact_row(mesh: &Mesh, key: VolumeKey, fields: &Fields) -> (f64, f64) {
    let data = fields.get(key.phase);
    let vol = mesh.volume(key).expect("volume exists");
    let linear = average(mesh, key, &data.alpha.mul(&data.u));
    let mut scale = linear.abs();
    let mut div = 0.0;
    for face in Face::ALL {
        let f = face_flux(mesh, key, face, data);
        div += face.divergence_sign() * f;
        scale = scale.max(f.abs() / vol);
    }
    let eb = interface_flux(mesh, key, data);
    div += key.phase.sign() * eb;
    scale = scale.max(eb.abs() / vol);
    (linear - div / vol, scale)
}

pub struct RowError {
    pub key: VolumeKey,
    pub class: CellClass,
    pub relative: f64,
}

/// Applies the assembled operator (with ghost and jump contributions) to the
/// exact averages and compares every row with the oracle.
pub fn operator_errors(mesh: &Mesh, sys: &LinearSystem, fields: &Fields) -> Vec<RowError> {
    let u = exact_solution(mesh, fields);
    let lu = sys.apply(&u);
    let r = sys.rhs_shift(&ghost_values(mesh, sys, fields), &jump_data(mesh, fields));
    mesh.dof_keys()
        .iter()
        .enumerate()
        .map(|(d, &key)| {
            let (exact, scale) = exact_row(mesh, key, fields);
            let got = lu[d] - r[d];
            RowError {
                key,
                class: mesh.cell(key.cell).unwrap().class(),
                relative: (got - exact).abs() / scale.max(1e-300),
            }
        })
        .collect()
}

/// Largest relative error per class: regular, irregular, cut.
pub fn worst_by_class(errors: &[RowError]) -> [Option<f64>; 3] {
    let mut out = [None; 3];
    for e in errors {
        let slot = match e.class {
            CellClass::Regular => 0,
            CellClass::Irregular => 1,
            CellClass::Cut => 2,
            CellClass::Ghost => continue,
        };
        let v: &mut Option<f64> = &mut out[slot];
        *v = Some(v.map_or(e.relative, |m: f64| m.max(e.relative)));
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
