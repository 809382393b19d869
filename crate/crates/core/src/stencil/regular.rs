use super::{
    column_scale, g_alpha, g_flux, neighborhood_radius, point_fit_matrix, unit_face_moments,
    Coefficients, Stencil, StencilSource, VolumeStencils,
};
use crate::basis::{shift_moments, MultiIndexSet};
use crate::error::Result;
use crate::geometry::{full_cell_moments, Face, Phase, Point};
use crate::linalg::{distance_weight, scaled_weighted_pseudoinverse};
use crate::mesh::{regular_footprint, CellIndex, Mesh, VolumeKey};
use nalgebra::DMatrix;

/// Precomputed bilinear templates for cells whose footprint holds only full
/// cells of one phase.
///
/// `u` is fit in the symmetry-reduced basis on the Manhattan footprint, so
/// the fit is an exact inverse. Coefficients are sampled at cell centers:
/// `alpha` is fit at degree `P - 2` on the footprint, `beta` per face on the
/// cells within Manhattan distance `(P - 1) / 2` of the face center using the
/// degree `P - 1` basis with the top-order, odd-tangential monomials removed.
/// Each template maps coefficient samples straight to stencil weights.
#[derive(Debug, Clone)]
pub struct RegularTemplate {
    pub order: usize,
    pub footprint: Vec<(i64, i64)>,
    /// `(footprint x footprint)`: linear-term weights from alpha samples.
    pub linear: DMatrix<f64>,
    /// Per face: `(footprint x face footprint)` flux weights from beta samples.
    pub faces: [DMatrix<f64>; 4],
    pub face_footprints: [Vec<(i64, i64)>; 4],
}

impl RegularTemplate {
    pub fn new(p: usize) -> Result<Self> {
        let footprint = regular_footprint(p);
        let reduced = MultiIndexSet::reduced_regular(p)?;
        let q = 2 * p;
        let unit = full_cell_moments(1.0, q);
        let rho = neighborhood_radius(p);

        let full = MultiIndexSet::enumerate(p);
        let mut m_u = DMatrix::zeros(footprint.len(), reduced.len());
        for (row, &(di, dj)) in footprint.iter().enumerate() {
            let shifted = shift_moments(&unit, q, (di as f64, dj as f64), p);
            for (k, r) in reduced.iter().enumerate() {
                m_u[(row, k)] = shifted[full.position_of(r).unwrap()];
            }
        }
        let ones = vec![1.0; footprint.len()];
        let k_u = scaled_weighted_pseudoinverse(&m_u, &ones, &column_scale(&reduced, rho))?;
        let k_u_t = k_u.transpose();

        let centers: Vec<(f64, f64)> = footprint
            .iter()
            .map(|&(a, b)| (a as f64, b as f64))
            .collect();
        let weights: Vec<f64> = footprint
            .iter()
            .map(|&(a, b)| distance_weight(((a * a + b * b) as f64).sqrt(), p))
            .collect();
        let alpha_set = MultiIndexSet::enumerate(p - 2);
        let k_alpha = point_fit_matrix(&centers, &weights, &alpha_set, rho)?;
        let mut g_a = DMatrix::zeros(reduced.len(), alpha_set.len());
        for k in 0..alpha_set.len() {
            let mut e = vec![0.0; alpha_set.len()];
            e[k] = 1.0;
            let g = g_alpha(&unit, q, &e, &alpha_set, &reduced)?;
            for (i, v) in g.into_iter().enumerate() {
                g_a[(i, k)] = v;
            }
        }
        let linear = &k_u_t * g_a * k_alpha;

        let mut faces: [DMatrix<f64>; 4] = std::array::from_fn(|_| DMatrix::zeros(0, 0));
        let mut face_footprints: [Vec<(i64, i64)>; 4] = Default::default();
        for face in Face::ALL {
            let (foot, beta_set) = face_basis(face, p);
            let pts: Vec<(f64, f64)> = foot.iter().map(|&(a, b)| (a as f64, b as f64)).collect();
            let k_beta = point_fit_matrix(&pts, &vec![1.0; pts.len()], &beta_set, rho)?;
            let order = p + beta_set.order() - 1;
            let m = unit_face_moments(face, -0.5, 0.5, order);
            let mut g_b = DMatrix::zeros(reduced.len(), beta_set.len());
            for k in 0..beta_set.len() {
                let mut e = vec![0.0; beta_set.len()];
                e[k] = 1.0;
                let g = if face.axis() == 0 {
                    g_flux(Some(&m), None, order, &e, &beta_set, &reduced)?
                } else {
                    g_flux(None, Some(&m), order, &e, &beta_set, &reduced)?
                };
                for (i, v) in g.into_iter().enumerate() {
                    g_b[(i, k)] = v;
                }
            }
            faces[face.index()] = &k_u_t * g_b * k_beta;
            face_footprints[face.index()] = foot;
        }
        Ok(Self {
            order: p,
            footprint,
            linear,
            faces,
            face_footprints,
        })
    }
}

/// Footprint and beta basis for one face of the unit cell at the origin.
fn face_basis(face: Face, p: usize) -> (Vec<(i64, i64)>, MultiIndexSet) {
    let (fx, fy) = match face {
        Face::XLow => (-0.5, 0.0),
        Face::XHigh => (0.5, 0.0),
        Face::YLow => (0.0, -0.5),
        Face::YHigh => (0.0, 0.5),
    };
    let radius = (p as f64 - 1.0) / 2.0;
    let r = p as i64;
    let mut foot = Vec::new();
    for dj in -r..=r {
        for di in -r..=r {
            if (di as f64 - fx).abs() + (dj as f64 - fy).abs() <= radius + 1e-12 {
                foot.push((di, dj));
            }
        }
    }
    let top = p - 1;
    let set = MultiIndexSet::enumerate(top).filter(|q| {
        let tangential = if face.axis() == 0 { q.qy } else { q.qx };
        q.order() < top || tangential % 2 == 0
    });
    (foot, set)
}

/// Stencils of a regular cell from the precomputed template.
pub fn regular_stencils(
    mesh: &Mesh,
    template: &RegularTemplate,
    c: CellIndex,
    phase: Phase,
    coeffs: &Coefficients,
) -> VolumeStencils {
    let h = mesh.h;
    let center = mesh.center(c.i, c.j);
    let at = |(di, dj): (i64, i64)| Point::new(center.x + di as f64 * h, center.y + dj as f64 * h);
    let keys: Vec<VolumeKey> = template
        .footprint
        .iter()
        .map(|&(di, dj)| VolumeKey {
            cell: mesh
                .canonical(c.i + di, c.j + dj)
                .expect("regular footprint inside mesh"),
            phase,
        })
        .collect();
    let to_stencil = |w: nalgebra::DVector<f64>| Stencil {
        volumes: keys.iter().copied().zip(w.iter().copied()).collect(),
        jumps: Vec::new(),
    };
    let alpha = coeffs.alpha(phase);
    let a_vals = nalgebra::DVector::from_iterator(
        template.footprint.len(),
        template.footprint.iter().map(|&o| alpha.value(at(o))),
    );
    let linear = to_stencil(&template.linear * a_vals);
    let beta = coeffs.beta(phase);
    let faces = Face::ALL.map(|face| {
        let foot = &template.face_footprints[face.index()];
        let b_vals =
            nalgebra::DVector::from_iterator(foot.len(), foot.iter().map(|&o| beta.value(at(o))));
        Some(to_stencil(&template.faces[face.index()] * b_vals))
    });
    VolumeStencils {
        key: VolumeKey { cell: c, phase },
        source: StencilSource::Regular,
        fraction: 1.0,
        linear,
        faces,
        eb: None,
    }
}
