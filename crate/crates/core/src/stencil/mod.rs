//! Stencils for the cell-averaged linear term and the face and interface
//! flux integrals.
//!
//! Every functional is written as a contraction `g . c` against the Taylor
//! coefficients `c` of `u` about the center of the cell being discretized,
//! and `c` is recovered from cell averages (and jump data, in cut cells) by a
//! weighted pseudoinverse `K`. The stencil is then `K^T g`.
//!
//! Internally all polynomials use the scaled coordinate `(x - x_c) / h`, so
//! moment matrices are O(1) independent of the grid spacing. In these
//! coordinates a flux integral `\int beta grad(u) . n dA` is unchanged (the
//! `1/h` of the gradient cancels the `h` of the face length), and volume
//! moments are divided by `h^2`.

mod cut;
mod irregular;
mod merge;
mod regular;

pub use cut::cut_cell_stencils;
pub use irregular::irregular_stencils;
pub use merge::{merge_faces, FaceKey, MergedFace};
pub use regular::{regular_stencils, RegularTemplate};

use crate::basis::{position, shift_moments, MultiIndex, MultiIndexSet};
use crate::error::{Error, Result};
use crate::geometry::{face_moments, Face, Phase, Point};
use crate::linalg::{distance_weight, scaled_weighted_pseudoinverse};
use crate::mesh::{Cell, CellClass, CellIndex, Mesh, Neighborhood, VolumeKey};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// A spatially varying scalar (a coefficient or source term).
pub trait ScalarField: Send + Sync {
    fn value(&self, p: Point) -> f64;
}

impl<F: Fn(Point) -> f64 + Send + Sync> ScalarField for F {
    fn value(&self, p: Point) -> f64 {
        self(p)
    }
}

/// Coefficients `alpha` and `beta` per phase (indexed by [`Phase::index`]).
#[derive(Clone, Copy)]
pub struct Coefficients<'a> {
    pub alpha: [&'a dyn ScalarField; 2],
    pub beta: [&'a dyn ScalarField; 2],
}

impl<'a> Coefficients<'a> {
    pub fn alpha(&self, phase: Phase) -> &'a dyn ScalarField {
        self.alpha[phase.index()]
    }

    pub fn beta(&self, phase: Phase) -> &'a dyn ScalarField {
        self.beta[phase.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum JumpKind {
    /// `\int (u^+ - u^-) dA` over the interface piece.
    Value,
    /// `\int (beta^+ du^+/dn - beta^- du^-/dn) dA`.
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct JumpKey {
    pub cell: CellIndex,
    pub kind: JumpKind,
}

/// Integrated jump conditions per cut cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpData {
    pub values: BTreeMap<CellIndex, (f64, f64)>,
}

impl JumpData {
    pub fn get(&self, key: JumpKey) -> f64 {
        self.values
            .get(&key.cell)
            .map_or(0.0, |&(w, v)| match key.kind {
                JumpKind::Value => w,
                JumpKind::Flux => v,
            })
    }
}

/// Linear combination of cell-averaged unknowns and jump data.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stencil {
    pub volumes: Vec<(VolumeKey, f64)>,
    pub jumps: Vec<(JumpKey, f64)>,
}

impl Stencil {
    pub fn apply(&self, u: impl Fn(VolumeKey) -> f64) -> f64 {
        self.volumes.iter().map(|&(k, w)| w * u(k)).sum()
    }

    /// Contribution of the jump data.
    pub fn rhs_shift(&self, data: &JumpData) -> f64 {
        self.jumps.iter().map(|&(k, w)| w * data.get(k)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Stencil {
        Stencil {
            volumes: self.volumes.iter().map(|&(k, w)| (k, w * factor)).collect(),
            jumps: self.jumps.iter().map(|&(k, w)| (k, w * factor)).collect(),
        }
    }

    /// Sum of `terms` with the given factors, duplicates combined.
    pub fn combine<'s>(terms: impl IntoIterator<Item = (&'s Stencil, f64)>) -> Stencil {
        let mut vol: BTreeMap<VolumeKey, f64> = BTreeMap::new();
        let mut jump: BTreeMap<JumpKey, f64> = BTreeMap::new();
        for (s, f) in terms {
            for &(k, w) in &s.volumes {
                *vol.entry(k).or_default() += f * w;
            }
            for &(k, w) in &s.jumps {
                *jump.entry(k).or_default() += f * w;
            }
        }
        Stencil {
            volumes: vol.into_iter().collect(),
            jumps: jump.into_iter().collect(),
        }
    }
}

/// How a volume's stencils were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StencilSource {
    Regular,
    Irregular,
    Cut,
}

/// All stencils belonging to one phase volume.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeStencils {
    pub key: VolumeKey,
    pub source: StencilSource,
    /// Volume fraction `|V| / h^2`.
    pub fraction: f64,
    /// Cell average of `alpha u`.
    pub linear: Stencil,
    /// Flux `\int beta du/dx_d dA` in the `+d` direction through each face
    /// piece of this phase (indexed by [`Face::index`]).
    pub faces: [Option<Stencil>; 4],
    /// Interface flux `\int beta grad(u) . n dA` with `n` pointing from plus
    /// to minus, for cut cells.
    pub eb: Option<Stencil>,
}

/// Builds the stencils of every interior volume. Output order follows the
/// dof numbering, so results are independent of the thread schedule.
pub fn build_stencils(mesh: &Mesh, coeffs: &Coefficients) -> Result<Vec<VolumeStencils>> {
    let template = RegularTemplate::new(mesh.order)?;
    let cells: Vec<CellIndex> = mesh.interior().collect();
    let per_cell: Vec<Result<Vec<VolumeStencils>>> = cells
        .par_iter()
        .map(|&c| match mesh.cell(c).expect("interior cell") {
            Cell::Full {
                phase,
                class: CellClass::Regular,
            } => Ok(vec![regular_stencils(mesh, &template, c, *phase, coeffs)]),
            Cell::Full { phase, .. } => Ok(vec![irregular_stencils(mesh, c, *phase, coeffs)?]),
            Cell::Cut(_) => {
                let [p, m] = cut_cell_stencils(mesh, c, coeffs)?;
                Ok(vec![p, m])
            }
        })
        .collect();
    let mut out = Vec::with_capacity(mesh.dof_count());
    for r in per_cell {
        out.extend(r?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Moment helpers (scaled coordinates).

/// Divides physical moments by `h^(|q| + extra)`.
pub(crate) fn scale_moments(m: &[f64], order: usize, h: f64, extra: i32) -> Vec<f64> {
    MultiIndexSet::enumerate(order)
        .iter()
        .zip(m)
        .map(|(q, v)| v / h.powi(q.order() as i32 + extra))
        .collect()
}

/// Scaled volume moments of a neighborhood member about the center cell.
pub(crate) fn member_volume_moments(
    mesh: &Mesh,
    key: VolumeKey,
    offset: (i64, i64),
    out_order: usize,
) -> Vec<f64> {
    let q = mesh.moment_order;
    let m = mesh.volume_moments(key).expect("member volume exists");
    let scaled = scale_moments(m, q, mesh.h, 2);
    shift_moments(&scaled, q, (offset.0 as f64, offset.1 as f64), out_order)
}

/// Scaled position of a member volume's centroid relative to the center.
pub(crate) fn member_centroid(mesh: &Mesh, key: VolumeKey, offset: (i64, i64)) -> (f64, f64) {
    let m = mesh.volume_moments(key).expect("member volume exists");
    let q = mesh.moment_order;
    let h = mesh.h;
    let cx = m[1] / m[0] / h;
    let cy = m[position(MultiIndex::new(0, 1), q)] / m[0] / h;
    (offset.0 as f64 + cx, offset.1 as f64 + cy)
}

/// Physical centroid of a member volume.
pub(crate) fn member_point(
    mesh: &Mesh,
    center: CellIndex,
    key: VolumeKey,
    offset: (i64, i64),
) -> Point {
    let (sx, sy) = member_centroid(mesh, key, offset);
    let c = mesh.center(center.i, center.j);
    Point::new(c.x + sx * mesh.h, c.y + sy * mesh.h)
}

/// Column scaling `rho^-|q|` that balances monomials over a neighborhood of
/// radius about `rho` cells.
pub(crate) fn column_scale(set: &MultiIndexSet, rho: f64) -> Vec<f64> {
    set.iter().map(|q| rho.powi(-(q.order() as i32))).collect()
}

pub(crate) fn neighborhood_radius(p: usize) -> f64 {
    p as f64 / 2.0 + 1.0
}

/// Least-squares Taylor coefficients (full set of order `p`) of point
/// samples at scaled positions.
pub fn coefficient_taylor(
    positions: &[(f64, f64)],
    values: &[f64],
    weights: &[f64],
    p: usize,
) -> Result<Vec<f64>> {
    let set = MultiIndexSet::enumerate(p);
    let k = point_fit_matrix(positions, weights, &set, neighborhood_radius(p))?;
    Ok((0..set.len())
        .map(|i| (0..values.len()).map(|j| k[(i, j)] * values[j]).sum())
        .collect())
}

/// Pseudoinverse mapping point samples to Taylor coefficients over `set`.
pub(crate) fn point_fit_matrix(
    positions: &[(f64, f64)],
    weights: &[f64],
    set: &MultiIndexSet,
    rho: f64,
) -> Result<DMatrix<f64>> {
    let m = DMatrix::from_fn(positions.len(), set.len(), |i, k| {
        let (x, y) = positions[i];
        set.get(k).eval(x, y)
    });
    scaled_weighted_pseudoinverse(&m, weights, &column_scale(set, rho))
}

pub(crate) fn member_weights(nb: &Neighborhood, p: usize) -> Vec<f64> {
    nb.members
        .iter()
        .map(|m| distance_weight(m.delta, p))
        .collect()
}

// ---------------------------------------------------------------------------
// g-vectors.

fn moment_at(m: &[f64], order: usize, q: MultiIndex) -> Result<f64> {
    if q.order() > order {
        return Err(Error::MissingMoment(q.order(), order));
    }
    Ok(m[position(q, order)])
}

/// `g[q] = sum_r c^r m^(q + r)`: the linear term `\int alpha u dV` per
/// coefficient of `u`. `coef` is indexed by `coef_set`.
pub fn g_alpha(
    moments: &[f64],
    moment_order: usize,
    coef: &[f64],
    coef_set: &MultiIndexSet,
    cols: &MultiIndexSet,
) -> Result<Vec<f64>> {
    cols.iter()
        .map(|q| {
            let mut acc = 0.0;
            for (r, &c) in coef_set.iter().zip(coef) {
                if c != 0.0 {
                    acc += c * moment_at(moments, moment_order, q.add(r))?;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// `g[q] = sum_r c^r (q_x m_x^(q + r - e_x) + q_y m_y^(q + r - e_y))`: the
/// flux `\int beta grad(u) . n dA` per coefficient of `u`, from the
/// normal-weighted moments `m_x`, `m_y` of the surface (either may be absent
/// when that normal component vanishes).
pub fn g_flux(
    normal_x: Option<&[f64]>,
    normal_y: Option<&[f64]>,
    moment_order: usize,
    coef: &[f64],
    coef_set: &MultiIndexSet,
    cols: &MultiIndexSet,
) -> Result<Vec<f64>> {
    cols.iter()
        .map(|q| {
            let mut acc = 0.0;
            for (r, &c) in coef_set.iter().zip(coef) {
                if c == 0.0 {
                    continue;
                }
                if let (Some(mx), Some(qm)) = (normal_x, q.minus_x()) {
                    acc += c * q.qx as f64 * moment_at(mx, moment_order, qm.add(r))?;
                }
                if let (Some(my), Some(qm)) = (normal_y, q.minus_y()) {
                    acc += c * q.qy as f64 * moment_at(my, moment_order, qm.add(r))?;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Scaled moments (`+axis` normal) of the piece `[lo, hi]` of `face` of the
/// center cell.
pub(crate) fn unit_face_moments(face: Face, lo: f64, hi: f64, order: usize) -> Vec<f64> {
    face_moments(face.axis(), face.side(), lo, hi, 1.0, order).area
}

/// Flux g-vector through a grid-aligned face piece.
pub(crate) fn g_face(
    face: Face,
    piece: (f64, f64),
    coef: &[f64],
    coef_set: &MultiIndexSet,
    cols: &MultiIndexSet,
) -> Result<Vec<f64>> {
    let order = (cols.order() + coef_set.order()).max(1) - 1;
    let m = unit_face_moments(face, piece.0, piece.1, order);
    if face.axis() == 0 {
        g_flux(Some(&m), None, order, coef, coef_set, cols)
    } else {
        g_flux(None, Some(&m), order, coef, coef_set, cols)
    }
}

/// Stencil `K^T g` over data sites given by `keys`.
pub(crate) fn contract(
    k: &DMatrix<f64>,
    rows: std::ops::Range<usize>,
    g: &[f64],
    keys: &[VolumeKey],
) -> Stencil {
    let volumes = keys
        .iter()
        .enumerate()
        .map(|(j, &key)| {
            let w: f64 = rows.clone().zip(g).map(|(i, gi)| k[(i, j)] * gi).sum();
            (key, w)
        })
        .collect();
    Stencil {
        volumes,
        jumps: Vec::new(),
    }
}
