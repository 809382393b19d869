use super::{Stencil, StencilSource, VolumeStencils};
use crate::error::{Error, Result};
use crate::geometry::{Face, Phase};
use crate::mesh::{CellIndex, Mesh};
use serde::Serialize;
use std::collections::BTreeMap;

/// A grid face, identified by its normal axis, the cell on its low side and
/// the phase of the face piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FaceKey {
    pub axis: usize,
    pub low: CellIndex,
    pub phase: Phase,
}

impl FaceKey {
    /// Key of `face` of cell `c`.
    pub fn of(mesh: &Mesh, c: CellIndex, face: Face, phase: Phase) -> Option<FaceKey> {
        let low = match face {
            Face::XHigh | Face::YHigh => c,
            Face::XLow => mesh.canonical(c.i - 1, c.j)?,
            Face::YLow => mesh.canonical(c.i, c.j - 1)?,
        };
        Some(FaceKey {
            axis: face.axis(),
            low,
            phase,
        })
    }
}

/// The single flux stencil shared by the two cells of a face.
#[derive(Debug, Clone, Serialize)]
pub struct MergedFace {
    pub stencil: Stencil,
    /// Producers of the low-side and high-side views.
    pub views: [Option<StencilSource>; 2],
}

/// Reduces the per-cell face fluxes to one stencil per face.
///
/// A face next to a regular cell takes the regular template; otherwise the
/// views of the two sides are averaged. A face piece is dropped when the cell
/// across it has no volume of that phase.
pub fn merge_faces(
    mesh: &Mesh,
    stencils: &[VolumeStencils],
) -> Result<BTreeMap<FaceKey, MergedFace>> {
    type Views<'a> = [Option<(StencilSource, &'a Stencil)>; 2];
    let mut views: BTreeMap<FaceKey, Views> = BTreeMap::new();
    for vs in stencils {
        for face in Face::ALL {
            let Some(s) = &vs.faces[face.index()] else {
                continue;
            };
            let (dx, dy) = face.offset();
            let other = mesh.cell_at(vs.key.cell.i + dx, vs.key.cell.j + dy);
            if !other.is_some_and(|cell| cell.has_phase(vs.key.phase)) {
                continue;
            }
            let Some(key) = FaceKey::of(mesh, vs.key.cell, face, vs.key.phase) else {
                continue;
            };
            // The low cell sees this face as its high face.
            let side = match face {
                Face::XHigh | Face::YHigh => 0,
                Face::XLow | Face::YLow => 1,
            };
            let entry = views.entry(key).or_default();
            if entry[side].is_some() {
                return Err(Error::OrientationMismatch(format!(
                    "{key:?} seen twice from side {side}"
                )));
            }
            entry[side] = Some((vs.source, s));
        }
    }
    let mut out = BTreeMap::new();
    for (key, v) in views {
        let regular: Vec<&Stencil> = v
            .iter()
            .flatten()
            .filter(|(src, _)| *src == StencilSource::Regular)
            .map(|(_, s)| *s)
            .collect();
        let chosen: Vec<&Stencil> = if regular.is_empty() {
            v.iter().flatten().map(|(_, s)| *s).collect()
        } else {
            regular
        };
        let stencil = if chosen.len() == 1 {
            chosen[0].clone()
        } else {
            let f = 1.0 / chosen.len() as f64;
            Stencil::combine(chosen.into_iter().map(|s| (s, f)))
        };
        out.insert(
            key,
            MergedFace {
                stencil,
                views: [v[0].map(|x| x.0), v[1].map(|x| x.0)],
            },
        );
    }
    Ok(out)
}
