use super::{
    column_scale, g_alpha, g_face, g_flux, member_centroid, member_point, member_volume_moments,
    member_weights, neighborhood_radius, point_fit_matrix, scale_moments, Coefficients, JumpKey,
    JumpKind, Stencil, StencilSource, VolumeStencils,
};
use crate::basis::{position, shift_moments, MultiIndexSet};
use crate::error::Result;
use crate::geometry::{CutCellGeometry, Face, Phase};
use crate::linalg::{distance_weight, scaled_weighted_pseudoinverse};
use crate::mesh::{Cell, CellIndex, Mesh, VolumeKey};
use nalgebra::{DMatrix, DVector};

/// Interface moments of a nearby cut cell, scaled and re-centered on the
/// stencil's cell.
struct JumpSite {
    cell: CellIndex,
    delta: f64,
    area: Vec<f64>,
    normal: [Vec<f64>; 2],
}

fn jump_site(
    mesh: &Mesh,
    cell: CellIndex,
    g: &CutCellGeometry,
    offset: (i64, i64),
    out_order: usize,
) -> JumpSite {
    let q = mesh.moment_order;
    let h = mesh.h;
    let shift = (offset.0 as f64, offset.1 as f64);
    let prep = |m: &[f64]| shift_moments(&scale_moments(m, q, h, 1), q, shift, out_order);
    JumpSite {
        cell,
        delta: ((offset.0 * offset.0 + offset.1 * offset.1) as f64).sqrt(),
        area: prep(&g.eb_area),
        normal: [prep(&g.eb_normal[0]), prep(&g.eb_normal[1])],
    }
}

/// Stencils for both phase volumes of a cut cell.
///
/// The Taylor coefficients of `u^+` and `u^-` are solved together: the data
/// are the cell averages of each phase in its own neighborhood plus, for every
/// cut cell in the surrounding square, the integrated value and flux jumps.
/// The pseudoinverse splits into a part acting on cell averages (the stencil
/// weights) and a part acting on jump data (the right-hand side shift).
pub fn cut_cell_stencils(
    mesh: &Mesh,
    c: CellIndex,
    coeffs: &Coefficients,
) -> Result<[VolumeStencils; 2]> {
    let p = mesh.order;
    let q = mesh.moment_order;
    let h = mesh.h;
    let cols = MultiIndexSet::enumerate(p);
    let nc = cols.len();
    let rho = neighborhood_radius(p);
    let geometry = mesh.cell(c).and_then(Cell::geometry).expect("cut cell");

    let nbs = [
        mesh.neighborhood(c, Phase::Plus)?,
        mesh.neighborhood(c, Phase::Minus)?,
    ];

    // Coefficient fits per phase over the same neighborhoods.
    let mut c_alpha: [Vec<f64>; 2] = Default::default();
    let mut c_beta: [Vec<f64>; 2] = Default::default();
    for phase in Phase::BOTH {
        let nb = &nbs[phase.index()];
        let w = member_weights(nb, p);
        let pos: Vec<(f64, f64)> = nb
            .members
            .iter()
            .map(|m| member_centroid(mesh, m.key, m.offset))
            .collect();
        let fit = point_fit_matrix(&pos, &w, &cols, rho)?;
        let pts: Vec<_> = nb
            .members
            .iter()
            .map(|m| member_point(mesh, c, m.key, m.offset))
            .collect();
        let a =
            DVector::from_iterator(pts.len(), pts.iter().map(|&x| coeffs.alpha(phase).value(x)));
        let b = DVector::from_iterator(pts.len(), pts.iter().map(|&x| coeffs.beta(phase).value(x)));
        c_alpha[phase.index()] = (&fit * a).iter().copied().collect();
        c_beta[phase.index()] = (&fit * b).iter().copied().collect();
    }

    let pr = p as i64;
    let mut sites = Vec::new();
    for dj in -pr..=pr {
        for di in -pr..=pr {
            let Some(cell) = mesh.canonical(c.i + di, c.j + dj) else {
                continue;
            };
            if let Some(g) = mesh.cell(cell).and_then(Cell::geometry) {
                sites.push(jump_site(mesh, cell, g, (di, dj), 2 * p - 1));
            }
        }
    }

    let n_plus = nbs[0].members.len();
    let n_minus = nbs[1].members.len();
    let n_vol = n_plus + n_minus;
    let rows = n_vol + 2 * sites.len();
    let mut m = DMatrix::zeros(rows, 2 * nc);
    let mut weights = Vec::with_capacity(rows);
    let mut vol_keys = Vec::with_capacity(n_vol);
    for (block, nb) in nbs.iter().enumerate() {
        let base = if block == 0 { 0 } else { n_plus };
        for (r, mem) in nb.members.iter().enumerate() {
            let mom = member_volume_moments(mesh, mem.key, mem.offset, p);
            for k in 0..nc {
                m[(base + r, block * nc + k)] = mom[k] / mom[0];
            }
            vol_keys.push(mem.key);
        }
        weights.extend(member_weights(nb, p));
    }
    // Jump rows: value rows carry data w/h, flux rows carry v/beta_max so
    // that a large coefficient ratio does not let one row dominate the fit.
    let beta_max = c_beta[0][0].abs().max(c_beta[1][0].abs());
    let mut jump_keys = Vec::with_capacity(2 * sites.len());
    let order = 2 * p - 1;
    for (s, site) in sites.iter().enumerate() {
        let rv = n_vol + 2 * s;
        let rf = rv + 1;
        for (k, qk) in cols.iter().enumerate() {
            let a = site.area[position(qk, order)];
            m[(rv, k)] = a;
            m[(rv, nc + k)] = -a;
        }
        let gp = g_flux(
            Some(&site.normal[0]),
            Some(&site.normal[1]),
            order,
            &c_beta[0],
            &cols,
            &cols,
        )?;
        let gm = g_flux(
            Some(&site.normal[0]),
            Some(&site.normal[1]),
            order,
            &c_beta[1],
            &cols,
            &cols,
        )?;
        for k in 0..nc {
            m[(rf, k)] = gp[k] / beta_max;
            m[(rf, nc + k)] = -gm[k] / beta_max;
        }
        let w = distance_weight(site.delta, p);
        weights.push(w);
        weights.push(w);
        jump_keys.push((
            JumpKey {
                cell: site.cell,
                kind: JumpKind::Value,
            },
            1.0 / h,
        ));
        jump_keys.push((
            JumpKey {
                cell: site.cell,
                kind: JumpKind::Flux,
            },
            1.0 / beta_max,
        ));
    }

    let mut scale = column_scale(&cols, rho);
    scale.extend_from_within(..);
    let k = scaled_weighted_pseudoinverse(&m, &weights, &scale)?;

    let contract = |block: usize, g: &[f64]| -> Stencil {
        let rows = block * nc..(block + 1) * nc;
        let weight = |j: usize| -> f64 { rows.clone().zip(g).map(|(i, gi)| k[(i, j)] * gi).sum() };
        Stencil {
            volumes: vol_keys
                .iter()
                .enumerate()
                .map(|(j, &key)| (key, weight(j)))
                .collect(),
            jumps: jump_keys
                .iter()
                .enumerate()
                .map(|(s, &(key, f))| (key, f * weight(n_vol + s)))
                .collect(),
        }
    };

    let mut out = Vec::with_capacity(2);
    for phase in Phase::BOTH {
        let b = phase.index();
        let key = VolumeKey { cell: c, phase };
        let own = scale_moments(&geometry.volume[b], q, h, 2);
        let fraction = own[0];
        let g_lin: Vec<f64> = g_alpha(&own, q, &c_alpha[b], &cols, &cols)?
            .into_iter()
            .map(|v| v / fraction)
            .collect();
        let linear = contract(b, &g_lin);
        let mut faces: [Option<Stencil>; 4] = Default::default();
        for face in Face::ALL {
            if let Some(piece) = geometry.faces[face.index()].get(phase) {
                let g = g_face(face, piece, &c_beta[b], &cols, &cols)?;
                faces[face.index()] = Some(contract(b, &g));
            }
        }
        let nx = scale_moments(&geometry.eb_normal[0], q, h, 1);
        let ny = scale_moments(&geometry.eb_normal[1], q, h, 1);
        let g_eb = g_flux(Some(&nx), Some(&ny), q, &c_beta[b], &cols, &cols)?;
        let eb = Some(contract(b, &g_eb));
        out.push(VolumeStencils {
            key,
            source: StencilSource::Cut,
            fraction,
            linear,
            faces,
            eb,
        });
    }
    let minus = out.pop().unwrap();
    let plus = out.pop().unwrap();
    Ok([plus, minus])
}
