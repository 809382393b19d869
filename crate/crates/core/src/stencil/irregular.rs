use super::{
    column_scale, contract, g_alpha, g_face, member_centroid, member_point, member_volume_moments,
    member_weights, neighborhood_radius, point_fit_matrix, scale_moments, Coefficients,
    StencilSource, VolumeStencils,
};
use crate::basis::MultiIndexSet;
use crate::error::Result;
use crate::geometry::{Face, Phase};
use crate::linalg::scaled_weighted_pseudoinverse;
use crate::mesh::{CellIndex, Mesh, VolumeKey};
use nalgebra::{DMatrix, DVector};

/// Stencils of a full cell near the interface, from a weighted least-squares
/// fit of the full degree-`P` basis to the same-phase cell averages in the
/// surrounding square.
pub fn irregular_stencils(
    mesh: &Mesh,
    c: CellIndex,
    phase: Phase,
    coeffs: &Coefficients,
) -> Result<VolumeStencils> {
    let p = mesh.order;
    let q = mesh.moment_order;
    let cols = MultiIndexSet::enumerate(p);
    let nb = mesh.neighborhood(c, phase)?;
    let weights = member_weights(&nb, p);
    let rho = neighborhood_radius(p);

    let mut m = DMatrix::zeros(nb.members.len(), cols.len());
    for (row, mem) in nb.members.iter().enumerate() {
        let mom = member_volume_moments(mesh, mem.key, mem.offset, p);
        for k in 0..cols.len() {
            m[(row, k)] = mom[k] / mom[0];
        }
    }
    let k = scaled_weighted_pseudoinverse(&m, &weights, &column_scale(&cols, rho))?;
    let keys: Vec<VolumeKey> = nb.members.iter().map(|mem| mem.key).collect();

    let positions: Vec<(f64, f64)> = nb
        .members
        .iter()
        .map(|mem| member_centroid(mesh, mem.key, mem.offset))
        .collect();
    let fit = point_fit_matrix(&positions, &weights, &cols, rho)?;
    let sample = |f: &dyn super::ScalarField| -> Vec<f64> {
        let vals = DVector::from_iterator(
            nb.members.len(),
            nb.members
                .iter()
                .map(|mem| f.value(member_point(mesh, c, mem.key, mem.offset))),
        );
        (&fit * vals).iter().copied().collect()
    };
    let c_alpha = sample(coeffs.alpha(phase));
    let c_beta = sample(coeffs.beta(phase));

    let key = VolumeKey { cell: c, phase };
    let own = scale_moments(mesh.volume_moments(key).expect("own volume"), q, mesh.h, 2);
    let fraction = own[0];
    let g_lin: Vec<f64> = g_alpha(&own, q, &c_alpha, &cols, &cols)?
        .into_iter()
        .map(|v| v / fraction)
        .collect();
    let linear = contract(&k, 0..cols.len(), &g_lin, &keys);

    let pieces = Face::ALL.map(|f| mesh.face_pieces(c, f).and_then(|fp| fp.get(phase)));
    let mut faces: [Option<super::Stencil>; 4] = Default::default();
    for face in Face::ALL {
        if let Some(piece) = pieces[face.index()] {
            let g = g_face(face, piece, &c_beta, &cols, &cols)?;
            faces[face.index()] = Some(contract(&k, 0..cols.len(), &g, &keys));
        }
    }
    Ok(VolumeStencils {
        key,
        source: StencilSource::Irregular,
        fraction,
        linear,
        faces,
        eb: None,
    })
}
