//! Global assembly of `L u = f + r` and its solution.

mod krylov;
mod sparse;

pub use krylov::{
    bicgstab, direct, gmres, IdentityPreconditioner, Ilu0, KrylovOutcome, Preconditioner,
};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Face, Phase};
use crate::mesh::{Mesh, VolumeKey};
use crate::stencil::{
    build_stencils, merge_faces, Coefficients, FaceKey, JumpData, JumpKey, Stencil, VolumeStencils,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

/// Discrete operator over the interior volumes.
///
/// Ghost volumes (Dirichlet layers) and jump data enter linearly through
/// `ghost` and `jump`, so the right-hand side shift is
/// `r = -(ghost * g + jump * d)`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub l: CsrMatrix,
    pub ghost: CsrMatrix,
    pub ghost_keys: Vec<VolumeKey>,
    pub jump: CsrMatrix,
    pub jump_keys: Vec<JumpKey>,
    /// Volume fraction `|V| / h^2` of each dof.
    pub fractions: Vec<f64>,
    pub h: f64,
}

struct ColumnMaps {
    ghosts: BTreeMap<VolumeKey, usize>,
    jumps: BTreeMap<JumpKey, usize>,
}

impl LinearSystem {
    /// Builds the stencils on `mesh` and assembles them.
    pub fn assemble(mesh: &Mesh, coeffs: &Coefficients) -> Result<LinearSystem> {
        let stencils = build_stencils(mesh, coeffs)?;
        Self::from_stencils(mesh, &stencils)
    }

    /// Row of volume `vs`: the linear stencil minus the flux divergence
    /// `(sum of outward face fluxes + interface flux) / |V|`.
    pub fn row_stencil(
        mesh: &Mesh,
        vs: &VolumeStencils,
        merged: &BTreeMap<FaceKey, crate::stencil::MergedFace>,
    ) -> Stencil {
        let scale = 1.0 / (mesh.h * mesh.h * vs.fraction);
        let mut terms: Vec<(&Stencil, f64)> = vec![(&vs.linear, 1.0)];
        for face in Face::ALL {
            let Some(key) = FaceKey::of(mesh, vs.key.cell, face, vs.key.phase) else {
                continue;
            };
            if let Some(m) = merged.get(&key) {
                terms.push((&m.stencil, -face.divergence_sign() * scale));
            }
        }
        if let Some(eb) = &vs.eb {
            // The interface normal points out of the plus volume.
            let sign = match vs.key.phase {
                Phase::Plus => 1.0,
                Phase::Minus => -1.0,
            };
            terms.push((eb, -sign * scale));
        }
        Stencil::combine(terms)
    }

    pub fn from_stencils(mesh: &Mesh, stencils: &[VolumeStencils]) -> Result<LinearSystem> {
        let merged = merge_faces(mesh, stencils)?;
        let n = mesh.dof_count();
        let mut rows: Vec<Stencil> = vec![Stencil::default(); n];
        let mut fractions = vec![0.0; n];
        for vs in stencils {
            let dof = mesh
                .dof(vs.key)
                .ok_or_else(|| Error::InvalidConfig(format!("{:?} has no dof", vs.key)))?;
            rows[dof] = Self::row_stencil(mesh, vs, &merged);
            fractions[dof] = vs.fraction;
        }

        let mut maps = ColumnMaps {
            ghosts: BTreeMap::new(),
            jumps: BTreeMap::new(),
        };
        for row in &rows {
            for &(k, _) in &row.volumes {
                if mesh.dof(k).is_none() {
                    maps.ghosts.entry(k).or_insert(0);
                }
            }
            for &(k, _) in &row.jumps {
                maps.jumps.entry(k).or_insert(0);
            }
        }
        for (idx, v) in maps.ghosts.values_mut().enumerate() {
            *v = idx;
        }
        for (idx, v) in maps.jumps.values_mut().enumerate() {
            *v = idx;
        }

        let mut l_rows = Vec::with_capacity(n);
        let mut g_rows = Vec::with_capacity(n);
        let mut j_rows = Vec::with_capacity(n);
        for row in rows {
            let (mut lr, mut gr) = (Vec::new(), Vec::new());
            for (k, w) in row.volumes {
                match mesh.dof(k) {
                    Some(d) => lr.push((d, w)),
                    None => gr.push((maps.ghosts[&k], w)),
                }
            }
            l_rows.push(lr);
            g_rows.push(gr);
            j_rows.push(
                row.jumps
                    .into_iter()
                    .map(|(k, w)| (maps.jumps[&k], w))
                    .collect(),
            );
        }
        Ok(LinearSystem {
            l: CsrMatrix::from_rows(n, l_rows),
            ghost: CsrMatrix::from_rows(maps.ghosts.len(), g_rows),
            ghost_keys: maps.ghosts.into_keys().collect(),
            jump: CsrMatrix::from_rows(maps.jumps.len(), j_rows),
            jump_keys: maps.jumps.into_keys().collect(),
            fractions,
            h: mesh.h,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.l.nrows()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.l.mul_vec(u)
    }

    /// `r = -(ghost * g + jump * d)` for ghost cell averages `g` (ordered as
    /// `ghost_keys`) and jump data `d`.
    pub fn rhs_shift(&self, ghost_values: &[f64], jumps: &JumpData) -> Vec<f64> {
        assert_eq!(ghost_values.len(), self.ghost_keys.len());
        let d: Vec<f64> = self.jump_keys.iter().map(|&k| jumps.get(k)).collect();
        let a = self.ghost.mul_vec(ghost_values);
        let b = self.jump.mul_vec(&d);
        a.iter().zip(&b).map(|(x, y)| -(x + y)).collect()
    }

    /// Row-scaled copy of `L` (rows multiplied by the volume fractions).
    pub fn preconditioned(&self) -> CsrMatrix {
        let mut l = self.l.clone();
        l.scale_rows(&self.fractions);
        l
    }

    /// Solves `L u = b`.
    pub fn solve(&self, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.dof_count();
        assert_eq!(b.len(), n);
        let (mut a, mut rhs) = if opts.precondition {
            let rhs: Vec<f64> = b.iter().zip(&self.fractions).map(|(x, f)| x * f).collect();
            (self.preconditioned(), rhs)
        } else {
            (self.l.clone(), b.to_vec())
        };
        if opts.pin_mean {
            // The compatible right-hand side has zero volume-weighted sum.
            let total: f64 = b.iter().zip(&self.fractions).map(|(x, f)| x * f).sum();
            let scale: f64 = b
                .iter()
                .zip(&self.fractions)
                .map(|(x, f)| (x * f).abs())
                .sum();
            if total.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SingularSystem);
            }
            // Replace the first equation by u_0 = 0; the mean is fixed afterwards.
            let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|i| {
                    let (c, v) = a.row(i);
                    c.iter().copied().zip(v.iter().copied()).collect()
                })
                .collect();
            if n > 0 {
                rows[0] = vec![(0, 1.0)];
                rhs[0] = 0.0;
            }
            a = CsrMatrix::from_rows(n, rows);
        }
        let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
        let ilu = Ilu0::new(&a);
        let pre: &dyn Preconditioner = match &ilu {
            Some(m) => m,
            None => &IdentityPreconditioner,
        };
        let chain: &[SolverKind] = match opts.method {
            SolverKind::Bicgstab => &[SolverKind::Bicgstab, SolverKind::Gmres, SolverKind::Direct],
            SolverKind::Gmres => &[SolverKind::Gmres, SolverKind::Direct],
            SolverKind::Direct => &[SolverKind::Direct],
        };
        let mut best: Option<(KrylovOutcome, SolverKind)> = None;
        for (attempt, &kind) in chain.iter().enumerate() {
            let out = match kind {
                SolverKind::Bicgstab => bicgstab(&a, &rhs, opts.tol, max_iter, pre),
                SolverKind::Gmres => gmres(&a, &rhs, opts.tol, 50, max_iter, pre),
                SolverKind::Direct => match direct(&a, &rhs) {
                    Ok(o) => o,
                    Err(e) if best.is_none() => return Err(e),
                    Err(_) => break,
                },
            };
            // The direct solve is accepted at a looser bound: its residual is
            // limited by conditioning, not by iteration.
            let ok = match kind {
                SolverKind::Direct => {
                    out.residual.is_finite() && out.residual <= opts.tol.max(1e-9)
                }
                _ => out.converged,
            };
            if ok {
                let mut x = out.x.clone();
                if opts.pin_mean {
                    self.remove_mean(&mut x);
                }
                let residual = if opts.pin_mean {
                    out.residual
                } else {
                    relative_residual(&self.l, b, &x)
                };
                let report = SolveReport {
                    dofs: n,
                    nnz: self.l.nnz(),
                    method: kind,
                    iterations: out.iterations,
                    residual,
                    fallback: attempt > 0,
                };
                return Ok((x, report));
            }
            if best.as_ref().is_none_or(|(b, _)| out.residual < b.residual) {
                best = Some((out, kind));
            }
        }
        let achieved = best.map_or(f64::INFINITY, |(o, _)| o.residual);
        if opts.pin_mean || !achieved.is_finite() {
            return Err(Error::SingularSystem);
        }
        Err(Error::SolverNoConvergence {
            tol: opts.tol,
            achieved,
        })
    }

    fn remove_mean(&self, x: &mut [f64]) {
        let vol: f64 = self.fractions.iter().sum();
        let mean = x
            .iter()
            .zip(&self.fractions)
            .map(|(u, f)| u * f)
            .sum::<f64>()
            / vol;
        for u in x.iter_mut() {
            *u -= mean;
        }
    }

    /// Writes `L` in coordinate text format.
    pub fn write_matrix<W: Write>(&self, out: W) -> Result<()> {
        self.l.write_coo(out)
    }
}

fn relative_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Bicgstab,
    Gmres,
    Direct,
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bicgstab" => Ok(Self::Bicgstab),
            "gmres" => Ok(Self::Gmres),
            "direct" => Ok(Self::Direct),
            other => Err(Error::InvalidConfig(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bicgstab => "bicgstab",
            Self::Gmres => "gmres",
            Self::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub method: SolverKind,
    /// Relative residual target.
    pub tol: f64,
    /// Defaults to `10 N`.
    pub max_iter: Option<usize>,
    /// Scale rows by the volume fractions before solving.
    pub precondition: bool,
    /// Fix the additive constant of a pure-divergence periodic problem.
    pub pin_mean: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolverKind::Bicgstab,
            tol: 1e-11,
            max_iter: None,
            precondition: true,
            pin_mean: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub dofs: usize,
    pub nnz: usize,
    pub method: SolverKind,
    pub iterations: usize,
    pub residual: f64,
    pub fallback: bool,
}

impl SolveReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.serialize(self)?;
        w.flush()?;
        Ok(())
    }
}
