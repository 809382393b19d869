//! Right-preconditioned BiCGStab and restarted GMRES, an ILU(0)
//! preconditioner, and a sparse LU direct solve.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

pub trait Preconditioner: Sync {
    /// `z = M^-1 r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
pub struct Ilu0 {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    /// Returns `None` when a diagonal entry is missing or a pivot vanishes.
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let (indptr, indices, values) = a.parts();
        let n = a.nrows();
        let mut lu = values.to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                if indices[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return None;
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let row = indptr[i]..indptr[i + 1];
            for k in row.clone() {
                pos[indices[k]] = k;
            }
            for k in row.clone() {
                let j = indices[k];
                if j >= i {
                    break;
                }
                let pivot = lu[diag[j]];
                if pivot == 0.0 || !pivot.is_finite() {
                    return None;
                }
                let factor = lu[k] / pivot;
                lu[k] = factor;
                for kk in diag[j] + 1..indptr[j + 1] {
                    let p = pos[indices[kk]];
                    if p != usize::MAX {
                        lu[p] -= factor * lu[kk];
                    }
                }
            }
            for k in row {
                pos[indices[k]] = usize::MAX;
            }
            let d = lu[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return None;
            }
        }
        Some(Self {
            indptr: indptr.to_vec(),
            indices: indices.to_vec(),
            values: lu,
            diag,
        })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for k in self.indptr[i]..self.diag[i] {
                s -= self.values[k] * z[self.indices[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..self.indptr[i + 1] {
                s -= self.values[k] * z[self.indices[k]];
            }
            z[i] = s / self.values[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `|b - A x| / |b|`.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// BiCGStab on `A M^-1 y = b`, `x = M^-1 y`.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    m: &dyn Preconditioner,
) -> KrylovOutcome {
    let n = b.len();
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return KrylovOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut p_hat);
        a.mul_vec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / nb <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            break;
        }
        m.apply(&s, &mut s_hat);
        a.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) / nb <= tol || omega == 0.0 {
            break;
        }
    }
    let residual = true_residual(a, b, &x);
    KrylovOutcome {
        x,
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// Restarted GMRES(`restart`) with right preconditioning.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
    m: &dyn Preconditioner,
) -> KrylovOutcome {
    let n = b.len();
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return KrylovOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut iterations = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while iterations < max_iter {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / nb <= tol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut k_done = 0;
        for k in 0..restart {
            if iterations >= max_iter {
                break;
            }
            iterations += 1;
            m.apply(&basis[k], &mut z);
            a.mul_vec_into(&z, &mut w);
            let mut h = vec![0.0; k + 2];
            for (j, vj) in basis.iter().enumerate() {
                h[j] = dot(&w, vj);
                for i in 0..n {
                    w[i] -= h[j] * vj[i];
                }
            }
            h[k + 1] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            let d = h[k].hypot(h[k + 1]);
            let (c, s) = if d == 0.0 {
                (1.0, 0.0)
            } else {
                (h[k] / d, h[k + 1] / d)
            };
            cs.push(c);
            sn.push(s);
            h[k] = d;
            let hk1 = h[k + 1];
            h[k + 1] = 0.0;
            g.push(-s * g[k]);
            g[k] *= c;
            hess.push(h);
            k_done = k + 1;
            if g[k + 1].abs() / nb <= tol || hk1 == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        // Back substitution for the Krylov coefficients.
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in i + 1..k_done {
                s -= hess[j][i] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                update[i] += yj * basis[j][i];
            }
        }
        m.apply(&update, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
        if k_done == 0 {
            break;
        }
    }
    let residual = true_residual(a, b, &x);
    KrylovOutcome {
        x,
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// Sparse LU solve.
pub fn direct(a: &CsrMatrix, b: &[f64]) -> Result<KrylovOutcome> {
    use faer::prelude::Solve;
    use faer::sparse::{SparseColMat, Triplet};
    let (indptr, indices, values) = a.parts();
    let mut triplets = Vec::with_capacity(values.len());
    for i in 0..a.nrows() {
        for k in indptr[i]..indptr[i + 1] {
            triplets.push(Triplet::new(i, indices[k], values[k]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
        .map_err(|_| Error::SingularSystem)?;
    let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    // The factorization panics on an exactly zero pivot instead of returning
    // an error.
    let sol = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        mat.sp_lu().map(|lu| lu.solve(&rhs))
    }))
    .map_err(|_| Error::SingularSystem)?
    .map_err(|_| Error::SingularSystem)?;
    let x: Vec<f64> = (0..b.len()).map(|i| sol[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let residual = true_residual(a, b, &x);
    Ok(KrylovOutcome {
        x,
        iterations: 1,
        residual,
        converged: true,
    })
}
