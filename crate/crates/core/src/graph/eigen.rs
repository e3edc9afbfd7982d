//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! Every eigenvector is sign-fixed so that its largest-magnitude entry is
//! positive (ties go to the lowest index). Eigenvalues come back ascending;
//! within a cluster of numerically equal eigenvalues the sign-fixed vectors
//! are ordered lexicographically, descending. Both rules make the output a
//! pure function of the input matrix.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1};

use crate::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    /// Stop when the off-diagonal Frobenius norm falls below `tol * ||M||_F`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_dim: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 100,
            max_dim: 512,
        }
    }
}

/// Eigenpairs of a symmetric matrix; `eigenvectors` holds one vector per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl SymmetricEigen {
    /// `||M - V diag(λ) Vᵀ||_F / ||M||_F` (absolute error when `M` is zero).
    pub fn reconstruction_error(&self, m: &Array2<f64>) -> f64 {
        let v = &self.eigenvectors;
        let scaled = v * &self.eigenvalues;
        let recon = scaled.dot(&v.t());
        let diff = frobenius(&(m - &recon));
        let norm = frobenius(m);
        if norm > 0.0 {
            diff / norm
        } else {
            diff
        }
    }
}

pub(crate) fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[[i, j]] * a[[i, j]];
            }
        }
    }
    acc.sqrt()
}

/// Checks `M = Mᵀ` to `1e-12` relative to the largest entry.
pub fn check_symmetric(m: &Array2<f64>) -> Result<()> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::Shape(format!("matrix is {r}x{c}, expected square")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("symmetric matrix".into()));
    }
    let scale = m.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    for i in 0..r {
        for j in (i + 1)..r {
            if (m[[i, j]] - m[[j, i]]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m[[i, j]],
                    m[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigendecomposition(
    m: &Array2<f64>,
    opts: JacobiOptions,
) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n > opts.max_dim {
        return Err(Error::InvalidInput(format!(
            "matrix dimension {n} exceeds solver limit {}",
            opts.max_dim
        )));
    }
    // Work on the exactly symmetrized matrix.
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]]));
    let mut v = Array2::<f64>::eye(n);
    let threshold = opts.tol * frobenius(&a);

    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        if off_diagonal_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        let residual = off_diagonal_norm(&a);
        if residual > threshold {
            return Err(Error::NoConvergence {
                sweeps: opts.max_sweeps,
                residual,
            });
        }
    }

    let mut pairs: Vec<(f64, Array1<f64>)> = (0..n)
        .map(|k| {
            let mut col = v.column(k).to_owned();
            fix_sign(&mut col);
            (a[[k, k]], col)
        })
        .collect();
    sort_eigenpairs(&mut pairs);

    let eigenvalues = Array1::from_iter(pairs.iter().map(|(l, _)| *l));
    let mut eigenvectors = Array2::zeros((n, n));
    for (k, (_, col)) in pairs.iter().enumerate() {
        eigenvectors.column_mut(k).assign(col);
    }
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let apq = a[[p, q]];
    if apq == 0.0 {
        return;
    }
    let n = a.nrows();
    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        a[[k, p]] = c * akp - s * akq;
        a[[k, q]] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[[p, k]];
        let aqk = a[[q, k]];
        a[[p, k]] = c * apk - s * aqk;
        a[[q, k]] = s * apk + c * aqk;
    }
    a[[p, q]] = 0.0;
    a[[q, p]] = 0.0;
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

/// Flips `v` so its largest-magnitude entry is positive; near-ties go to the
/// lowest index.
pub fn fix_sign(v: &mut Array1<f64>) {
    let max = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let tie = 1e-10 * max;
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max - tie)
        .expect("max is attained");
    if v[pivot] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

fn lexicographic(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn sort_eigenpairs(pairs: &mut [(f64, Array1<f64>)]) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = pairs.iter().fold(1.0_f64, |acc, (l, _)| acc.max(l.abs()));
    let tie = 1e-10 * scale;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(b.1.view(), a.1.view()));
        }
        start = end;
    }
}
