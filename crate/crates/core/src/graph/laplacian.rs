//! Graph Laplacians and spectral embeddings.

use ndarray::{Array1, Array2};

use super::eigen::{symmetric_eigendecomposition, JacobiOptions};
use crate::{Error, Result};

/// Which Laplacian to build. The normalized form is canonical; the
/// unnormalized `D - A` is kept for reproduction experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianKind {
    #[default]
    Normalized,
    Unnormalized,
}

/// Checks that `a` is a legal weighted adjacency: square, finite,
/// non-negative, symmetric, zero diagonal.
pub fn validate_adjacency(a: &Array2<f64>) -> Result<()> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Shape(format!(
            "adjacency is {r}x{c}, expected square"
        )));
    }
    for i in 0..r {
        if a[[i, i]] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "adjacency diagonal entry ({i}, {i}) is {}, expected 0",
                a[[i, i]]
            )));
        }
        for j in 0..r {
            let w = a[[i, j]];
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("adjacency entry ({i}, {j})")));
            }
            if w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "adjacency entry ({i}, {j}) is negative: {w}"
                )));
            }
            if w != a[[j, i]] {
                return Err(Error::InvalidInput(format!(
                    "adjacency is asymmetric at ({i}, {j}): {w} vs {}",
                    a[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Weighted degrees. Each row is summed in sorted order so that the result
/// does not depend on node ordering.
pub fn degrees(a: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(a.rows().into_iter().map(|row| {
        let mut vals = row.to_vec();
        vals.sort_by(f64::total_cmp);
        vals.iter().sum::<f64>()
    }))
}

/// `L = I - D^{-1/2} A D^{-1/2}` with `D^{-1/2}` set to zero for isolated
/// nodes, whose rows and columns (diagonal included) are left at zero.
pub fn normalized_laplacian(a: &Array2<f64>) -> Result<Array2<f64>> {
    validate_adjacency(a)?;
    Ok(normalized_laplacian_unchecked(a))
}

pub(crate) fn normalized_laplacian_unchecked(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let deg = degrees(a);
    let inv_sqrt = deg.mapv(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            if deg[i] > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            -(a[[i, j]] * (inv_sqrt[i] * inv_sqrt[j]))
        }
    })
}

/// `L = D - A`.
pub fn unnormalized_laplacian(a: &Array2<f64>) -> Result<Array2<f64>> {
    validate_adjacency(a)?;
    let deg = degrees(a);
    let mut l = -a.clone();
    for (i, d) in deg.iter().enumerate() {
        l[[i, i]] = *d;
    }
    Ok(l)
}

pub fn laplacian(a: &Array2<f64>, kind: LaplacianKind) -> Result<Array2<f64>> {
    match kind {
        LaplacianKind::Normalized => normalized_laplacian(a),
        LaplacianKind::Unnormalized => unnormalized_laplacian(a),
    }
}

/// A Laplacian together with its ascending eigenvalues and sign-fixed
/// orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianDecomposition {
    pub laplacian: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl LaplacianDecomposition {
    pub fn new(a: &Array2<f64>, kind: LaplacianKind) -> Result<Self> {
        let laplacian = laplacian(a, kind)?;
        let eig = symmetric_eigendecomposition(&laplacian, JacobiOptions::default())?;
        Ok(Self {
            laplacian,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Eigenvectors of the `k` smallest eigenvalues as an `n x k'` matrix, where
/// `k' = min(k, n)`.
pub fn spectral_embedding(decomp: &LaplacianDecomposition, k: usize) -> Result<Array2<f64>> {
    if k < 1 {
        return Err(Error::InvalidInput(
            "spectral embedding needs k >= 1".into(),
        ));
    }
    let k = k.min(decomp.len());
    Ok(decomp.eigenvectors.slice(ndarray::s![.., ..k]).to_owned())
}

/// Spectral embedding padded with zero columns up to exactly `k` columns, so
/// every graph yields the same positional width.
pub fn positional_features(a: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut out = Array2::zeros((n, k));
    if k == 0 || n == 0 {
        return Ok(out);
    }
    let decomp = LaplacianDecomposition::new(a, LaplacianKind::Normalized)?;
    let h = spectral_embedding(&decomp, k)?;
    out.slice_mut(ndarray::s![.., ..h.ncols()]).assign(&h);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn two_nodes_one_edge() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let l = normalized_laplacian(&a).unwrap();
        assert_eq!(l, array![[1.0, -1.0], [-1.0, 1.0]]);
        let d = LaplacianDecomposition::new(&a, LaplacianKind::Normalized).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvalues[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn three_node_path() {
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let l = normalized_laplacian(&a).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = array![[1.0, -h, 0.0], [-h, 1.0, -h], [0.0, -h, 1.0]];
        for (x, y) in l.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        // Characteristic polynomial (1-λ)((1-λ)² - 1) has roots 0, 1, 2.
        let d = LaplacianDecomposition::new(&a, LaplacianKind::Normalized).unwrap();
        for (got, want) in d.eigenvalues.iter().zip([0.0, 1.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn isolated_node_adds_zero_block() {
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let l = normalized_laplacian(&a).unwrap();
        assert!(l.row(2).iter().all(|x| *x == 0.0));
        assert!(l.column(2).iter().all(|x| *x == 0.0));
        let d = LaplacianDecomposition::new(&a, LaplacianKind::Normalized).unwrap();
        let vals = d.eigenvalues.to_vec();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[2], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn unnormalized_form() {
        let a = array![[0.0, 2.0], [2.0, 0.0]];
        assert_eq!(
            unnormalized_laplacian(&a).unwrap(),
            array![[2.0, -2.0], [-2.0, 2.0]]
        );
    }

    #[test]
    fn rejects_bad_adjacency() {
        assert!(normalized_laplacian(&array![[0.0, -1.0], [-1.0, 0.0]]).is_err());
        assert!(normalized_laplacian(&array![[0.0, 1.0], [0.5, 0.0]]).is_err());
        assert!(normalized_laplacian(&array![[1.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn embedding_of_two_node_graph() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let d = LaplacianDecomposition::new(&a, LaplacianKind::Normalized).unwrap();
        let h = spectral_embedding(&d, 1).unwrap();
        assert_eq!(h.dim(), (2, 1));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(h[[0, 0]], r, epsilon = 1e-14);
        assert_abs_diff_eq!(h[[1, 0]], r, epsilon = 1e-14);

        assert_eq!(spectral_embedding(&d, 2).unwrap(), d.eigenvectors);
        assert_eq!(spectral_embedding(&d, 5).unwrap().dim(), (2, 2));
        assert!(spectral_embedding(&d, 0).is_err());
    }

    #[test]
    fn positional_features_are_zero_padded() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let p = positional_features(&a, 4).unwrap();
        assert_eq!(p.dim(), (2, 4));
        assert!(p
            .column(2)
            .iter()
            .chain(p.column(3).iter())
            .all(|x| *x == 0.0));
    }
}
