//! Readout, decoder and losses.

use ndarray::{Array1, Array2, Axis};

use crate::graph::normalized_laplacian_unchecked;
use crate::{Error, Result};

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn global_mean_pool(h: &Array2<f64>) -> Result<Array1<f64>> {
    h.mean_axis(Axis(0))
        .ok_or_else(|| Error::InvalidInput("cannot pool an empty graph".into()))
}

/// Linear classification head producing logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// `classes x embed_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

pub fn classify(pooled: &Array1<f64>, head: &LinearHead) -> Result<Array1<f64>> {
    if head.weight.ncols() != pooled.len() || head.weight.nrows() != head.bias.len() {
        return Err(Error::Shape(format!(
            "head is {:?} with {} biases, pooled vector has {} entries",
            head.weight.dim(),
            head.bias.len(),
            pooled.len()
        )));
    }
    Ok(head.weight.dot(pooled) + &head.bias)
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.mapv(|l| (l - max).exp());
    let total = exp.sum();
    exp / total
}

/// `-ln softmax(logits)[label]`.
pub fn cross_entropy_loss(logits: &Array1<f64>, label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

/// Inner-product edge decoder: `Â_ij = σ(scale · z_i·z_j)` off the diagonal,
/// then the normalized Laplacian of `Â`.
pub fn decode_laplacian(z: &Array2<f64>, decoder_scale: f64) -> Result<Array2<f64>> {
    Ok(decode(z, decoder_scale)?.laplacian)
}

pub(crate) struct Decoded {
    pub adjacency: Array2<f64>,
    pub laplacian: Array2<f64>,
}

pub(crate) fn decode(z: &Array2<f64>, decoder_scale: f64) -> Result<Decoded> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("node embeddings".into()));
    }
    let n = z.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("cannot decode an empty graph".into()));
    }
    let gram = z.dot(&z.t());
    let adjacency = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            logistic(decoder_scale * gram[[i, j]])
        }
    });
    let laplacian = normalized_laplacian_unchecked(&adjacency);
    Ok(Decoded {
        adjacency,
        laplacian,
    })
}

/// Backpropagates `d_lap = ∂loss/∂L̂` through the decoder to the embeddings.
pub(crate) fn decode_backward(
    z: &Array2<f64>,
    decoder_scale: f64,
    decoded: &Decoded,
    d_lap: &Array2<f64>,
) -> Array2<f64> {
    let n = z.nrows();
    let a = &decoded.adjacency;
    let l = &decoded.laplacian;
    let deg = a.sum_axis(Axis(1));
    let inv_sqrt = deg.mapv(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
    // ∂loss/∂d_i through every off-diagonal entry of row and column i.
    let d_deg = Array1::from_shape_fn(n, |i| {
        if deg[i] <= 0.0 {
            return 0.0;
        }
        let s: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| d_lap[[i, j]] * l[[i, j]])
            .sum();
        -s / deg[i]
    });
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d_a = -d_lap[[i, j]] * inv_sqrt[i] * inv_sqrt[j] + d_deg[i];
            let s = a[[i, j]];
            b[[i, j]] = d_a * s * (1.0 - s) * decoder_scale;
        }
    }
    (&b + &b.t()).dot(z)
}

/// `‖L_original − L_reconstructed‖_F² / n`.
pub fn spectral_loss(original: &Array2<f64>, reconstructed: &Array2<f64>) -> Result<f64> {
    if original.dim() != reconstructed.dim() || original.nrows() != original.ncols() {
        return Err(Error::Shape(format!(
            "Laplacians are {:?} and {:?}",
            original.dim(),
            reconstructed.dim()
        )));
    }
    let n = original.nrows().max(1) as f64;
    Ok(original
        .iter()
        .zip(reconstructed.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

pub(crate) fn spectral_loss_grad(
    original: &Array2<f64>,
    reconstructed: &Array2<f64>,
) -> Array2<f64> {
    let n = original.nrows().max(1) as f64;
    (reconstructed - original) * (2.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn pooling() {
        let z = array![[1.0, 2.0], [1.0, 2.0]];
        assert_eq!(global_mean_pool(&z).unwrap(), array![1.0, 2.0]);
        let z = array![[1.0, -2.0], [-1.0, 2.0]];
        assert_eq!(global_mean_pool(&z).unwrap(), array![0.0, 0.0]);
        let mut z = Array2::zeros((3, 32));
        for i in 0..3 {
            z[[i, i]] = 1.0;
        }
        let p = global_mean_pool(&z).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p[3], 0.0);
        assert!(global_mean_pool(&Array2::zeros((0, 32))).is_err());
    }

    #[test]
    fn classify_affine() {
        let head = LinearHead {
            weight: Array2::zeros((3, 2)),
            bias: array![0.5, -1.0, 2.0],
        };
        assert_eq!(classify(&array![3.0, 4.0], &head).unwrap(), head.bias);
        let head = LinearHead {
            weight: Array2::eye(2),
            bias: Array1::zeros(2),
        };
        assert_eq!(
            classify(&array![0.0, 1.0], &head).unwrap(),
            array![0.0, 1.0]
        );
        assert!(classify(&array![1.0], &head).is_err());
    }

    #[test]
    fn cross_entropy_values() {
        assert_abs_diff_eq!(
            cross_entropy_loss(&array![0.3, 0.3, 0.3], 1).unwrap(),
            3f64.ln(),
            epsilon = 1e-15
        );
        // -ln(e³ / (e + e² + e³))
        let e = std::f64::consts::E;
        let want = -(e.powi(3) / (e + e * e + e.powi(3))).ln();
        let got = cross_entropy_loss(&array![1.0, 2.0, 3.0], 2).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-14);
        assert_abs_diff_eq!(got, 0.4076, epsilon = 1e-4);
        let mut prev = f64::INFINITY;
        for gap in [0.0, 1.0, 5.0, 20.0, 100.0] {
            let l = cross_entropy_loss(&array![gap, 0.0], 0).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!(prev < 1e-40);
        assert!(cross_entropy_loss(&array![1.0], 1).is_err());
    }

    #[test]
    fn decoder_conventions() {
        assert_eq!(
            decode_laplacian(&array![[0.4, 0.1]], 2.0).unwrap(),
            array![[0.0]]
        );

        let z = array![[1.0, 0.0], [0.0, 3.0], [0.0, 0.0]];
        let d = decode(&z, 7.0).unwrap();
        assert_eq!(d.adjacency[[0, 1]], 0.5);

        // Two nodes: degree normalization cancels for any positive weight.
        let z = array![[0.3, -1.2], [2.0, 0.4]];
        let l = decode_laplacian(&z, 0.8).unwrap();
        for (got, want) in l.iter().zip([1.0, -1.0, -1.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert!(decode_laplacian(&array![[f64::NAN]], 1.0).is_err());
    }

    #[test]
    fn spectral_loss_values() {
        let l = array![[1.0, -1.0], [-1.0, 1.0]];
        assert_eq!(spectral_loss(&l, &l).unwrap(), 0.0);
        assert_eq!(spectral_loss(&l, &Array2::zeros((2, 2))).unwrap(), 2.0);
        let scaled = &l * 3.0;
        assert_abs_diff_eq!(
            spectral_loss(&Array2::zeros((2, 2)), &scaled).unwrap(),
            9.0 * spectral_loss(&Array2::zeros((2, 2)), &l).unwrap(),
            epsilon = 1e-12
        );
        assert!(spectral_loss(&l, &Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
        assert_eq!(logistic(800.0), 1.0);
    }
}
