//! Single-head additive graph attention.
//!
//! For node `i` with closed neighborhood `N(i) ∪ {i}`:
//!
//! ```text
//! m_j   = W x_j
//! e_ij  = LeakyReLU(a_src·m_i + a_dst·m_j) + ln w_ij     (w_ii = 1)
//! α_ij  = softmax_j(e_ij)
//! h'_i  = ELU(Σ_j α_ij m_j)
//! ```

use ndarray::{Array1, Array2, Axis};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayerParams {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub att_src: Array1<f64>,
    pub att_dst: Array1<f64>,
    pub leaky_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatGradients {
    pub weight: Array2<f64>,
    pub att_src: Array1<f64>,
    pub att_dst: Array1<f64>,
}

impl GatLayerParams {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub(crate) fn zero_gradients(&self) -> GatGradients {
        GatGradients {
            weight: Array2::zeros(self.weight.raw_dim()),
            att_src: Array1::zeros(self.att_src.len()),
            att_dst: Array1::zeros(self.att_dst.len()),
        }
    }

    fn check(&self) -> Result<()> {
        let out = self.out_dim();
        if self.att_src.len() != out || self.att_dst.len() != out {
            return Err(Error::Shape(format!(
                "attention vectors have lengths {} and {}, layer width is {out}",
                self.att_src.len(),
                self.att_dst.len()
            )));
        }
        Ok(())
    }
}

/// Closed neighborhoods with log edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub member: Array2<bool>,
    pub log_weight: Array2<f64>,
}

impl Neighborhood {
    pub fn from_adjacency(a: &Array2<f64>) -> Self {
        let n = a.nrows();
        let mut member = Array2::from_elem((n, n), false);
        let mut log_weight = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    member[[i, j]] = true;
                } else if a[[i, j]] > 0.0 {
                    member[[i, j]] = true;
                    log_weight[[i, j]] = a[[i, j]].ln();
                }
            }
        }
        Self { member, log_weight }
    }

    pub fn len(&self) -> usize {
        self.member.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GatCache {
    input: Array2<f64>,
    projected: Array2<f64>,
    /// Pre-LeakyReLU scores `a_src·m_i + a_dst·m_j`.
    raw_scores: Array2<f64>,
    pub(crate) attention: Array2<f64>,
    aggregated: Array2<f64>,
}

pub(crate) fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub(crate) fn forward(
    params: &GatLayerParams,
    x: &Array2<f64>,
    nbr: &Neighborhood,
) -> Result<(Array2<f64>, GatCache)> {
    params.check()?;
    let n = x.nrows();
    if x.ncols() != params.in_dim() {
        return Err(Error::Shape(format!(
            "layer expects {} input features, got {}",
            params.in_dim(),
            x.ncols()
        )));
    }
    if nbr.len() != n {
        return Err(Error::Shape(format!(
            "{n} nodes but adjacency is {}x{}",
            nbr.len(),
            nbr.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("layer input".into()));
    }
    let projected = x.dot(&params.weight.t());
    let src = projected.dot(&params.att_src);
    let dst = projected.dot(&params.att_dst);

    let mut raw_scores = Array2::zeros((n, n));
    let mut attention = Array2::zeros((n, n));
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            if nbr.member[[i, j]] {
                let u = src[i] + dst[j];
                raw_scores[[i, j]] = u;
                let e = leaky_relu(u, params.leaky_slope) + nbr.log_weight[[i, j]];
                attention[[i, j]] = e;
                max = max.max(e);
            }
        }
        let mut total = 0.0;
        for j in 0..n {
            if nbr.member[[i, j]] {
                let w = (attention[[i, j]] - max).exp();
                attention[[i, j]] = w;
                total += w;
            }
        }
        for j in 0..n {
            if nbr.member[[i, j]] {
                attention[[i, j]] /= total;
            }
        }
    }
    let aggregated = attention.dot(&projected);
    let out = aggregated.mapv(elu);
    Ok((
        out,
        GatCache {
            input: x.clone(),
            projected,
            raw_scores,
            attention,
            aggregated,
        },
    ))
}

/// Returns the gradient with respect to the layer input and accumulates
/// parameter gradients into `grads`.
pub(crate) fn backward(
    params: &GatLayerParams,
    cache: &GatCache,
    nbr: &Neighborhood,
    d_out: &Array2<f64>,
    grads: &mut GatGradients,
) -> Array2<f64> {
    let n = d_out.nrows();
    let d_agg = d_out * &cache.aggregated.mapv(elu_grad);
    let d_alpha = d_agg.dot(&cache.projected.t());
    let mut d_proj = cache.attention.t().dot(&d_agg);

    let mut d_src = Array1::<f64>::zeros(n);
    let mut d_dst = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut weighted = 0.0;
        for j in 0..n {
            if nbr.member[[i, j]] {
                weighted += cache.attention[[i, j]] * d_alpha[[i, j]];
            }
        }
        for j in 0..n {
            if nbr.member[[i, j]] {
                let d_e = cache.attention[[i, j]] * (d_alpha[[i, j]] - weighted);
                let slope = if cache.raw_scores[[i, j]] > 0.0 {
                    1.0
                } else {
                    params.leaky_slope
                };
                let d_u = d_e * slope;
                d_src[i] += d_u;
                d_dst[j] += d_u;
            }
        }
    }

    let d_src_col = d_src.view().insert_axis(Axis(1));
    let d_dst_col = d_dst.view().insert_axis(Axis(1));
    let a_src_row = params.att_src.view().insert_axis(Axis(0));
    let a_dst_row = params.att_dst.view().insert_axis(Axis(0));
    d_proj = d_proj + d_src_col.dot(&a_src_row) + d_dst_col.dot(&a_dst_row);

    grads.att_src += &cache.projected.t().dot(&d_src);
    grads.att_dst += &cache.projected.t().dot(&d_dst);
    grads.weight += &d_proj.t().dot(&cache.input);
    d_proj.dot(&params.weight)
}

/// One attention layer applied to node features `x` over adjacency `a`.
pub fn gat_layer_forward(
    x: &Array2<f64>,
    a: &Array2<f64>,
    params: &GatLayerParams,
) -> Result<Array2<f64>> {
    crate::graph::validate_adjacency(a)?;
    let nbr = Neighborhood::from_adjacency(a);
    forward(params, x, &nbr).map(|(out, _)| out)
}

/// The attention matrix `α` (rows sum to 1 over closed neighborhoods, zero
/// elsewhere).
pub fn attention_coefficients(
    x: &Array2<f64>,
    a: &Array2<f64>,
    params: &GatLayerParams,
) -> Result<Array2<f64>> {
    crate::graph::validate_adjacency(a)?;
    let nbr = Neighborhood::from_adjacency(a);
    forward(params, x, &nbr).map(|(_, cache)| cache.attention)
}
