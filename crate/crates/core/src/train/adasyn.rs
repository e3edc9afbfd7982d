//! ADASYN oversampling and its lift from pooled vectors to graphs.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::SurgicalGraph;
use crate::{Error, Result};

/// How one synthetic sample was generated: `source + lambda · (partner − source)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub class: usize,
    pub source: usize,
    pub partner: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdasynOutput {
    /// Originals first (verbatim), then synthetics.
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// One entry per synthetic, aligned with the tail of `vectors`.
    pub synthetic: Vec<SyntheticSample>,
    pub warnings: Vec<String>,
}

/// Population mean and standard deviation per column; constant columns get a
/// unit scale so they drop out of the metric.
fn standardize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len() as f64;
    let d = vectors[0].len();
    let mut out = vectors.to_vec();
    for c in 0..d {
        let mean = vectors.iter().map(|v| v[c]).sum::<f64>() / n;
        let var = vectors.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        for row in out.iter_mut() {
            row[c] = (row[c] - mean) / sd;
        }
    }
    out
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest candidates to `i` (excluding `i`), ties by index.
fn nearest(points: &[Vec<f64>], i: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut c: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (dist2(&points[i], &points[j]), j))
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    c.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Oversamples every non-majority class up to the majority count.
///
/// Classes are processed in ascending size (ties by label). For class `c`
/// with `m_c` members, `G = m_majority − m_c` synthetics are distributed by
/// neighbor impurity `r_i`; rounding shortfalls are topped up in descending
/// `r̂_i` order (index ascending) and surpluses trimmed in ascending `r̂_i`
/// order (index descending). When a class has fewer than `k + 1` members,
/// `k = m_c − 1` is used for that class; a class of one is skipped.
pub fn adasyn_balance(
    vectors: &[Vec<f64>],
    labels: &[usize],
    k: usize,
    rng: &mut impl Rng,
) -> Result<AdasynOutput> {
    if vectors.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    if k < 1 {
        return Err(Error::InvalidInput("ADASYN needs k >= 1".into()));
    }
    let mut out = AdasynOutput {
        vectors: vectors.to_vec(),
        labels: labels.to_vec(),
        synthetic: Vec::new(),
        warnings: Vec::new(),
    };
    let Some(first) = vectors.first() else {
        return Ok(out);
    };
    if vectors.iter().any(|v| v.len() != first.len()) {
        return Err(Error::Shape("vectors have differing lengths".into()));
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("ADASYN input".into()));
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let majority = members.values().map(Vec::len).max().unwrap_or(0);
    let mut order: Vec<(usize, usize)> = members.iter().map(|(&c, m)| (m.len(), c)).collect();
    order.sort_unstable();

    let z = standardize(vectors);
    let all: Vec<usize> = (0..vectors.len()).collect();

    for (m_c, class) in order {
        let g_total = majority - m_c;
        if g_total == 0 {
            continue;
        }
        let idx = &members[&class];
        let k_eff = k.min(m_c - 1);
        if k_eff < 1 {
            out.warnings.push(format!(
                "class {class} has a single sample; not oversampled"
            ));
            continue;
        }
        if k_eff < k {
            out.warnings.push(format!(
                "class {class} has {m_c} samples; using {k_eff} neighbours instead of {k}"
            ));
        }

        let r: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let nn = nearest(&z, i, &all, k_eff);
                nn.iter().filter(|&&j| labels[j] != class).count() as f64 / k_eff as f64
            })
            .collect();
        let total: f64 = r.iter().sum();
        let r_hat: Vec<f64> = if total > 0.0 {
            r.iter().map(|x| x / total).collect()
        } else {
            vec![1.0 / m_c as f64; m_c]
        };
        let mut g: Vec<usize> = r_hat
            .iter()
            .map(|x| (x * g_total as f64).round() as usize)
            .collect();

        let mut by_desc: Vec<usize> = (0..m_c).collect();
        by_desc.sort_by(|&a, &b| r_hat[b].total_cmp(&r_hat[a]).then(a.cmp(&b)));
        let mut assigned: usize = g.iter().sum();
        let mut cursor = 0;
        while assigned < g_total {
            g[by_desc[cursor % m_c]] += 1;
            assigned += 1;
            cursor += 1;
        }
        let by_asc: Vec<usize> = by_desc.iter().rev().copied().collect();
        let mut cursor = 0;
        while assigned > g_total {
            let i = by_asc[cursor % m_c];
            if g[i] > 0 {
                g[i] -= 1;
                assigned -= 1;
            }
            cursor += 1;
        }

        for (local, &i) in idx.iter().enumerate() {
            if g[local] == 0 {
                continue;
            }
            let nn = nearest(&z, i, idx, k_eff);
            for _ in 0..g[local] {
                let partner = nn[rng.random_range(0..nn.len())];
                let lambda: f64 = rng.random();
                let s = vectors[i]
                    .iter()
                    .zip(&vectors[partner])
                    .map(|(a, b)| a + lambda * (b - a))
                    .collect();
                out.vectors.push(s);
                out.labels.push(class);
                out.synthetic.push(SyntheticSample {
                    class,
                    source: i,
                    partner,
                    lambda,
                });
            }
        }
    }
    Ok(out)
}

/// Builds the graph for one synthetic sample: the source graph's topology,
/// with features of nodes present in both graphs (matched by node id)
/// interpolated by `lambda` and all other nodes copied from the source.
pub fn lift_synthetic_graph(
    source: &SurgicalGraph,
    partner: &SurgicalGraph,
    lambda: f64,
    clip_id: String,
) -> SurgicalGraph {
    let partner_rows: HashMap<_, _> = partner
        .node_ids
        .iter()
        .enumerate()
        .map(|(r, id)| (id, r))
        .collect();
    let mut g = source.clone();
    g.clip_id = clip_id;
    for (row, id) in source.node_ids.iter().enumerate() {
        if let Some(&pr) = partner_rows.get(id) {
            for c in 0..g.features.ncols() {
                let a = source.features[[row, c]];
                g.features[[row, c]] = a + lambda * (partner.features[[pr, c]] - a);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn counts(labels: &[usize]) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for &l in labels {
            *m.entry(l).or_default() += 1;
        }
        m
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let v = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let l = vec![0, 1, 0, 1];
        let out = adasyn_balance(&v, &l, 7, &mut seeded_rng(0)).unwrap();
        assert_eq!(out.vectors, v);
        assert_eq!(out.labels, l);
        assert!(out.synthetic.is_empty());
    }

    #[test]
    fn six_versus_three() {
        // Majority 0 on a line, minority 1 interleaved near its right end.
        let v: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.5, 5.5, 6.0]
            .iter()
            .map(|&x| vec![x, 0.5 * x])
            .collect();
        let l = vec![0, 0, 0, 0, 0, 0, 1, 1, 1];
        let out = adasyn_balance(&v, &l, 7, &mut seeded_rng(4)).unwrap();
        assert_eq!(out.synthetic.len(), 3);
        assert_eq!(counts(&out.labels)[&1], 6);
        assert_eq!(&out.vectors[..9], &v[..]);
        // k falls back to 2 for the 3-member class.
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn synthetics_are_convex_combinations() {
        let mut rng = seeded_rng(2);
        let mut v = Vec::new();
        let mut l = Vec::new();
        for (class, size) in [(0usize, 20usize), (1, 9), (2, 12)] {
            for _ in 0..size {
                v.push(
                    (0..4)
                        .map(|_| rng.random_range(-1.0..1.0) + class as f64)
                        .collect(),
                );
                l.push(class);
            }
        }
        let out = adasyn_balance(&v, &l, 7, &mut rng).unwrap();
        assert!(counts(&out.labels).values().all(|&c| c == 20));
        assert!(out.warnings.is_empty());
        for (s, syn) in out.vectors[v.len()..].iter().zip(&out.synthetic) {
            assert_eq!(l[syn.source], syn.class);
            assert_eq!(l[syn.partner], syn.class);
            assert!((0.0..1.0).contains(&syn.lambda));
            for c in 0..4 {
                let want = (1.0 - syn.lambda) * v[syn.source][c] + syn.lambda * v[syn.partner][c];
                assert!((s[c] - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn singleton_class_is_skipped() {
        let v = vec![vec![0.0], vec![1.0], vec![2.0]];
        let l = vec![0, 0, 1];
        let out = adasyn_balance(&v, &l, 7, &mut seeded_rng(0)).unwrap();
        assert!(out.synthetic.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }
}
