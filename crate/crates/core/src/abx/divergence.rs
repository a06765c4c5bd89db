use serde::{Deserialize, Serialize};

use crate::dpgmm::ClusterPosterior;
use crate::error::{Error, Result};

/// Probabilities are floored at this value and renormalized before the
/// divergence is taken, which keeps it finite on disjoint supports.
pub const PROB_FLOOR: f64 = 1e-10;

fn floored(p: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = p.iter().map(|x| x.max(PROB_FLOOR)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// `0.5 KL(P||Q) + 0.5 KL(Q||P) = 0.5 sum (p - q)(ln p - ln q)`. Written in
/// the product form so that swapping P and Q negates both factors and the
/// result is bit-for-bit symmetric.
fn sym_kl(p: &[f64], lp: &[f64], q: &[f64], lq: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - q[i]) * (lp[i] - lq[i]);
    }
    0.5 * s
}

/// Symmetrized KL divergence between two cluster posteriors.
pub fn js_divergence(p: &ClusterPosterior, q: &ClusterPosterior) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::DimensionMismatch {
            expected: p.probs.len(),
            found: q.probs.len(),
        });
    }
    let (p, q) = (floored(&p.probs), floored(&q.probs));
    let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let lq: Vec<f64> = q.iter().map(|x| x.ln()).collect();
    Ok(sym_kl(&p, &lp, &q, &lq))
}

/// The per-window cluster posteriors of one phone token, stored floored
/// and with logs precomputed for repeated DTW use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorToken {
    k: usize,
    probs: Vec<f64>,
    logs: Vec<f64>,
}

impl PosteriorToken {
    pub fn new(frames: &[ClusterPosterior]) -> Result<Self> {
        let first = frames.first().ok_or(Error::Empty("posterior token"))?;
        let k = first.probs.len();
        if k == 0 {
            return Err(Error::Empty("cluster posterior"));
        }
        let mut probs = Vec::with_capacity(k * frames.len());
        for f in frames {
            if f.probs.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: f.probs.len(),
                });
            }
            probs.extend(floored(&f.probs));
        }
        let logs = probs.iter().map(|x| x.ln()).collect();
        Ok(Self { k, probs, logs })
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.k
    }

    fn cost(&self, i: usize, other: &Self, j: usize) -> f64 {
        let k = self.k;
        sym_kl(
            &self.probs[i * k..(i + 1) * k],
            &self.logs[i * k..(i + 1) * k],
            &other.probs[j * k..(j + 1) * k],
            &other.logs[j * k..(j + 1) * k],
        )
    }

    /// Pairwise divergence matrix, row-major `self.len() x other.len()`.
    pub fn cost_matrix(&self, other: &Self) -> Vec<f64> {
        let (n, m) = (self.len(), other.len());
        let mut c = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                c.push(self.cost(i, other, j));
            }
        }
        c
    }
}

/// DTW dissimilarity: the boundary-anchored monotone path with minimum total
/// divergence (ties broken toward the longer path), divided by the number of
/// matched pairs on that path.
pub fn dtw_dissimilarity(s1: &PosteriorToken, s2: &PosteriorToken) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::Empty("posterior token"));
    }
    if s1.k != s2.k {
        return Err(Error::DimensionMismatch {
            expected: s1.k,
            found: s2.k,
        });
    }
    let (n, m) = (s1.len(), s2.len());
    let cost = s1.cost_matrix(s2);
    let mut total = vec![0.0; n * m];
    let mut steps = vec![0usize; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost[i * m + j];
            let best = [
                (i > 0 && j > 0).then(|| (i - 1) * m + j - 1),
                (i > 0).then(|| (i - 1) * m + j),
                (j > 0).then(|| i * m + j - 1),
            ]
            .into_iter()
            .flatten()
            .reduce(|p, q| {
                if total[q] < total[p] || (total[q] == total[p] && steps[q] > steps[p]) {
                    q
                } else {
                    p
                }
            });
            let idx = i * m + j;
            match best {
                Some(p) => {
                    total[idx] = total[p] + c;
                    steps[idx] = steps[p] + 1;
                }
                None => {
                    total[idx] = c;
                    steps[idx] = 1;
                }
            }
        }
    }
    Ok(total[n * m - 1] / steps[n * m - 1] as f64)
}
