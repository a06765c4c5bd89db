//! Collapsed Gibbs sampler. Cluster parameters are integrated out; each
//! point is scored against every cluster's posterior-predictive Student-t
//! and against the prior predictive for a fresh cluster.
//!
//! Internally the data are shifted by the prior mean so that `mean0 = 0`,
//! which keeps the posterior scale update free of the `kappa0 m0 m0^T`
//! term and avoids cancellation on features with large offsets.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use super::linalg::{chol_log_det, cholesky_in_place, forward_solve_sq_norm, rank_one_update};
use super::model::{regularize_covariance, ClusterGaussian, GaussianMixture, TraceEntry};
use super::{DpgmmConfig, DpgmmModel, NiwPrior};
use crate::error::{Error, Result};
use crate::fusion::FeatureSequence;

const LN_PI: f64 = 1.144_729_885_849_400_2;

fn ln_mv_gamma(d: usize, a: f64) -> f64 {
    d as f64 * (d as f64 - 1.0) / 4.0 * LN_PI
        + (1..=d).map(|j| ln_gamma(a + (1.0 - j as f64) / 2.0)).sum::<f64>()
}

struct Shared<'a> {
    d: usize,
    kappa0: f64,
    nu0: f64,
    /// Cholesky factor of psi0, column-major.
    psi0_chol: Vec<f64>,
    psi0_log_det: f64,
    data: &'a [f64],
}

impl<'a> Shared<'a> {
    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

#[derive(Clone)]
struct Cluster {
    n: usize,
    sum: Vec<f64>,
    /// Cholesky factor of the posterior scale matrix.
    chol: Vec<f64>,
    // cached predictive terms
    log_const: f64,
    quad_scale: f64,
    exponent: f64,
    log_det: f64,
}

impl Cluster {
    fn empty(s: &Shared) -> Self {
        let mut c = Self {
            n: 0,
            sum: vec![0.0; s.d],
            chol: s.psi0_chol.clone(),
            log_const: 0.0,
            quad_scale: 0.0,
            exponent: 0.0,
            log_det: 0.0,
        };
        c.refresh_terms(s);
        c
    }

    fn kappa(&self, s: &Shared) -> f64 {
        s.kappa0 + self.n as f64
    }

    fn nu(&self, s: &Shared) -> f64 {
        s.nu0 + self.n as f64
    }

    fn mean_into(&self, s: &Shared, out: &mut [f64]) {
        let k = self.kappa(s);
        for (o, v) in out.iter_mut().zip(&self.sum) {
            *o = v / k;
        }
    }

    fn refresh_terms(&mut self, s: &Shared) {
        let d = s.d as f64;
        let kappa = self.kappa(s);
        let nu = self.nu(s);
        self.log_det = chol_log_det(&self.chol, s.d);
        self.log_const = ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma((nu - d + 1.0) / 2.0)
            - d / 2.0 * (std::f64::consts::PI * (kappa + 1.0) / kappa).ln()
            - 0.5 * self.log_det;
        self.quad_scale = kappa / (kappa + 1.0);
        self.exponent = (nu + 1.0) / 2.0;
    }

    /// Student-t posterior predictive log density of `y`.
    fn log_predictive(&self, s: &Shared, y: &[f64], scratch: &mut [f64]) -> f64 {
        let kappa = self.kappa(s);
        for ((o, v), yi) in scratch.iter_mut().zip(&self.sum).zip(y) {
            *o = yi - v / kappa;
        }
        let q = forward_solve_sq_norm(&self.chol, s.d, scratch);
        self.log_const - self.exponent * (self.quad_scale * q).ln_1p()
    }

    fn add(&mut self, s: &Shared, y: &[f64], scratch: &mut [f64]) {
        let kappa = self.kappa(s);
        self.mean_into(s, scratch);
        let c = (kappa / (kappa + 1.0)).sqrt();
        for (o, yi) in scratch.iter_mut().zip(y) {
            *o = c * (yi - *o);
        }
        let ok = rank_one_update(&mut self.chol, s.d, scratch, 1.0);
        debug_assert!(ok);
        self.n += 1;
        for (a, b) in self.sum.iter_mut().zip(y) {
            *a += b;
        }
        self.refresh_terms(s);
    }

    /// Removes `y`; returns `false` when the downdate broke down and the
    /// factor must be rebuilt from the remaining members.
    fn remove(&mut self, s: &Shared, y: &[f64], scratch: &mut [f64]) -> bool {
        self.n -= 1;
        for (a, b) in self.sum.iter_mut().zip(y) {
            *a -= b;
        }
        let kappa = self.kappa(s);
        self.mean_into(s, scratch);
        let c = (kappa / (kappa + 1.0)).sqrt();
        for (o, yi) in scratch.iter_mut().zip(y) {
            *o = c * (yi - *o);
        }
        let ok = rank_one_update(&mut self.chol, s.d, scratch, -1.0);
        if ok {
            self.refresh_terms(s);
        }
        ok
    }

    /// Recomputes sum and factor from scratch for the given members.
    fn rebuild(&mut self, s: &Shared, members: impl Iterator<Item = usize>) -> Result<()> {
        let d = s.d;
        let mut psi = DMatrix::from_column_slice(d, d, &s.psi0_chol).lower_triangle();
        psi = &psi * psi.transpose();
        let mut sum = vec![0.0; d];
        let mut n = 0;
        for i in members {
            let y = s.row(i);
            n += 1;
            for (a, b) in sum.iter_mut().zip(y) {
                *a += b;
            }
            for c in 0..d {
                for r in 0..d {
                    psi[(r, c)] += y[r] * y[c];
                }
            }
        }
        let kappa = s.kappa0 + n as f64;
        for c in 0..d {
            for r in 0..d {
                psi[(r, c)] -= sum[r] * sum[c] / kappa;
            }
        }
        let mut chol = psi.as_slice().to_vec();
        if !cholesky_in_place(&mut chol, d) {
            return Err(Error::Numerical("cluster scale matrix lost positive definiteness".into()));
        }
        self.n = n;
        self.sum = sum;
        self.chol = chol;
        self.refresh_terms(s);
        Ok(())
    }

    /// Log marginal likelihood of the cluster's members under the prior.
    fn log_marginal(&self, s: &Shared) -> f64 {
        let d = s.d as f64;
        let n = self.n as f64;
        let kappa = self.kappa(s);
        let nu = self.nu(s);
        -n * d / 2.0 * LN_PI + ln_mv_gamma(s.d, nu / 2.0) - ln_mv_gamma(s.d, s.nu0 / 2.0)
            + s.nu0 / 2.0 * s.psi0_log_det
            - nu / 2.0 * self.log_det
            + d / 2.0 * (s.kappa0 / kappa).ln()
    }
}

struct State<'a> {
    shared: Shared<'a>,
    clusters: Vec<Cluster>,
    assign: Vec<usize>,
    alpha: f64,
}

impl<'a> State<'a> {
    fn members(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == k)
            .map(|(i, _)| i)
    }

    fn rebuild(&mut self, k: usize) -> Result<()> {
        let members: Vec<usize> = self.members(k).collect();
        self.clusters[k].rebuild(&self.shared, members.into_iter())
    }

    fn drop_cluster(&mut self, k: usize) {
        let last = self.clusters.len() - 1;
        self.clusters.swap_remove(k);
        if k != last {
            for a in self.assign.iter_mut().filter(|a| **a == last) {
                *a = k;
            }
        }
    }

    fn joint_log_prob(&self) -> f64 {
        let n = self.assign.len() as f64;
        let k = self.clusters.len() as f64;
        let partition = k * self.alpha.ln()
            + self.clusters.iter().map(|c| ln_gamma(c.n as f64)).sum::<f64>()
            + ln_gamma(self.alpha)
            - ln_gamma(n + self.alpha);
        partition
            + self
                .clusters
                .iter()
                .map(|c| c.log_marginal(&self.shared))
                .sum::<f64>()
    }

    fn sweep(&mut self, order: &[usize], rng: &mut ChaCha8Rng, prior: &Cluster) -> Result<()> {
        let d = self.shared.d;
        let mut scratch = vec![0.0; d];
        let mut logw: Vec<f64> = Vec::new();
        let ln_alpha = self.alpha.ln();
        for &i in order {
            let k = self.assign[i];
            let y = self.shared.row(i);
            if self.clusters[k].n == 1 {
                self.drop_cluster(k);
            } else if !self.clusters[k].remove(&self.shared, y, &mut scratch) {
                // member i still carries label k; exclude it from the rebuild
                self.assign[i] = usize::MAX;
                self.rebuild(k)?;
            }
            logw.clear();
            for c in &self.clusters {
                logw.push((c.n as f64).ln() + c.log_predictive(&self.shared, y, &mut scratch));
            }
            logw.push(ln_alpha + prior.log_predictive(&self.shared, y, &mut scratch));
            let choice = sample_log_weights(&logw, rng)?;
            if choice == self.clusters.len() {
                self.clusters.push(prior.clone());
            }
            self.clusters[choice].add(&self.shared, y, &mut scratch);
            self.assign[i] = choice;
        }
        Ok(())
    }
}

fn sample_log_weights(logw: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("assignment weights are not finite".into()));
    }
    let total: f64 = logw.iter().map(|l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, l) in logw.iter().enumerate() {
        u -= (l - max).exp();
        if u < 0.0 {
            return Ok(k);
        }
    }
    Ok(logw.len() - 1)
}

const KMEANS_ROUNDS: usize = 30;
const KMEANS_RESTARTS: usize = 5;

/// Best of several k-means++ runs (lowest inertia); returns a label per point.
fn kmeans_init(flat: &[f64], scale: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let d = scale.len();
    let pts: Vec<f64> = flat
        .chunks_exact(d)
        .flat_map(|r| r.iter().zip(scale).map(|(x, s)| x * s))
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (inertia, assign) = kmeans(&pts, d, k, rng);
        if best.as_ref().is_none_or(|b| inertia < b.0) {
            best = Some((inertia, assign));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

fn kmeans(pts: &[f64], d: usize, k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = pts.len() / d;
    let row = |i: usize| &pts[i * d..(i + 1) * d];
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut centers: Vec<f64> = row(rng.random_range(0..n)).to_vec();
    let mut nearest: Vec<f64> = (0..n).map(|i| dist(row(i), &centers[..d])).collect();
    while centers.len() / d < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            nearest
                .iter()
                .position(|&w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, m) in nearest.iter_mut().enumerate() {
            *m = m.min(dist(row(i), &c));
        }
        centers.extend(c);
    }

    let mut assign = vec![usize::MAX; n];
    let mut inertia = 0.0;
    for _ in 0..KMEANS_ROUNDS {
        let mut changed = false;
        inertia = 0.0;
        for (i, a) in assign.iter_mut().enumerate() {
            let (c, dc) = (0..k)
                .map(|c| dist(row(i), &centers[c * d..(c + 1) * d]))
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap_or((0, 0.0));
            inertia += dc;
            changed |= c != *a;
            *a = c;
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a * d..(a + 1) * d].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (m, s) in centers[c * d..(c + 1) * d].iter_mut().zip(&sums[c * d..(c + 1) * d]) {
                    *m = s / counts[c] as f64;
                }
            }
        }
    }
    (inertia, assign)
}

/// Fits a DPGMM to every window of `data` by collapsed Gibbs sampling.
///
/// Points are visited in one seeded random order (fixed for the whole run);
/// the `init_clusters` starting clusters come from seeded k-means++ on data
/// scaled by the prior's per-dimension spread.
/// The returned model holds the last sweep's clusters with posterior-mean
/// parameters and weights `n_k / (n + alpha)` renormalized over the
/// discovered clusters.
pub fn fit(data: &[FeatureSequence], prior: &NiwPrior, config: &DpgmmConfig) -> Result<DpgmmModel> {
    config.validate()?;
    let layout = data
        .first()
        .ok_or(Error::Empty("training sequences"))?
        .layout
        .clone();
    let d = layout.total_dims();
    if d == 0 {
        return Err(Error::Config("feature dimension is zero".into()));
    }
    if prior.dims() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: prior.dims(),
        });
    }
    let mut flat = Vec::new();
    for seq in data {
        if seq.layout != layout {
            return Err(Error::Data(format!(
                "{}: layout differs from the first training sequence",
                seq.utterance
            )));
        }
        for v in &seq.vectors {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("training data"));
            }
            flat.extend(v.iter().zip(prior.mean0.iter()).map(|(x, m)| x - m));
        }
    }
    let n = flat.len() / d;
    if n < config.init_clusters {
        return Err(Error::Data(format!(
            "{n} training windows is fewer than {} initial clusters",
            config.init_clusters
        )));
    }

    let mut psi0_chol = prior.psi0.as_slice().to_vec();
    if !cholesky_in_place(&mut psi0_chol, d) {
        return Err(Error::Config("psi0 must be positive definite".into()));
    }
    let shared = Shared {
        d,
        kappa0: prior.kappa0,
        nu0: prior.nu0,
        psi0_log_det: chol_log_det(&psi0_chol, d),
        psi0_chol,
        data: &flat,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let scale: Vec<f64> = (0..d).map(|j| prior.psi0[(j, j)].sqrt().recip()).collect();
    let assign = kmeans_init(&flat, &scale, config.init_clusters, &mut rng);

    let prior_cluster = Cluster::empty(&shared);
    let mut state = State {
        clusters: vec![prior_cluster.clone(); config.init_clusters],
        shared,
        assign,
        alpha: config.alpha,
    };
    for k in (0..config.init_clusters).rev() {
        if state.members(k).next().is_none() {
            state.drop_cluster(k);
        }
    }

    let mut trace = Vec::with_capacity(config.iterations);
    for sweep in 1..=config.iterations {
        for k in 0..state.clusters.len() {
            state.rebuild(k)?;
        }
        state.sweep(&order, &mut rng, &prior_cluster)?;
        let joint_log_prob = state.joint_log_prob();
        if !joint_log_prob.is_finite() {
            return Err(Error::Numerical(format!(
                "joint log probability is not finite at sweep {sweep}"
            )));
        }
        log::debug!("sweep {sweep}: K={} logp={joint_log_prob:.3}", state.clusters.len());
        trace.push(TraceEntry {
            sweep,
            clusters: state.clusters.len(),
            joint_log_prob,
        });
    }
    for k in 0..state.clusters.len() {
        state.rebuild(k)?;
    }

    // canonical order: larger clusters first, then by first member
    let mut firsts = vec![usize::MAX; state.clusters.len()];
    for (i, &a) in state.assign.iter().enumerate() {
        firsts[a] = firsts[a].min(i);
    }
    let mut idx: Vec<usize> = (0..state.clusters.len()).collect();
    idx.sort_by_key(|&k| (std::cmp::Reverse(state.clusters[k].n), firsts[k]));

    let total = n as f64 + config.alpha;
    let raw: Vec<f64> = idx.iter().map(|&k| state.clusters[k].n as f64 / total).collect();
    let mass: f64 = raw.iter().sum();
    let s = &state.shared;
    let clusters = idx
        .iter()
        .zip(&raw)
        .map(|(&k, w)| {
            let c = &state.clusters[k];
            let mut mean = vec![0.0; d];
            c.mean_into(s, &mut mean);
            let mean = DVector::from_vec(mean) + &prior.mean0;
            let l = DMatrix::from_column_slice(d, d, &c.chol).lower_triangle();
            let cov = (&l * l.transpose()) / (c.nu(s) - d as f64 - 1.0);
            ClusterGaussian::new(w / mass, mean, regularize_covariance(cov))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DpgmmModel {
        mixture: GaussianMixture { clusters },
        layout,
        config: *config,
        trace,
    })
}
