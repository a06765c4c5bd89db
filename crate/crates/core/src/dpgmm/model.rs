use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::linalg::{chol_log_det, cholesky_in_place, forward_solve_sq_norm};
use super::DpgmmConfig;
use crate::container::{write_atomic, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::fusion::ModalityLayout;

const MODEL_MAGIC: &[u8; 4] = b"AVDP";
const MODEL_VERSION: u32 = 1;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Probability distribution over a model's clusters for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPosterior {
    pub probs: Vec<f64>,
}

impl ClusterPosterior {
    /// Normalizes log weights with log-sum-exp.
    pub fn from_log_weights(logw: &[f64]) -> Self {
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// One fitted Gaussian component with its Cholesky factor cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGaussian {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl ClusterGaussian {
    pub fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        let mut chol = cov.as_slice().to_vec();
        if !cholesky_in_place(&mut chol, d) {
            return Err(Error::Numerical("cluster covariance is not positive definite".into()));
        }
        let log_norm = -0.5 * (d as f64 * LN_2PI + chol_log_det(&chol, d));
        Ok(Self {
            weight,
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dims();
        let mut diff: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, m)| a - m).collect();
        self.log_norm - 0.5 * forward_solve_sq_norm(&self.chol, d, &mut diff)
    }

    fn restricted(&self, dims: &[usize]) -> Result<Self> {
        let mean = DVector::from_iterator(dims.len(), dims.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(dims.len(), dims.len(), |r, c| self.cov[(dims[r], dims[c])]);
        Self::new(self.weight, mean, cov)
    }
}

/// Weighted Gaussian components answering cluster-posterior queries.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub clusters: Vec<ClusterGaussian>,
}

impl GaussianMixture {
    pub fn dims(&self) -> usize {
        self.clusters.first().map_or(0, ClusterGaussian::dims)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// `p(k | x) ∝ w_k N(x; mu_k, Sigma_k)`, evaluated in log space.
    pub fn posterior(&self, x: &[f64]) -> Result<ClusterPosterior> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("posterior query"));
        }
        let logw: Vec<f64> = self
            .clusters
            .iter()
            .map(|c| c.weight.ln() + c.log_density(x))
            .collect();
        Ok(ClusterPosterior::from_log_weights(&logw))
    }

    /// Mixture of the marginal Gaussians over `observed` dimensions (in the
    /// given order), keeping the weights.
    pub fn marginal(&self, observed: &[usize]) -> Result<GaussianMixture> {
        if observed.is_empty() {
            return Err(Error::Empty("observed dimension set"));
        }
        let d = self.dims();
        if let Some(&bad) = observed.iter().find(|&&i| i >= d) {
            return Err(Error::Data(format!("observed dimension {bad} out of range 0..{d}")));
        }
        let mut seen = observed.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != observed.len() {
            return Err(Error::Data("observed dimensions must be distinct".into()));
        }
        Ok(GaussianMixture {
            clusters: self
                .clusters
                .iter()
                .map(|c| c.restricted(observed))
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sweep: usize,
    pub clusters: usize,
    pub joint_log_prob: f64,
}

/// A fitted mixture plus the layout, settings and sampler trace that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DpgmmModel {
    pub mixture: GaussianMixture,
    pub layout: ModalityLayout,
    pub config: DpgmmConfig,
    pub trace: Vec<TraceEntry>,
}

impl DpgmmModel {
    pub fn dims(&self) -> usize {
        self.mixture.dims()
    }

    pub fn n_clusters(&self) -> usize {
        self.mixture.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.mixture.clusters.iter().map(|c| c.weight).collect()
    }

    pub fn posterior(&self, x: &[f64]) -> Result<ClusterPosterior> {
        self.mixture.posterior(x)
    }

    /// Posterior from a partial observation, using each cluster's marginal
    /// over the observed dimensions.
    pub fn posterior_marginal(&self, x_obs: &[f64], observed: &[usize]) -> Result<ClusterPosterior> {
        if x_obs.len() != observed.len() {
            return Err(Error::DimensionMismatch {
                expected: observed.len(),
                found: x_obs.len(),
            });
        }
        self.mixture.marginal(observed)?.posterior(x_obs)
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("sweep,K,joint_log_prob\n");
        for t in &self.trace {
            out.push_str(&format!("{},{},{}\n", t.sweep, t.clusters, t.joint_log_prob));
        }
        out
    }

    /// Versioned little-endian container:
    /// header (magic, version, d, K, audio dims, visual dims, config),
    /// body (weights, means, covariances as f64; then the trace).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u32(self.dims() as u32);
        w.u32(self.n_clusters() as u32);
        w.u32(self.layout.audio_dims.len() as u32);
        w.u32(self.layout.visual_dims.len() as u32);
        w.f64(self.config.alpha);
        w.u64(self.config.iterations as u64);
        w.u64(self.config.init_clusters as u64);
        w.u64(self.config.seed);
        for c in &self.mixture.clusters {
            w.f64(c.weight);
        }
        for c in &self.mixture.clusters {
            c.mean.iter().for_each(|&x| w.f64(x));
        }
        for c in &self.mixture.clusters {
            c.cov.iter().for_each(|&x| w.f64(x));
        }
        w.u64(self.trace.len() as u64);
        for t in &self.trace {
            w.u64(t.sweep as u64);
            w.u64(t.clusters as u64);
            w.f64(t.joint_log_prob);
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        r.version(MODEL_VERSION)?;
        let d = r.u32()? as usize;
        let k = r.u32()? as usize;
        let layout = ModalityLayout::new(r.u32()? as usize, r.u32()? as usize);
        if layout.total_dims() != d {
            return Err(Error::Format(format!(
                "layout covers {} dims but model has {d}",
                layout.total_dims()
            )));
        }
        let config = DpgmmConfig {
            alpha: r.f64()?,
            iterations: r.u64()? as usize,
            init_clusters: r.u64()? as usize,
            seed: r.u64()?,
        };
        r.expect_remaining(k.saturating_mul(1 + d + d * d).saturating_mul(8))?;
        let weights = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let means = (0..k)
            .map(|_| (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let covs = (0..k)
            .map(|_| (0..d * d).map(|_| r.f64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let n_trace = r.u64()? as usize;
        r.expect_remaining(n_trace.saturating_mul(24))?;
        let trace = (0..n_trace)
            .map(|_| {
                Ok(TraceEntry {
                    sweep: r.u64()? as usize,
                    clusters: r.u64()? as usize,
                    joint_log_prob: r.f64()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let clusters = weights
            .into_iter()
            .zip(means)
            .zip(covs)
            .map(|((w, m), c)| {
                ClusterGaussian::new(w, DVector::from_vec(m), DMatrix::from_vec(d, d, c))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mixture: GaussianMixture { clusters },
            layout,
            config,
            trace,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Symmetrizes `cov` and lifts its eigenvalues to at least
/// `1e-8 * trace / d`.
pub(crate) fn regularize_covariance(cov: DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let sym = (&cov + cov.transpose()) * 0.5;
    let floor = 1e-8 * sym.trace() / d as f64;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.min() >= floor {
        return sym;
    }
    let lifted = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&lifted) * v.transpose();
    (&rebuilt + rebuilt.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(w: f64, mean: &[f64], diag: &[f64]) -> ClusterGaussian {
        ClusterGaussian::new(
            w,
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        )
        .unwrap()
    }

    fn model(clusters: Vec<ClusterGaussian>) -> DpgmmModel {
        let d = clusters[0].dims();
        DpgmmModel {
            mixture: GaussianMixture { clusters },
            layout: ModalityLayout::audio_only(d),
            config: DpgmmConfig::default(),
            trace: vec![TraceEntry {
                sweep: 1,
                clusters: 2,
                joint_log_prob: -12.5,
            }],
        }
    }

    #[test]
    fn single_cluster_is_certain() {
        let m = model(vec![gaussian(1.0, &[0.0, 0.0], &[1.0, 2.0])]);
        for x in [[0.0, 0.0], [100.0, -3.0]] {
            assert_eq!(m.posterior(&x).unwrap().probs, vec![1.0]);
        }
    }

    #[test]
    fn symmetric_pair_is_even() {
        let m = model(vec![
            gaussian(0.5, &[-1.0, 0.0], &[1.0, 1.0]),
            gaussian(0.5, &[1.0, 0.0], &[1.0, 1.0]),
        ]);
        let p = m.posterior(&[0.0, 0.3]).unwrap();
        assert_eq!(p.probs[0], p.probs[1]);
        assert!((p.probs[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn means_differing_only_in_unobserved_dims() {
        let m = model(vec![
            gaussian(0.5, &[0.0, -4.0], &[1.0, 1.0]),
            gaussian(0.5, &[0.0, 4.0], &[1.0, 1.0]),
        ]);
        let p = m.posterior_marginal(&[0.7], &[0]).unwrap();
        assert_eq!(p.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn all_observed_equals_full_posterior() {
        let m = model(vec![
            gaussian(0.3, &[0.0, 1.0, 2.0], &[1.0, 2.0, 0.5]),
            gaussian(0.7, &[1.0, -1.0, 0.0], &[0.3, 1.0, 4.0]),
        ]);
        let x = [0.4, 0.2, 1.1];
        assert_eq!(
            m.posterior(&x).unwrap(),
            m.posterior_marginal(&x, &[0, 1, 2]).unwrap()
        );
    }

    #[test]
    fn query_errors() {
        let m = model(vec![gaussian(1.0, &[0.0, 0.0], &[1.0, 1.0])]);
        assert!(m.posterior(&[0.0]).is_err());
        assert!(m.posterior(&[f64::NAN, 0.0]).is_err());
        assert!(m.posterior_marginal(&[], &[]).is_err());
        assert!(m.posterior_marginal(&[1.0], &[5]).is_err());
        assert!(m.posterior_marginal(&[1.0, 2.0], &[0]).is_err());
    }

    #[test]
    fn bytes_round_trip_and_truncation() {
        let m = model(vec![
            gaussian(0.25, &[0.0, 1.0], &[1.0, 2.0]),
            gaussian(0.75, &[3.0, -1.0], &[0.5, 0.1]),
        ]);
        let bytes = m.to_bytes();
        let back = DpgmmModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        for cut in [0, 8, 30, bytes.len() - 1] {
            assert!(DpgmmModel::from_bytes(&bytes[..cut]).is_err());
        }
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            DpgmmModel::from_bytes(&wrong_version),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn regularization_floors_eigenvalues() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = regularize_covariance(singular);
        let min = SymmetricEigen::new(r.clone()).eigenvalues.min();
        assert!(min >= 1e-8 * r.trace() / 2.0 * 0.999);
        assert!(ClusterGaussian::new(1.0, DVector::zeros(2), r).is_ok());
    }
}
