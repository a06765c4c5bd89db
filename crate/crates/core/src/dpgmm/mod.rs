//! Dirichlet-process Gaussian mixture with a conjugate Normal-Inverse-Wishart
//! prior, fitted by collapsed Gibbs sampling.

mod crp;
pub(crate) mod linalg;
mod model;
mod sampler;

pub use crp::crp_assignment_probs;
pub use model::{ClusterGaussian, ClusterPosterior, DpgmmModel, GaussianMixture, TraceEntry};
pub use sampler::fit;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpgmmConfig {
    pub alpha: f64,
    pub iterations: usize,
    pub init_clusters: usize,
    pub seed: u64,
}

impl Default for DpgmmConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            iterations: 1500,
            init_clusters: 10,
            seed: 0,
        }
    }
}

impl DpgmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.init_clusters == 0 {
            return Err(Error::Config("init_clusters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Normal-Inverse-Wishart prior over a cluster's mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwPrior {
    pub mean0: DVector<f64>,
    pub kappa0: f64,
    pub nu0: f64,
    pub psi0: DMatrix<f64>,
}

impl NiwPrior {
    pub fn new(mean0: DVector<f64>, kappa0: f64, nu0: f64, psi0: DMatrix<f64>) -> Result<Self> {
        let d = mean0.len();
        if d == 0 {
            return Err(Error::Config("prior dimension must be positive".into()));
        }
        if psi0.nrows() != d || psi0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: psi0.nrows(),
            });
        }
        if !(kappa0 > 0.0) {
            return Err(Error::Config(format!("kappa0 must be positive, got {kappa0}")));
        }
        if !(nu0 > d as f64 - 1.0) {
            return Err(Error::Config(format!("nu0 must exceed d - 1 = {}, got {nu0}", d - 1)));
        }
        if (&psi0 - psi0.transpose()).amax() > 1e-12 * psi0.amax().max(1.0) {
            return Err(Error::Config("psi0 must be symmetric".into()));
        }
        if psi0.clone().cholesky().is_none() {
            return Err(Error::Config("psi0 must be positive definite".into()));
        }
        Ok(Self {
            mean0,
            kappa0,
            nu0,
            psi0,
        })
    }

    /// Weakly informative defaults scaled to the data: mean0 = data mean,
    /// kappa0 = 1, nu0 = d + 3, psi0 = diag(per-dimension variance).
    pub fn from_data<'a>(rows: impl IntoIterator<Item = &'a [f64]>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        let mut n = 0usize;
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            n += 1;
            for j in 0..d {
                let delta = row[j] - mean[j];
                mean[j] += delta / n as f64;
                m2[j] += delta * (row[j] - mean[j]);
            }
        }
        if n < 2 {
            return Err(Error::Empty("need at least two points for a data-driven prior"));
        }
        let var: Vec<f64> = m2
            .iter()
            .map(|s| {
                let v = s / (n - 1) as f64;
                if v > 0.0 {
                    v
                } else {
                    1e-6
                }
            })
            .collect();
        Self::new(
            DVector::from_vec(mean),
            1.0,
            d as f64 + 3.0,
            DMatrix::from_diagonal(&DVector::from_vec(var)),
        )
    }

    /// Multiplies psi0 by `factor`; scales the prior's expected covariance.
    pub fn with_psi_scale(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Config(format!("psi scale must be positive, got {factor}")));
        }
        self.psi0 *= factor;
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.mean0.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_validation() {
        let m = DVector::zeros(2);
        let id = DMatrix::identity(2, 2);
        assert!(NiwPrior::new(m.clone(), 1.0, 1.5, id.clone()).is_ok());
        assert!(NiwPrior::new(m.clone(), 1.0, 1.0, id.clone()).is_err());
        assert!(NiwPrior::new(m.clone(), 0.0, 3.0, id.clone()).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(NiwPrior::new(m.clone(), 1.0, 3.0, indefinite).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(NiwPrior::new(m, 1.0, 3.0, asym).is_err());
    }

    #[test]
    fn data_prior_defaults() {
        let rows = [[0.0, 10.0], [2.0, 10.0], [4.0, 10.0]];
        let p = NiwPrior::from_data(rows.iter().map(|r| &r[..]), 2).unwrap();
        assert_eq!(p.mean0.as_slice(), &[2.0, 10.0]);
        assert_eq!(p.kappa0, 1.0);
        assert_eq!(p.nu0, 5.0);
        assert_eq!(p.psi0[(0, 0)], 4.0);
        assert!(p.psi0[(1, 1)] > 0.0);
        assert_eq!(p.psi0[(0, 1)], 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(DpgmmConfig::default().validate().is_ok());
        for bad in [
            DpgmmConfig { iterations: 0, ..Default::default() },
            DpgmmConfig { init_clusters: 0, ..Default::default() },
            DpgmmConfig { alpha: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
