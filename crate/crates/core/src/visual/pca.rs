use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::image::{GrayFrame, MOUTH_HEIGHT, MOUTH_WIDTH};
use crate::container::{write_atomic, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const BASIS_MAGIC: &[u8; 4] = b"AVEB";
const BASIS_VERSION: u32 = 1;

/// Mean image plus the top-k principal directions ("eigenmouths") of a set
/// of vectorized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub height: usize,
    pub width: usize,
    pub mean: DVector<f64>,
    /// One orthonormal component per row, ordered by decreasing variance.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
}

impl EigenBasis {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Mean-centred PCA of `samples` (one vector per row) through the
    /// eigendecomposition of the n x n Gram matrix, which has the same
    /// non-zero spectrum as the D x D covariance and is far smaller when
    /// n << D. Each component's sign is fixed so that its largest-magnitude
    /// entry is positive.
    pub fn fit(samples: &[Vec<f64>], k: usize, height: usize, width: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("PCA needs k >= 1".into()));
        }
        let n = samples.len();
        if n < k + 1 {
            return Err(Error::Data(format!(
                "PCA with k={k} needs at least {} frames, got {n}",
                k + 1
            )));
        }
        let d = height * width;
        if let Some(bad) = samples.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        if samples.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("PCA input"));
        }

        let mut mean = DVector::zeros(d);
        for s in samples {
            for (m, x) in mean.iter_mut().zip(s) {
                *m += x;
            }
        }
        mean /= n as f64;
        let centered = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let top = eig.eigenvalues[order[0]].max(0.0);
        let tol = (1e-10 * top).max(1e-12);
        let rank = order
            .iter()
            .take_while(|&&i| eig.eigenvalues[i] > tol)
            .count();
        if rank < k {
            return Err(Error::RankDeficient {
                requested: k,
                achievable: rank,
            });
        }

        let mut components = DMatrix::zeros(k, d);
        let mut explained_variance = Vec::with_capacity(k);
        for (row, &idx) in order.iter().take(k).enumerate() {
            let lambda = eig.eigenvalues[idx];
            let mut v = centered.tr_mul(&eig.eigenvectors.column(idx));
            v /= v.norm();
            let pivot = v.iamax();
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            components.row_mut(row).copy_from(&v.transpose());
            explained_variance.push(lambda / (n - 1) as f64);
        }
        Ok(Self {
            height,
            width,
            mean,
            components,
            explained_variance,
        })
    }

    pub fn project_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        let centered = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, m)| a - m));
        Ok((&self.components * centered).iter().copied().collect())
    }

    pub fn project(&self, frame: &GrayFrame) -> Result<Vec<f64>> {
        if frame.height != self.height || frame.width != self.width {
            return Err(Error::Data(format!(
                "frame is {}x{}, basis expects {}x{}",
                frame.height, frame.width, self.height, self.width
            )));
        }
        self.project_vector(&frame.to_vector())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: coeffs.len(),
            });
        }
        let c = DVector::from_column_slice(coeffs);
        Ok((&self.mean + self.components.tr_mul(&c)).iter().copied().collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(BASIS_MAGIC);
        w.u32(BASIS_VERSION);
        w.u32(self.height as u32);
        w.u32(self.width as u32);
        w.u32(self.k() as u32);
        self.mean.iter().for_each(|&x| w.f64(x));
        for r in 0..self.k() {
            self.components.row(r).iter().for_each(|&x| w.f64(x));
        }
        self.explained_variance.iter().for_each(|&x| w.f64(x));
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(BASIS_MAGIC)?;
        r.version(BASIS_VERSION)?;
        let height = r.u32()? as usize;
        let width = r.u32()? as usize;
        let k = r.u32()? as usize;
        let d = height * width;
        r.expect_remaining((d * (k + 1) + k).saturating_mul(8))?;
        let mean = DVector::from_iterator(d, (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        let rows = (0..k * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let components = DMatrix::from_row_slice(k, d, &rows);
        let explained_variance = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(Self {
            height,
            width,
            mean,
            components,
            explained_variance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Eigenmouth basis from cropped 100x150 grayscale frames.
pub fn fit_pca(frames: &[GrayFrame], k: usize) -> Result<EigenBasis> {
    if let Some(f) = frames.iter().find(|f| !f.is_mouth_sized()) {
        return Err(Error::Data(format!(
            "pretraining frame is {}x{}, expected {MOUTH_HEIGHT}x{MOUTH_WIDTH}",
            f.height, f.width
        )));
    }
    let samples: Vec<Vec<f64>> = frames.iter().map(GrayFrame::to_vector).collect();
    EigenBasis::fit(&samples, k, MOUTH_HEIGHT, MOUTH_WIDTH)
}
