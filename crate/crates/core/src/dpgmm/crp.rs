use crate::error::{Error, Result};

/// Chinese restaurant process masses for the `n`-th point (1-based) given
/// the sizes of the clusters formed by the first `n - 1` points.
///
/// Returns one mass per existing cluster followed by the mass of opening a
/// new cluster: `n_k / (n - 1 + alpha)` and `alpha / (n - 1 + alpha)`.
pub fn crp_assignment_probs(n: usize, counts: &[usize], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::Data("point index is 1-based".into()));
    }
    let seated: usize = counts.iter().sum();
    if seated != n - 1 {
        return Err(Error::Data(format!(
            "cluster sizes sum to {seated}, expected n - 1 = {}",
            n - 1
        )));
    }
    let denom = (n - 1) as f64 + alpha;
    let mut probs: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    probs.push(alpha / denom);
    Ok(probs)
}
