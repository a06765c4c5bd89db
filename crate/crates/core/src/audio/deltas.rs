use super::N_MFCC;
use crate::error::{Error, Result};

/// Windows on each side used by the regression delta.
pub const DELTA_REACH: usize = 3;

fn regression_delta(seq: &[[f64; N_MFCC]]) -> Vec<[f64; N_MFCC]> {
    let last = seq.len() as isize - 1;
    let at = |t: isize| &seq[t.clamp(0, last) as usize];
    let denom = 2.0 * (1..=DELTA_REACH).map(|n| (n * n) as f64).sum::<f64>();
    (0..seq.len() as isize)
        .map(|t| {
            let mut d = [0.0; N_MFCC];
            for n in 1..=DELTA_REACH as isize {
                let (fwd, back) = (at(t + n), at(t - n));
                for j in 0..N_MFCC {
                    d[j] += n as f64 * (fwd[j] - back[j]);
                }
            }
            d.iter_mut().for_each(|v| *v /= denom);
            d
        })
        .collect()
}

/// First and second regression deltas with reach 3; sequence ends are
/// replicate-padded so the output has the input's length.
#[allow(clippy::type_complexity)]
pub fn compute_deltas(
    coeffs: &[[f64; N_MFCC]],
) -> Result<(Vec<[f64; N_MFCC]>, Vec<[f64; N_MFCC]>)> {
    if coeffs.is_empty() {
        return Err(Error::Empty("coefficient sequence"));
    }
    let d1 = regression_delta(coeffs);
    let d2 = regression_delta(&d1);
    Ok((d1, d2))
}
