use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Both samples at or below this size use the exact permutation distribution.
pub const EXACT_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: the number of pairs in which it is larger,
    /// ties counting one half.
    pub u: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-tailed Mann-Whitney U test.
pub fn mann_whitney_u(sample1: &[f64], sample2: &[f64]) -> Result<MannWhitney> {
    if sample1.is_empty() || sample2.is_empty() {
        return Err(Error::Empty("Mann-Whitney sample"));
    }
    if sample1.iter().chain(sample2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney sample"));
    }
    let (n1, n2) = (sample1.len(), sample2.len());
    let all: Vec<f64> = sample1.iter().chain(sample2).copied().collect();
    let ranks = midranks(&all);
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - offset;
    let mean = (n1 * n2) as f64 / 2.0;
    let observed = (u - mean).abs();

    if n1 <= EXACT_LIMIT && n2 <= EXACT_LIMIT {
        // enumerate every way of drawing n1 ranks for the first sample
        let tol = 1e-9 * (1.0 + observed);
        let (mut hits, mut total) = (0u64, 0u64);
        fn walk(ranks: &[f64], start: usize, left: usize, sum: f64, visit: &mut dyn FnMut(f64)) {
            if left == 0 {
                visit(sum);
                return;
            }
            for i in start..=ranks.len() - left {
                walk(ranks, i + 1, left - 1, sum + ranks[i], visit);
            }
        }
        walk(&ranks, 0, n1, 0.0, &mut |s| {
            total += 1;
            if ((s - offset) - mean).abs() >= observed - tol {
                hits += 1;
            }
        });
        return Ok(MannWhitney {
            u,
            p: hits as f64 / total as f64,
            exact: true,
        });
    }

    let n = (n1 + n2) as f64;
    let mut ties = 0.0;
    let mut sorted = all;
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0, exact: false });
    }
    // continuity-corrected normal approximation
    let z = (observed - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    Ok(MannWhitney {
        u,
        p: (2.0 * normal.sf(z)).min(1.0),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_by_three_exact() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p - 0.1).abs() < 1e-12);
        assert!(r.exact);
        let r = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.u, 9.0);
    }

    #[test]
    fn ten_by_ten_separated() {
        let hi: Vec<f64> = (0..10).map(|i| 0.9 + i as f64 * 0.001).collect();
        let lo: Vec<f64> = (0..10).map(|i| 0.8 + i as f64 * 0.001).collect();
        let r = mann_whitney_u(&hi, &lo).unwrap();
        assert_eq!(r.u, 100.0);
        // 2 / C(20, 10)
        assert!((r.p - 2.0 / 184_756.0).abs() < 1e-15);
        assert!(r.p < 1e-3);
    }

    #[test]
    fn identical_samples() {
        let s = [0.3, 0.5, 0.7, 0.9];
        let r = mann_whitney_u(&s, &s).unwrap();
        assert_eq!(r.u, 8.0);
        assert_eq!(r.p, 1.0);
        let big: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert_eq!(r.u, 112.5);
        assert!(r.p > 0.95 && !r.exact);
    }

    #[test]
    fn normal_approximation_reference() {
        // 0..12 against 6..18: six tied pairs, U = 15 + 6 * 0.5
        let a: Vec<f64> = (0..12).map(f64::from).collect();
        let b: Vec<f64> = (6..18).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u, 18.0);
        let sigma = (12.0f64 * 12.0 / 12.0 * (25.0 - 36.0 / (24.0 * 23.0))).sqrt();
        let z = (72.0f64 - 18.0 - 0.5) / sigma;
        let want = 2.0 * Normal::standard().sf(z);
        assert!((r.p - want).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn u_statistics_sum(a in proptest::collection::vec(0u8..6, 1..9), b in proptest::collection::vec(0u8..6, 1..9)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r1 = mann_whitney_u(&a, &b).unwrap();
            let r2 = mann_whitney_u(&b, &a).unwrap();
            prop_assert!((r1.u + r2.u - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((r1.p - r2.p).abs() < 1e-12);
            prop_assert!(r1.p > 0.0 && r1.p <= 1.0);
            // direct pair-count oracle
            let mut pairs = 0.0;
            for x in &a { for y in &b { pairs += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }; } }
            prop_assert!((r1.u - pairs).abs() < 1e-9);
        }
    }
}
