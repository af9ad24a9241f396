//! Summary statistics and the paired Wilcoxon signed-rank test.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Sample quantile with linear interpolation between order statistics
/// (position `(n - 1) p`, the "type 7" rule). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot summary: quartiles and the values beyond 1.5 IQR.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("summary of an empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::contract("summary of a sample containing NaN"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let fence = 1.5 * (q3 - q1);
        let outliers = sorted
            .iter()
            .copied()
            .filter(|&v| v < q1 - fence || v > q3 + fence)
            .collect();
        Ok(Summary {
            n: sorted.len(),
            median: quantile_sorted(&sorted, 0.5),
            q1,
            q3,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            outliers,
        })
    }
}

/// Largest sample size (after dropping zero differences) handled with the
/// exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Result of [`wilcoxon_paired`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences `a - b`.
    pub w_plus: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, doubled so that they are integers.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean; doubled: (i + 1) + (j + 1).
        let r = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided paired Wilcoxon signed-rank test of `a` against `b`.
///
/// Zero differences are dropped. Tied magnitudes receive midranks. With at
/// most [`WILCOXON_EXACT_MAX`] nonzero differences the p-value comes from the
/// exact permutation distribution of the observed ranks (all `2^n` sign
/// assignments, counted by dynamic programming); above that, from the normal
/// approximation with tie-corrected variance and no continuity correction.
/// `p = min(1, 2 min(P(W <= w), P(W >= w)))`.
pub fn wilcoxon_paired(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::contract("paired test needs samples of equal length"));
    }
    if a.len() < 5 {
        return Err(Error::contract("paired test needs at least five pairs"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::contract("paired test input is not finite"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&d| d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            n: 0,
            p_value: 1.0,
            exact: true,
        });
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&mags);
    let w2: u64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_plus = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        let total: u64 = ranks.iter().sum();
        let mut counts = vec![0.0f64; total as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                let c = counts[s];
                if c != 0.0 {
                    counts[s + r] += c;
                }
            }
            reach += r;
        }
        let all = libm::pow(2.0, n as f64);
        let lower: f64 = counts[..=w2 as usize].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2 as usize..].iter().sum::<f64>() / all;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(WilcoxonResult {
            w_plus,
            n,
            p_value: p,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p = if var > 0.0 {
        let z = (w_plus - mean) / libm::sqrt(var);
        libm::erfc(z.abs() / core::f64::consts::SQRT_2).min(1.0)
    } else {
        1.0
    };
    Ok(WilcoxonResult {
        w_plus,
        n,
        p_value: p,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_summary() {
        let s = Summary::of(&[0.7]).unwrap();
        assert_eq!((s.median, s.q1, s.q3), (0.7, 0.7, 0.7));
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn quartiles_interpolate() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(s.outliers, vec![100.0]);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(wilcoxon_paired(&a, &a).unwrap().p_value, 1.0);
    }

    #[test]
    fn complete_domination() {
        let a: Vec<f64> = (0..21).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 1.0 + x * 0.1).collect();
        let r = wilcoxon_paired(&a, &b).unwrap();
        assert!(r.exact);
        assert_eq!(r.w_plus, 0.0);
        let expected = 2.0 / 2f64.powi(21);
        assert!((r.p_value - expected).abs() < 1e-20);
        assert!(r.p_value < 1e-3);
    }

    #[test]
    fn alternating_equal_magnitudes() {
        let a = [1.0, -1.0, 1.0, -1.0, 1.0];
        let b = [0.0; 5];
        // All ranks tie at 3; W+ = 9 = 3 * #positive; P(#pos >= 3) = 1/2.
        let r = wilcoxon_paired(&a, &b).unwrap();
        assert_eq!(r.w_plus, 9.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.11).cos() * 0.5).collect();
        let r = wilcoxon_paired(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn rejects_short_or_mismatched() {
        assert!(wilcoxon_paired(&[1.0; 4], &[0.0; 4]).is_err());
        assert!(wilcoxon_paired(&[1.0; 5], &[0.0; 6]).is_err());
    }
}
