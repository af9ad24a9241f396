//! Univariate isotonic regression by pool adjacent violators.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Nondecreasing step function fitted by [`pava_fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct IsotonicFit {
    /// Distinct training inputs, ascending.
    pub breakpoints: Vec<f64>,
    /// Fitted value at each breakpoint, nondecreasing.
    pub levels: Vec<f64>,
    pub clamp: (f64, f64),
}

struct Block {
    sum: f64,
    weight: f64,
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

/// Weighted least-squares nondecreasing fit of `values` (already in order).
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push(Block {
            sum: v * w,
            weight: w,
            len: 1,
        });
        while blocks.len() >= 2 {
            let n = blocks.len();
            if blocks[n - 2].mean() <= blocks[n - 1].mean() {
                break;
            }
            let last = blocks.pop().unwrap();
            let prev = blocks.last_mut().unwrap();
            prev.sum += last.sum;
            prev.weight += last.weight;
            prev.len += last.len;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for b in &blocks {
        let m = b.mean();
        out.extend(core::iter::repeat_n(m, b.len));
    }
    out
}

/// Least-squares nondecreasing fit of `ys` against `xs`.
///
/// Points are sorted by `x`; targets sharing an `x` are pooled into their mean
/// (weighted by multiplicity) before pooling adjacent violators. Fitted levels
/// are clamped to `y_range`.
pub fn pava_fit(xs: &[f64], ys: &[f64], y_range: (f64, f64)) -> Result<IsotonicFit> {
    if xs.len() != ys.len() {
        return Err(Error::contract("isotonic regression needs as many targets as inputs"));
    }
    if xs.is_empty() {
        return Err(Error::contract("isotonic regression needs at least one point"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::contract("isotonic regression input is not finite"));
    }
    if !(y_range.0 <= y_range.1) {
        return Err(Error::contract("isotonic target range is empty"));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));

    let mut breakpoints: Vec<f64> = Vec::new();
    let mut means: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &i in &order {
        if breakpoints.last() == Some(&xs[i]) {
            let k = means.len() - 1;
            means[k] += ys[i];
            weights[k] += 1.0;
        } else {
            breakpoints.push(xs[i]);
            means.push(ys[i]);
            weights.push(1.0);
        }
    }
    for (m, w) in means.iter_mut().zip(&weights) {
        *m /= w;
    }
    let levels = pava(&means, &weights)
        .into_iter()
        .map(|v| v.clamp(y_range.0, y_range.1))
        .collect();
    Ok(IsotonicFit {
        breakpoints,
        levels,
        clamp: y_range,
    })
}

impl IsotonicFit {
    /// Level of the rightmost breakpoint `<= x`; the first level below the
    /// first breakpoint.
    pub fn predict(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        self.levels[idx.saturating_sub(1)]
    }

    /// Linear interpolation between breakpoints, constant outside them.
    pub fn predict_linear(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        if idx == 0 {
            return self.levels[0];
        }
        if idx == self.breakpoints.len() {
            return self.levels[idx - 1];
        }
        let (x0, x1) = (self.breakpoints[idx - 1], self.breakpoints[idx]);
        let (y0, y1) = (self.levels[idx - 1], self.levels[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Free-function form of [`IsotonicFit::predict`].
pub fn iso_predict(fit: &IsotonicFit, x: f64) -> f64 {
    fit.predict(x)
}
