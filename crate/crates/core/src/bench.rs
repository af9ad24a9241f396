//! Synthetic benchmark targets and dataset plumbing.
//!
//! Univariate targets on `[0, 1]`: `x^2`, `sqrt(x)` and the logistic
//! `1 / (1 + exp(-10 (x - 1/2)))`. Multivariate targets are random
//! nonnegative combinations of all monomials up to degree two, normalized by
//! the sum of their weights, which makes them nondecreasing on `[0, 1]^d` with
//! values in `[0, 1]`.
//!
//! Draw order from a [`BenchmarkSpec`]'s stream is fixed: polynomial weights (multivariate
//! only), all training inputs row by row, all training noise, then the test
//! inputs (multivariate only; the univariate test set is an even grid).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;

use crate::data::Provenance;
use crate::model::MonotonicityMask;
use crate::numerics::{exp, RngStream};
use crate::{Dataset, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    FSq,
    FSqrt,
    FSig,
    RandomPoly { dim: usize },
}

impl TaskKind {
    pub fn dim(self) -> usize {
        match self {
            TaskKind::RandomPoly { dim } => dim,
            _ => 1,
        }
    }

    pub fn is_univariate(self) -> bool {
        !matches!(self, TaskKind::RandomPoly { .. })
    }

    pub fn name(self) -> String {
        match self {
            TaskKind::FSq => "f_sq".into(),
            TaskKind::FSqrt => "f_sqrt".into(),
            TaskKind::FSig => "f_sig".into(),
            TaskKind::RandomPoly { dim } => format!("poly_d{dim}"),
        }
    }

    /// Parses the names produced by [`name`](Self::name).
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f_sq" => Some(TaskKind::FSq),
            "f_sqrt" => Some(TaskKind::FSqrt),
            "f_sig" => Some(TaskKind::FSig),
            _ => s
                .strip_prefix("poly_d")
                .and_then(|d| d.parse().ok())
                .filter(|&d| d > 0)
                .map(|dim| TaskKind::RandomPoly { dim }),
        }
    }
}

/// Number of monomials of degree at most two in `dim` variables.
pub fn poly_feature_count(dim: usize) -> usize {
    1 + 2 * dim + dim * (dim - 1) / 2
}

/// Monomials in the order `[1, x_1..x_d, x_1^2..x_d^2, x_i x_j (i < j)]`.
pub fn poly_features(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.extend_from_slice(x);
    out.extend(x.iter().map(|v| v * v));
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            out.push(x[i] * x[j]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomPolyTarget {
    pub dim: usize,
    /// Nonnegative, summing to one, in [`poly_features`] order.
    pub weights: Vec<f64>,
}

impl RandomPolyTarget {
    /// Weights drawn i.i.d. from `U(0, 1)` and normalized by their sum.
    pub fn sample(dim: usize, rng: &mut RngStream) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("polynomial target needs at least one input"));
        }
        let raw: Vec<f64> = (0..poly_feature_count(dim)).map(|_| rng.uniform()).collect();
        Self::from_raw_weights(dim, raw)
    }

    pub fn from_raw_weights(dim: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != poly_feature_count(dim) || raw.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::contract("polynomial weights must be nonnegative, one per feature"));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::contract("polynomial weights must not all be zero"));
        }
        Ok(RandomPolyTarget {
            dim,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut feats = Vec::with_capacity(self.weights.len());
        poly_features(x, &mut feats);
        feats.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }
}

/// A concrete target function.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    FSq,
    FSqrt,
    FSig,
    Poly(RandomPolyTarget),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Poly(p) => p.dim,
            _ => 1,
        }
    }

    /// Evaluate on the unit hypercube; inputs outside it are rejected.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::contract("target input has the wrong dimension"));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract("target input outside [0, 1]"));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Target::FSq => x[0] * x[0],
            Target::FSqrt => libm::sqrt(x[0]),
            Target::FSig => 1.0 / (1.0 + exp(-10.0 * (x[0] - 0.5))),
            Target::Poly(p) => p.eval(x),
        }
    }
}

/// What to generate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub kind: TaskKind,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl BenchmarkSpec {
    /// Defaults: 100 training points for univariate tasks, 500 for
    /// multivariate, 1000 test points, noise standard deviation 0.01.
    pub fn new(kind: TaskKind, seed: u64, stream_id: u64) -> Self {
        BenchmarkSpec {
            kind,
            n_train: if kind.is_univariate() { 100 } else { 500 },
            n_test: 1000,
            noise_sigma: 0.01,
            seed,
            stream_id,
        }
    }
}

/// Output of [`make_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTask {
    pub target: Target,
    pub train: Dataset,
    pub test: Dataset,
}

/// Training inputs uniform on the domain with Gaussian label noise; a
/// noise-free test set that is an even grid for univariate tasks and uniform
/// samples otherwise.
pub fn make_dataset(spec: &BenchmarkSpec) -> Result<GeneratedTask> {
    if spec.n_train == 0 || spec.n_test == 0 {
        return Err(Error::contract("benchmark needs at least one training and one test point"));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::contract("noise standard deviation must be nonnegative"));
    }
    if spec.kind.is_univariate() && spec.n_test < 2 {
        return Err(Error::contract("univariate test grid needs at least two points"));
    }
    let mut rng = RngStream::new(spec.seed, spec.stream_id);
    let target = match spec.kind {
        TaskKind::FSq => Target::FSq,
        TaskKind::FSqrt => Target::FSqrt,
        TaskKind::FSig => Target::FSig,
        TaskKind::RandomPoly { dim } => Target::Poly(RandomPolyTarget::sample(dim, &mut rng)?),
    };
    let d = target.dim();
    let provenance = Provenance::Generated {
        kind: spec.kind.name(),
        seed: spec.seed,
        stream_id: spec.stream_id,
    };

    let train_x: Vec<f64> = (0..spec.n_train * d).map(|_| rng.uniform()).collect();
    let mut train_y: Vec<f64> = train_x.chunks_exact(d).map(|x| target.eval_unchecked(x)).collect();
    if spec.noise_sigma > 0.0 {
        for y in &mut train_y {
            *y += rng.normal(0.0, spec.noise_sigma);
        }
    }
    let test_x: Vec<f64> = if spec.kind.is_univariate() {
        let last = (spec.n_test - 1) as f64;
        (0..spec.n_test).map(|i| i as f64 / last).collect()
    } else {
        (0..spec.n_test * d).map(|_| rng.uniform()).collect()
    };
    let test_y: Vec<f64> = test_x.chunks_exact(d).map(|x| target.eval_unchecked(x)).collect();

    Ok(GeneratedTask {
        train: Dataset::from_parts(d, train_x, train_y, provenance.clone()),
        test: Dataset::from_parts(d, test_x, test_y, provenance),
        target,
    })
}

/// Row indices of one cross-validation fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// `folds` test folds over a seeded permutation of `0..n`; from the remaining
/// rows of each fold, `val_fraction` (rounded) become validation rows.
/// With 5 folds and 0.25 this is a 60:20:20 split.
pub fn kfold_with_validation(n: usize, folds: usize, val_fraction: f64, rng: &mut RngStream) -> Result<Vec<FoldSplit>> {
    if folds < 2 || n < folds {
        return Err(Error::contract("k-fold needs at least two folds and one row per fold"));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::contract("validation fraction must lie in [0, 1)"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        perm.swap(i, j);
    }
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let test = perm[lo..hi].to_vec();
        let rest: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
        let n_val = libm::round(rest.len() as f64 * val_fraction) as usize;
        let n_val = n_val.min(rest.len().saturating_sub(1));
        out.push(FoldSplit {
            val: rest[..n_val].to_vec(),
            train: rest[n_val..].to_vec(),
            test,
        });
    }
    Ok(out)
}

/// Affine map of one column onto `[0, 1]` using fitted minimum and maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnTransform {
    pub min: f64,
    pub max: f64,
}

impl ColumnTransform {
    pub fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        ColumnTransform { min, max }
    }

    fn is_constant(&self) -> bool {
        !(self.max > self.min)
    }

    /// Constant columns map to 0.5. No clipping.
    pub fn apply(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn invert(&self, u: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + u * (self.max - self.min)
        }
    }

    /// Scale factor from normalized to original squared errors.
    pub fn squared_scale(&self) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (self.max - self.min) * (self.max - self.min)
        }
    }
}

/// Per-column transforms for inputs and target.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitNormalizer {
    pub inputs: Vec<ColumnTransform>,
    pub target: ColumnTransform,
}

impl UnitNormalizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::contract("cannot normalize an empty dataset"));
        }
        let d = data.dim();
        let inputs = (0..d)
            .map(|m| ColumnTransform::fit(data.inputs().chunks_exact(d).map(|row| row[m])))
            .collect();
        let target = ColumnTransform::fit(data.targets().iter().copied());
        Ok(UnitNormalizer { inputs, target })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let d = data.dim();
        if d != self.inputs.len() {
            return Err(Error::contract("normalizer dimension does not match dataset"));
        }
        let inputs = data
            .inputs()
            .chunks_exact(d)
            .flat_map(|row| row.iter().zip(&self.inputs).map(|(v, t)| t.apply(*v)))
            .collect();
        let targets = data.targets().iter().map(|&y| self.target.apply(y)).collect();
        Dataset::new(d, inputs, targets, data.provenance.clone())
    }

    pub fn apply_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.inputs).map(|(v, t)| t.apply(*v)).collect()
    }
}

/// Fit min/max per column on `data` and map it onto `[0, 1]`.
pub fn normalize_unit(data: &Dataset) -> Result<(Dataset, UnitNormalizer)> {
    let norm = UnitNormalizer::fit(data)?;
    Ok((norm.apply(data)?, norm))
}

/// Column names and mask of [`partial_monotone_synthetic`].
pub const PARTIAL_SYNTHETIC_DIM: usize = 8;
pub const PARTIAL_SYNTHETIC_CONSTRAINED: [usize; 3] = [2, 4, 6];

/// Synthetic partial-monotone regression task with eight inputs, three of
/// them constrained (`x3`, `x5`, `x7`).
///
/// `y = 0.6 p(x_c) + 0.4 mean_i s_i(x_u,i) + noise`, where `p` is a random
/// degree-two polynomial target on the constrained inputs and each `s_i` is a
/// random-phase sinusoid `0.5 + 0.5 sin(2 pi f_i u + phase_i)` with
/// `f_i` in `{0.5, 1}`, so the free inputs act non-monotonically.
pub fn partial_monotone_synthetic(n: usize, noise_sigma: f64, seed: u64) -> Result<(Dataset, MonotonicityMask, Vec<String>)> {
    if n == 0 {
        return Err(Error::contract("synthetic dataset needs at least one row"));
    }
    let d = PARTIAL_SYNTHETIC_DIM;
    let mut rng = RngStream::new(seed, 0);
    let poly = RandomPolyTarget::sample(PARTIAL_SYNTHETIC_CONSTRAINED.len(), &mut rng)?;
    let free: Vec<usize> = (0..d).filter(|m| !PARTIAL_SYNTHETIC_CONSTRAINED.contains(m)).collect();
    let waves: Vec<(f64, f64)> = free
        .iter()
        .map(|_| {
            let freq = if rng.uniform() < 0.5 { 0.5 } else { 1.0 };
            (freq, rng.uniform_in(0.0, 2.0 * PI))
        })
        .collect();
    let inputs: Vec<f64> = (0..n * d).map(|_| rng.uniform()).collect();
    let mut targets = Vec::with_capacity(n);
    for row in inputs.chunks_exact(d) {
        let xc: Vec<f64> = PARTIAL_SYNTHETIC_CONSTRAINED.iter().map(|&m| row[m]).collect();
        let nuisance: f64 = free
            .iter()
            .zip(&waves)
            .map(|(&m, &(f, ph))| 0.5 + 0.5 * libm::sin(2.0 * PI * f * row[m] + ph))
            .sum::<f64>()
            / free.len() as f64;
        targets.push(0.6 * poly.eval(&xc) + 0.4 * nuisance);
    }
    if noise_sigma > 0.0 {
        for y in &mut targets {
            *y += rng.normal(0.0, noise_sigma);
        }
    }
    let mut flags = vec![false; d];
    for &m in &PARTIAL_SYNTHETIC_CONSTRAINED {
        flags[m] = true;
    }
    let names = (1..=d).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    let data = Dataset::new(
        d,
        inputs,
        targets,
        Provenance::Generated {
            kind: "partial_synthetic".into(),
            seed,
            stream_id: 0,
        },
    )?;
    Ok((data, MonotonicityMask::new(flags)?, names))
}
