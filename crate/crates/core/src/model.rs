//! Min-max module architectures.
//!
//! A module has `K` groups of linear neurons, group `k` holding `h_k` neurons.
//! Neuron `(k, j)` computes `a(x) = w . x - b` where the weights of constrained
//! (monotone) inputs are nonnegative, obtained by decoding an unconstrained
//! parameter `z`. The variants combine activations as follows:
//!
//! * [`Variant::Mm`]: `min_k max_j a(x)`, piecewise linear.
//! * [`Variant::Smm`]: `LSE_{-beta}` over groups of `LSE_beta` within groups,
//!   with a single learnable `beta = exp(ln_beta)`.
//! * [`Variant::Smm64`]: SMM where every activation also receives the output
//!   of a shared auxiliary network `phi(x_u)` of the free inputs, followed by
//!   an output sigmoid.
//!
//! Parameters are stored flat in a fixed order, see [`ParamLayout`].

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::numerics::{self, exp, sample_truncated_gaussian, sigmoid, RngStream};
use crate::{Dataset, Error, Result};

/// Initial value of `ln beta` for smooth variants.
pub const INITIAL_LN_BETA: f64 = -1.0;
/// Hidden width of the auxiliary network used by [`Variant::Smm64`].
pub const DEFAULT_AUX_HIDDEN: usize = 64;
/// Initial parameters are drawn from `N(0, 1)` truncated to this interval.
pub const INIT_TRUNCATION: (f64, f64) = (-2.0, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Mm,
    Smm,
    Smm64,
}

impl Variant {
    pub fn is_smooth(self) -> bool {
        !matches!(self, Variant::Mm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mm => "mm",
            Variant::Smm => "smm",
            Variant::Smm64 => "smm64",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mm" => Some(Variant::Mm),
            "smm" => Some(Variant::Smm),
            "smm64" => Some(Variant::Smm64),
            _ => None,
        }
    }
}

/// Maps an unconstrained parameter to a nonnegative weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum WeightEncoding {
    /// `w = exp(z)`
    #[default]
    Exponential,
    /// `w = z^2`
    Squared,
    /// `w = elu(z) + 1`, i.e. `exp(z)` for `z <= 0` and `z + 1` above.
    ExpLinear,
}

impl WeightEncoding {
    #[inline]
    pub fn decode(self, z: f64) -> f64 {
        match self {
            WeightEncoding::Exponential => exp(z),
            WeightEncoding::Squared => z * z,
            WeightEncoding::ExpLinear => {
                if z > 0.0 {
                    z + 1.0
                } else {
                    exp(z)
                }
            }
        }
    }

    /// Derivative of [`decode`](Self::decode).
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            WeightEncoding::Exponential => exp(z),
            WeightEncoding::Squared => 2.0 * z,
            WeightEncoding::ExpLinear => {
                if z > 0.0 {
                    1.0
                } else {
                    exp(z)
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightEncoding::Exponential => "exponential",
            WeightEncoding::Squared => "squared",
            WeightEncoding::ExpLinear => "exp_linear",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "exponential" => Some(WeightEncoding::Exponential),
            "squared" => Some(WeightEncoding::Squared),
            "exp_linear" => Some(WeightEncoding::ExpLinear),
            _ => None,
        }
    }
}

/// Hidden nonlinearity of the auxiliary network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AuxActivation {
    #[default]
    Tanh,
    Logistic,
}

impl AuxActivation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            AuxActivation::Tanh => libm::tanh(x),
            AuxActivation::Logistic => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation value `y = apply(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            AuxActivation::Tanh => 1.0 - y * y,
            AuxActivation::Logistic => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AuxActivation::Tanh => "tanh",
            AuxActivation::Logistic => "logistic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(AuxActivation::Tanh),
            "logistic" => Some(AuxActivation::Logistic),
            _ => None,
        }
    }
}

/// Number of groups and neurons per group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupShape {
    sizes: Vec<usize>,
}

impl GroupShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::contract("a module needs at least one group"));
        }
        if sizes.iter().any(|&h| h == 0) {
            return Err(Error::contract("every group needs at least one neuron"));
        }
        Ok(GroupShape { sizes })
    }

    /// `groups` groups of `neurons` neurons each.
    pub fn uniform(groups: usize, neurons: usize) -> Result<Self> {
        Self::new(vec![neurons; groups])
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total_neurons(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Largest group size.
    pub fn max_group(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Flat index range of the neurons in group `k`.
    pub fn group_range(&self, k: usize) -> Range<usize> {
        let start: usize = self.sizes[..k].iter().sum();
        start..start + self.sizes[k]
    }
}

impl Default for GroupShape {
    /// Six groups of six neurons.
    fn default() -> Self {
        GroupShape { sizes: vec![6; 6] }
    }
}

/// Which inputs the model must be nondecreasing in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonotonicityMask {
    flags: Vec<bool>,
}

impl MonotonicityMask {
    pub fn new(flags: Vec<bool>) -> Result<Self> {
        if flags.is_empty() {
            return Err(Error::contract("mask must cover at least one input"));
        }
        Ok(MonotonicityMask { flags })
    }

    /// Every input constrained.
    pub fn all(dim: usize) -> Self {
        MonotonicityMask {
            flags: vec![true; dim.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.flags.len()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_constrained(&self, m: usize) -> bool {
        self.flags[m]
    }

    pub fn constrained_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn free_count(&self) -> usize {
        self.dim() - self.constrained_count()
    }

    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, &f)| !f).map(|(i, _)| i)
    }

    pub fn constrained_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }
}

/// Everything needed to interpret a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    pub variant: Variant,
    pub shape: GroupShape,
    pub mask: MonotonicityMask,
    pub encoding: WeightEncoding,
    /// Hidden width of the auxiliary network; only used by `Smm64`.
    pub aux_hidden: usize,
    pub aux_activation: AuxActivation,
}

impl Architecture {
    pub fn new(variant: Variant, shape: GroupShape, mask: MonotonicityMask) -> Result<Self> {
        let arch = Architecture {
            variant,
            shape,
            mask,
            encoding: WeightEncoding::default(),
            aux_hidden: DEFAULT_AUX_HIDDEN,
            aux_activation: AuxActivation::default(),
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn with_encoding(mut self, encoding: WeightEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn with_aux(mut self, hidden: usize, activation: AuxActivation) -> Result<Self> {
        self.aux_hidden = hidden;
        self.aux_activation = activation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::Smm64 {
            if self.mask.free_count() == 0 {
                return Err(Error::contract(
                    "smm64 needs at least one unconstrained input for its auxiliary network",
                ));
            }
            if self.aux_hidden == 0 {
                return Err(Error::contract("auxiliary network needs hidden units"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mask.dim()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// Closed-form number of trainable scalars.
///
/// `(d + 1) * sum_k h_k` neuron parameters, plus `ln beta` for smooth
/// variants, plus `hidden * (d_free + 2) + 1` for the auxiliary network.
pub fn count_params(shape: &GroupShape, mask: &MonotonicityMask, variant: Variant, aux_hidden: usize) -> usize {
    let d = mask.dim();
    let mut n = (d + 1) * shape.total_neurons();
    if variant.is_smooth() {
        n += 1;
    }
    if variant == Variant::Smm64 {
        n += aux_hidden * (mask.free_count() + 2) + 1;
    }
    n
}

/// Offsets of each parameter block inside the flat vector.
///
/// Order: `z` (neuron-major, `d` entries per neuron, neurons ordered by group
/// then position), `b` (one per neuron), `ln_beta` (smooth variants), then the
/// auxiliary network: `W1` (`hidden x d_free`, row-major), `b1`, `W2`, `b2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub dim: usize,
    pub neurons: usize,
    pub z: Range<usize>,
    pub b: Range<usize>,
    pub ln_beta: Option<usize>,
    pub aux: Option<AuxLayout>,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxLayout {
    pub inputs: usize,
    pub hidden: usize,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: usize,
}

impl ParamLayout {
    fn new(arch: &Architecture) -> Self {
        let dim = arch.dim();
        let neurons = arch.shape.total_neurons();
        let z = 0..neurons * dim;
        let b = z.end..z.end + neurons;
        let mut end = b.end;
        let ln_beta = if arch.variant.is_smooth() {
            end += 1;
            Some(end - 1)
        } else {
            None
        };
        let aux = if arch.variant == Variant::Smm64 {
            let inputs = arch.mask.free_count();
            let hidden = arch.aux_hidden;
            let w1 = end..end + hidden * inputs;
            let b1 = w1.end..w1.end + hidden;
            let w2 = b1.end..b1.end + hidden;
            let b2 = w2.end;
            end = b2 + 1;
            Some(AuxLayout {
                inputs,
                hidden,
                w1,
                b1,
                w2,
                b2,
            })
        } else {
            None
        };
        ParamLayout {
            dim,
            neurons,
            z,
            b,
            ln_beta,
            aux,
            len: end,
        }
    }

    /// Name of the block that owns flat index `i`.
    pub fn block_of(&self, i: usize) -> &'static str {
        if self.z.contains(&i) {
            "z"
        } else if self.b.contains(&i) {
            "b"
        } else if self.ln_beta == Some(i) {
            "ln_beta"
        } else if let Some(aux) = &self.aux {
            if aux.w1.contains(&i) {
                "aux.w1"
            } else if aux.b1.contains(&i) {
                "aux.b1"
            } else if aux.w2.contains(&i) {
                "aux.w2"
            } else {
                "aux.b2"
            }
        } else {
            "out of range"
        }
    }
}

/// Flat vector of unconstrained trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams(pub Vec<f64>);

impl ModelParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reusable buffers for forward and backward passes.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    /// Effective weights in feature-major order (`weights[m * neurons + n]`),
    /// filled by [`Model::prepare`].
    pub weights: Vec<f64>,
    pub activations: Vec<f64>,
    pub hidden: Vec<f64>,
    pub free_inputs: Vec<f64>,
    pub groups: Vec<f64>,
    pub group_weights: Vec<f64>,
    pub neuron_weights: Vec<f64>,
}

/// An architecture together with a parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    arch: Architecture,
    layout: ParamLayout,
    params: ModelParams,
}

impl Model {
    pub fn from_params(arch: Architecture, params: ModelParams) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        if params.len() != layout.len {
            return Err(Error::contract("parameter vector length does not match architecture"));
        }
        Ok(Model {
            arch,
            layout,
            params,
        })
    }

    /// Random initialization: every parameter i.i.d. from a standard normal
    /// truncated to `[-2, 2]`, drawn in flat layout order, except
    /// `ln beta = -1`.
    pub fn init(arch: Architecture, rng: &mut RngStream) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let (lo, hi) = INIT_TRUNCATION;
        let mut values = Vec::with_capacity(layout.len);
        for i in 0..layout.len {
            if layout.ln_beta == Some(i) {
                values.push(INITIAL_LN_BETA);
            } else {
                values.push(sample_truncated_gaussian(rng, lo, hi)?);
            }
        }
        Ok(Model {
            arch,
            layout,
            params: ModelParams(values),
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn variant(&self) -> Variant {
        self.arch.variant
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    /// `exp(ln_beta)`, or `None` for the hard min-max variant.
    pub fn beta(&self) -> Option<f64> {
        self.layout.ln_beta.map(|i| exp(self.params.0[i]))
    }

    /// Effective weight of input `m` in neuron `n` (flat neuron index).
    #[inline]
    pub fn weight(&self, n: usize, m: usize) -> f64 {
        let z = self.params.0[n * self.layout.dim + m];
        if self.arch.mask.is_constrained(m) {
            self.arch.encoding.decode(z)
        } else {
            z
        }
    }

    /// True when every effective weight on a constrained input is `>= 0`.
    pub fn constrained_weights_nonnegative(&self) -> bool {
        (0..self.layout.neurons).all(|n| {
            self.arch
                .mask
                .constrained_indices()
                .all(|m| self.weight(n, m) >= 0.0)
        })
    }

    pub fn bias(&self, n: usize) -> f64 {
        self.params.0[self.layout.b.start + n]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::contract("input dimension does not match model"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("input is not finite"));
        }
        Ok(())
    }

    /// Output of the auxiliary network, zero for variants without one.
    pub fn aux_output(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut scratch = Scratch::default();
        Ok(self.aux_forward(x, &mut scratch))
    }

    pub(crate) fn aux_forward(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let Some(aux) = &self.layout.aux else {
            return 0.0;
        };
        let p = &self.params.0;
        scratch.free_inputs.clear();
        scratch
            .free_inputs
            .extend(self.arch.mask.free_indices().map(|m| x[m]));
        scratch.hidden.clear();
        let act = self.arch.aux_activation;
        for h in 0..aux.hidden {
            let row = &p[aux.w1.start + h * aux.inputs..aux.w1.start + (h + 1) * aux.inputs];
            let pre: f64 = row.iter().zip(&scratch.free_inputs).map(|(w, u)| w * u).sum::<f64>() + p[aux.b1.start + h];
            scratch.hidden.push(act.apply(pre));
        }
        let w2 = &p[aux.w2.clone()];
        w2.iter().zip(&scratch.hidden).map(|(w, h)| w * h).sum::<f64>() + p[aux.b2]
    }

    /// Decode all neuron weights into `scratch.weights`. Must be called before
    /// [`activations`](Self::activations) whenever the parameters change.
    pub(crate) fn prepare(&self, scratch: &mut Scratch) {
        let d = self.layout.dim;
        let neurons = self.layout.neurons;
        let mask = self.arch.mask.flags();
        let enc = self.arch.encoding;
        let z = &self.params.0[self.layout.z.clone()];
        scratch.weights.clear();
        for m in 0..d {
            scratch.weights.extend((0..neurons).map(|n| {
                let v = z[n * d + m];
                if mask[m] {
                    enc.decode(v)
                } else {
                    v
                }
            }));
        }
    }

    pub(crate) fn prepared(&self) -> Scratch {
        let mut scratch = Scratch::default();
        self.prepare(&mut scratch);
        scratch
    }

    /// All neuron activations, including the shared auxiliary term, written to
    /// `scratch.activations`.
    pub(crate) fn activations(&self, x: &[f64], scratch: &mut Scratch) {
        let phi = self.aux_forward(x, scratch);
        let neurons = self.layout.neurons;
        let bias = &self.params.0[self.layout.b.clone()];
        let acts = &mut scratch.activations;
        acts.clear();
        acts.resize(neurons, 0.0);
        // Per neuron this sums w_m x_m in increasing m, vectorized over neurons.
        for (w, &xm) in scratch.weights.chunks_exact(neurons).zip(x) {
            for (a, &wm) in acts.iter_mut().zip(w) {
                *a += wm * xm;
            }
        }
        for (a, b) in acts.iter_mut().zip(bias) {
            *a = *a - b + phi;
        }
    }

    /// Activation of neuron `j` in group `k`.
    pub fn neuron_activation(&self, x: &[f64], k: usize, j: usize) -> Result<f64> {
        self.check_input(x)?;
        if k >= self.arch.shape.groups() || j >= self.arch.shape.sizes()[k] {
            return Err(Error::contract("neuron index out of range"));
        }
        let mut scratch = self.prepared();
        self.activations(x, &mut scratch);
        Ok(scratch.activations[self.arch.shape.group_range(k).start + j])
    }

    /// Hard min-max combination of the current activations, with the selected
    /// `(group, flat neuron)`; ties go to the lowest index.
    pub(crate) fn min_max(&self, activations: &[f64]) -> (f64, usize, usize) {
        let shape = &self.arch.shape;
        let mut best = (f64::INFINITY, 0, 0);
        for k in 0..shape.groups() {
            let r = shape.group_range(k);
            let mut arg = r.start;
            for n in r {
                if activations[n] > activations[arg] {
                    arg = n;
                }
            }
            if activations[arg] < best.0 {
                best = (activations[arg], k, arg);
            }
        }
        best
    }

    /// Smooth combination. Fills `scratch.groups` with the per-group values,
    /// `scratch.neuron_weights` with the within-group softmax weights and
    /// `scratch.group_weights` with the softmax over groups at scale `-beta`;
    /// these are the partial derivatives used by the backward pass.
    pub(crate) fn smooth_min_max(&self, scratch: &mut Scratch, beta: f64) -> f64 {
        let shape = &self.arch.shape;
        let Scratch {
            activations,
            groups,
            group_weights,
            neuron_weights,
            ..
        } = scratch;
        groups.clear();
        neuron_weights.clear();
        neuron_weights.resize(activations.len(), 0.0);
        let mut start = 0;
        for &h in shape.sizes() {
            let a = &activations[start..start + h];
            let q = &mut neuron_weights[start..start + h];
            let m = a.iter().copied().fold(f64::NEG_INFINITY, |m, v| if v > m { v } else { m });
            let mut s = 0.0;
            for (qi, &ai) in q.iter_mut().zip(a) {
                *qi = exp(beta * (ai - m));
                s += *qi;
            }
            let inv = 1.0 / s;
            q.iter_mut().for_each(|qi| *qi *= inv);
            groups.push(m + numerics::ln(s) / beta);
            start += h;
        }
        let m = groups.iter().copied().fold(f64::INFINITY, |m, v| if v < m { v } else { m });
        group_weights.clear();
        let mut s = 0.0;
        for &g in groups.iter() {
            let e = exp(-beta * (g - m));
            group_weights.push(e);
            s += e;
        }
        let inv = 1.0 / s;
        group_weights.iter_mut().for_each(|p| *p *= inv);
        m - numerics::ln(s) / beta
    }

    pub(crate) fn forward_with(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        self.activations(x, scratch);
        match self.arch.variant {
            Variant::Mm => self.min_max(&scratch.activations).0,
            Variant::Smm => {
                let beta = self.beta().unwrap_or(1.0);
                self.smooth_min_max(scratch, beta)
            }
            Variant::Smm64 => {
                let beta = self.beta().unwrap_or(1.0);
                sigmoid(self.smooth_min_max(scratch, beta))
            }
        }
    }

    /// Model output for input `x`, whatever the variant.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut scratch = self.prepared();
        Ok(self.forward_with(x, &mut scratch))
    }

    /// Predictions for every row of `data`.
    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.dim() != self.dim() {
            return Err(Error::contract("dataset dimension does not match model"));
        }
        let mut scratch = self.prepared();
        Ok(data.rows().map(|(x, _)| self.forward_with(x, &mut scratch)).collect())
    }

    /// `min_k max_j a(x)`. Only valid for the MM variant.
    pub fn forward_mm(&self, x: &[f64]) -> Result<f64> {
        if self.arch.variant != Variant::Mm {
            return Err(Error::contract("forward_mm needs an MM model"));
        }
        self.predict(x)
    }

    /// `LSE_{-beta}` over groups of `LSE_beta` within groups. Valid for `Smm`
    /// and for `Smm64`, in which case the auxiliary term is included but the
    /// output sigmoid is not.
    pub fn forward_smm(&self, x: &[f64]) -> Result<f64> {
        let Some(beta) = self.beta() else {
            return Err(Error::contract("forward_smm needs a smooth model"));
        };
        self.check_input(x)?;
        let mut scratch = self.prepared();
        self.activations(x, &mut scratch);
        Ok(self.smooth_min_max(&mut scratch, beta))
    }

    /// `sigmoid(forward_smm(x))` for the `Smm64` variant.
    pub fn forward_smm64(&self, x: &[f64]) -> Result<f64> {
        if self.arch.variant != Variant::Smm64 {
            return Err(Error::contract("forward_smm64 needs an smm64 model"));
        }
        self.predict(x)
    }

    /// Same parameters read as a hard min-max module: `min_k max_j a(x)`,
    /// including the auxiliary term when present. Lets smooth models be
    /// compared against their piecewise-linear counterpart.
    pub fn hard_min_max(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut scratch = self.prepared();
        self.activations(x, &mut scratch);
        Ok(self.min_max(&scratch.activations).0)
    }

    /// Mean squared error over `data`.
    pub fn mse(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::contract("mean squared error of an empty dataset"));
        }
        if data.dim() != self.dim() {
            return Err(Error::contract("dataset dimension does not match model"));
        }
        let mut scratch = self.prepared();
        let mut sum = 0.0;
        for (x, y) in data.rows() {
            let r = self.forward_with(x, &mut scratch) - y;
            sum += r * r;
        }
        Ok(sum / data.len() as f64)
    }

    /// Which neuron the hard min-max selects for each row of `inputs`
    /// (row-major, `dim` columns).
    pub fn active_neuron_stats(&self, inputs: &[f64]) -> Result<ActiveNeuronStats> {
        let d = self.dim();
        if inputs.is_empty() || inputs.len() % d != 0 {
            return Err(Error::contract("active neuron statistics need at least one full input row"));
        }
        let mut scratch = self.prepared();
        let mut counts = vec![0usize; self.layout.neurons];
        for x in inputs.chunks_exact(d) {
            self.activations(x, &mut scratch);
            let (_, _, n) = self.min_max(&scratch.activations);
            counts[n] += 1;
        }
        let active = counts.iter().filter(|&&c| c > 0).count();
        Ok(ActiveNeuronStats { counts, active })
    }

    /// Spot-check monotonicity on `probes` random ordered pairs.
    ///
    /// Each probe draws `x` uniformly from the unit cube and `x'` by adding an
    /// independent uniform `[0, 1)` increment to every constrained coordinate.
    /// Returns the number of pairs with `f(x') < f(x)`.
    pub fn monotonicity_violations(&self, probes: usize, rng: &mut RngStream) -> usize {
        let d = self.dim();
        let mask = self.arch.mask.flags();
        let mut scratch = self.prepared();
        let mut x = vec![0.0; d];
        let mut x_up = vec![0.0; d];
        let mut violations = 0;
        for _ in 0..probes {
            for m in 0..d {
                x[m] = rng.uniform();
                x_up[m] = if mask[m] { x[m] + rng.uniform() } else { x[m] };
            }
            let lo = self.forward_with(&x, &mut scratch);
            let hi = self.forward_with(&x_up, &mut scratch);
            if hi < lo {
                violations += 1;
            }
        }
        violations
    }
}

/// Per-neuron counts of how often each neuron was the active one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveNeuronStats {
    /// Indexed by flat neuron index.
    pub counts: Vec<usize>,
    /// Number of neurons active for at least one input.
    pub active: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(variant: Variant, shape: GroupShape, mask: MonotonicityMask, values: Vec<f64>) -> Model {
        let arch = Architecture::new(variant, shape, mask).unwrap();
        Model::from_params(arch, ModelParams(values)).unwrap()
    }

    #[test]
    fn reference_parameter_counts() {
        let shape = GroupShape::default();
        assert_eq!(count_params(&shape, &MonotonicityMask::all(1), Variant::Smm, 64), 73);
        assert_eq!(count_params(&shape, &MonotonicityMask::all(1), Variant::Mm, 64), 72);
        assert_eq!(count_params(&shape, &MonotonicityMask::all(2), Variant::Smm, 64), 109);
        assert_eq!(count_params(&shape, &MonotonicityMask::all(4), Variant::Smm, 64), 181);
        assert_eq!(count_params(&shape, &MonotonicityMask::all(6), Variant::Smm, 64), 253);
        let mut flags = vec![false; 8];
        for i in [2, 4, 6] {
            flags[i] = true;
        }
        let mask = MonotonicityMask::new(flags).unwrap();
        assert_eq!(count_params(&shape, &mask, Variant::Smm, 64), 325);
        assert_eq!(count_params(&shape, &mask, Variant::Smm64, 64), 774);
    }

    #[test]
    fn init_contract() {
        let mut rng = RngStream::new(3, 0);
        for (d, variant, expected) in [(1, Variant::Smm, 73), (6, Variant::Smm, 253), (1, Variant::Mm, 72)] {
            let arch = Architecture::new(variant, GroupShape::default(), MonotonicityMask::all(d)).unwrap();
            let m = Model::init(arch, &mut rng).unwrap();
            assert_eq!(m.params().len(), expected);
            for (i, &v) in m.params().as_slice().iter().enumerate() {
                if m.layout().ln_beta == Some(i) {
                    assert_eq!(v, -1.0);
                } else {
                    assert!((-2.0..=2.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn smm64_needs_free_input() {
        let err = Architecture::new(Variant::Smm64, GroupShape::default(), MonotonicityMask::all(3));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn layout_enumerates_every_scalar() {
        let mask = MonotonicityMask::new(vec![true, false, true, false, false]).unwrap();
        for variant in [Variant::Mm, Variant::Smm, Variant::Smm64] {
            let shape = GroupShape::new(vec![2, 3, 1]).unwrap();
            let arch = Architecture::new(variant, shape.clone(), mask.clone()).unwrap();
            let layout = arch.layout();
            let mut seen = vec![0u8; layout.len];
            for i in layout.z.clone().chain(layout.b.clone()).chain(layout.ln_beta) {
                seen[i] += 1;
            }
            if let Some(aux) = &layout.aux {
                for i in aux.w1.clone().chain(aux.b1.clone()).chain(aux.w2.clone()).chain([aux.b2]) {
                    seen[i] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            assert_eq!(layout.len, count_params(&shape, &mask, variant, DEFAULT_AUX_HIDDEN));
        }
    }

    #[test]
    fn identity_weight_activation() {
        let m = model(Variant::Mm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1), vec![0.0, 0.0]);
        assert_eq!(m.neuron_activation(&[2.0], 0, 0).unwrap(), 2.0);
        assert!(m.neuron_activation(&[2.0], 0, 1).is_err());
    }

    #[test]
    fn hand_evaluated_activation() {
        let m = model(
            Variant::Mm,
            GroupShape::uniform(1, 1).unwrap(),
            MonotonicityMask::all(2),
            vec![0.0, 3f64.ln(), 1.0],
        );
        let a = m.neuron_activation(&[1.0, 1.0], 0, 0).unwrap();
        assert!((a - 3.0).abs() < 1e-15);
    }

    #[test]
    fn free_weights_bypass_encoding() {
        let mask = MonotonicityMask::new(vec![true, false]).unwrap();
        let m = model(Variant::Mm, GroupShape::uniform(1, 1).unwrap(), mask, vec![0.0, -2.5, 0.0]);
        assert_eq!(m.weight(0, 1), -2.5);
        assert_eq!(m.neuron_activation(&[1.0, 2.0], 0, 0).unwrap(), 1.0 - 5.0);
    }

    #[test]
    fn two_group_min_max() {
        // Group 0 computes x, group 1 computes 2x - 1.
        let m = model(
            Variant::Mm,
            GroupShape::uniform(2, 1).unwrap(),
            MonotonicityMask::all(1),
            vec![0.0, 2f64.ln(), 0.0, 1.0],
        );
        assert_eq!(m.forward_mm(&[0.0]).unwrap(), -1.0);
        assert!((m.forward_mm(&[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(m.forward_smm(&[0.0]).is_err());
    }

    #[test]
    fn single_neuron_smm_is_linear() {
        for ln_beta in [-3.0, 0.0, 4.0] {
            let m = model(
                Variant::Smm,
                GroupShape::uniform(1, 1).unwrap(),
                MonotonicityMask::all(1),
                vec![0.5, 0.25, ln_beta],
            );
            let x = 0.7;
            let expected = 0.5f64.exp() * x - 0.25;
            assert!((m.forward_smm(&[x]).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn encodings_are_nonnegative() {
        for enc in [WeightEncoding::Exponential, WeightEncoding::Squared, WeightEncoding::ExpLinear] {
            for i in -200..=200 {
                let z = i as f64 * 0.37;
                assert!(enc.decode(z) >= 0.0);
            }
            assert_eq!(WeightEncoding::from_name(enc.name()), Some(enc));
        }
        // ExpLinear is continuous with matching slope at zero.
        let e = WeightEncoding::ExpLinear;
        assert!((e.decode(1e-12) - e.decode(-1e-12)).abs() < 1e-11);
        assert_eq!(e.derivative(0.0), 1.0);
    }

    #[test]
    fn active_neurons_single() {
        let m = model(Variant::Mm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1), vec![0.0, 0.0]);
        let s = m.active_neuron_stats(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(s.active, 1);
        assert_eq!(s.counts, vec![3]);

        let mut rng = RngStream::new(9, 9);
        let arch = Architecture::new(Variant::Mm, GroupShape::default(), MonotonicityMask::all(1)).unwrap();
        let m = Model::init(arch, &mut rng).unwrap();
        assert_eq!(m.active_neuron_stats(&[0.3]).unwrap().active, 1);
        assert!(m.active_neuron_stats(&[]).is_err());
    }

    #[test]
    fn active_neuron_ties_go_to_lowest_index() {
        // Two identical neurons in one group.
        let m = model(
            Variant::Mm,
            GroupShape::uniform(1, 2).unwrap(),
            MonotonicityMask::all(1),
            vec![0.0, 0.0, 0.0, 0.0],
        );
        let s = m.active_neuron_stats(&[0.1, 0.9]).unwrap();
        assert_eq!(s.counts, vec![2, 0]);
    }

    #[test]
    fn smm64_zero_aux_is_sigmoid_of_smm() {
        let mask = MonotonicityMask::new(vec![true, false]).unwrap();
        let arch = Architecture::new(Variant::Smm64, GroupShape::uniform(2, 2).unwrap(), mask).unwrap();
        let mut rng = RngStream::new(1, 2);
        let mut m = Model::init(arch.clone(), &mut rng).unwrap();
        let aux = m.layout().aux.clone().unwrap();
        for i in aux.w1.start..=aux.b2 {
            m.params_mut().0[i] = 0.0;
        }
        let smm_arch = Architecture::new(Variant::Smm, arch.shape.clone(), arch.mask.clone()).unwrap();
        let smm = Model::from_params(smm_arch, ModelParams(m.params().0[..aux.w1.start].to_vec())).unwrap();
        let x = [0.4, 0.8];
        let expected = sigmoid(smm.forward_smm(&x).unwrap());
        assert!((m.forward_smm64(&x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn probes_find_no_violations_in_random_models() {
        let mut rng = RngStream::new(8, 1);
        for variant in [Variant::Mm, Variant::Smm, Variant::Smm64] {
            let mask = MonotonicityMask::new(vec![true, false, true]).unwrap();
            let arch = Architecture::new(variant, GroupShape::default(), mask).unwrap();
            let m = Model::init(arch, &mut rng).unwrap();
            assert_eq!(m.monotonicity_violations(500, &mut rng), 0);
        }
    }
}
