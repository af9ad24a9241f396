//! Full-batch training: Rprop updates, stopping rules and the fit loop.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::grad::backward;
use crate::model::{Architecture, Model};
use crate::numerics::RngStream;
use crate::{Dataset, Error, Result};

/// Rprop constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta0: 0.0125,
            delta_min: 1e-9,
            delta_max: 50.0,
        }
    }
}

impl RpropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_minus > 0.0 && self.eta_minus < 1.0 && self.eta_plus > 1.0) {
            return Err(Error::contract("rprop needs 0 < eta_minus < 1 < eta_plus"));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta0 && self.delta0 <= self.delta_max) {
            return Err(Error::contract("rprop needs 0 < delta_min <= delta0 <= delta_max"));
        }
        Ok(())
    }
}

/// Per-parameter state of Rprop without weight backtracking (Rprop-).
#[derive(Clone, Debug, PartialEq)]
pub struct RpropState {
    pub config: RpropConfig,
    pub step_sizes: Vec<f64>,
    pub prev_signs: Vec<i8>,
}

fn sign(g: f64) -> i8 {
    if g > 0.0 {
        1
    } else if g < 0.0 {
        -1
    } else {
        0
    }
}

impl RpropState {
    pub fn new(len: usize, config: RpropConfig) -> Result<Self> {
        config.validate()?;
        Ok(RpropState {
            config,
            step_sizes: vec![config.delta0; len],
            prev_signs: vec![0; len],
        })
    }

    /// One update in place. On a sign change the step shrinks and the stored
    /// sign is cleared, so the following step neither grows nor shrinks.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() || grad.len() != self.step_sizes.len() {
            return Err(Error::contract("rprop shapes do not match"));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::contract("rprop gradient is not finite"));
        }
        let c = self.config;
        for i in 0..grad.len() {
            let s = sign(grad[i]);
            let agreement = s * self.prev_signs[i];
            let delta = &mut self.step_sizes[i];
            if agreement > 0 {
                *delta = (*delta * c.eta_plus).min(c.delta_max);
                self.prev_signs[i] = s;
            } else if agreement < 0 {
                *delta = (*delta * c.eta_minus).max(c.delta_min);
                self.prev_signs[i] = 0;
            } else {
                self.prev_signs[i] = s;
            }
            params[i] -= f64::from(s) * *delta;
        }
        Ok(())
    }
}

/// Functional form of [`RpropState::step`].
pub fn rprop_step(params: &[f64], grad: &[f64], state: &RpropState) -> Result<(Vec<f64>, RpropState)> {
    let mut p = params.to_vec();
    let mut s = state.clone();
    s.step(&mut p, grad)?;
    Ok((p, s))
}

/// Training progress over a strip of the last `k` training errors:
/// `1000 * (sum E / (k * min E) - 1)`.
pub fn progress(history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::contract("progress needs a nonempty strip"));
    }
    if history.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::contract("progress needs positive training errors"));
    }
    let sum: f64 = history.iter().sum();
    let min = history.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(1e3 * (sum / (history.len() as f64 * min) - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop once the progress over the last `strip` epochs drops below `tau`.
    ProgressStrip { strip: usize, tau: f64, max_epochs: usize },
    /// Keep the parameters with the lowest validation error; stop after
    /// `patience` epochs without improvement.
    Validation { patience: usize, max_epochs: usize },
}

impl StopRule {
    pub const DEFAULT_PROGRESS_MAX_EPOCHS: usize = 10_000;
    pub const DEFAULT_VALIDATION_MAX_EPOCHS: usize = 5_000;

    pub fn progress_default() -> Self {
        StopRule::ProgressStrip {
            strip: 5,
            tau: 1e-3,
            max_epochs: Self::DEFAULT_PROGRESS_MAX_EPOCHS,
        }
    }

    pub fn validation_default() -> Self {
        StopRule::Validation {
            patience: 100,
            max_epochs: Self::DEFAULT_VALIDATION_MAX_EPOCHS,
        }
    }

    pub fn max_epochs(&self) -> usize {
        match *self {
            StopRule::ProgressStrip { max_epochs, .. } | StopRule::Validation { max_epochs, .. } => max_epochs,
        }
    }

    pub fn needs_validation(&self) -> bool {
        matches!(self, StopRule::Validation { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StopRule::ProgressStrip { strip, tau, max_epochs } => {
                if strip == 0 || !(tau > 0.0) || max_epochs == 0 {
                    return Err(Error::contract("progress rule needs strip >= 1, tau > 0, max_epochs >= 1"));
                }
            }
            StopRule::Validation { patience, max_epochs } => {
                if patience == 0 || max_epochs == 0 {
                    return Err(Error::contract("validation rule needs patience >= 1 and max_epochs >= 1"));
                }
            }
        }
        Ok(())
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self::progress_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub stop: StopRule,
    pub rprop: RpropConfig,
    /// Seed and stream for parameter initialization.
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stop: StopRule::default(),
            rprop: RpropConfig::default(),
            seed: 0,
            stream_id: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Progress,
    Patience,
    MaxEpochs,
    ExactFit,
    Diverged,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Progress => "progress",
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::ExactFit => "exact_fit",
            StopReason::Diverged => "diverged",
        }
    }
}

/// Errors of the parameters at the start of an epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub stopped: Option<StopReason>,
    /// Epoch whose parameters were returned.
    pub selected_epoch: usize,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.rows.len()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn selected(&self) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.epoch == self.selected_epoch)
    }
}

/// Initialize a model from `config`'s seed and train it.
pub fn fit(arch: Architecture, train: &Dataset, val: Option<&Dataset>, config: &TrainConfig) -> Result<(Model, TrainTrace)> {
    let mut rng = RngStream::new(config.seed, config.stream_id);
    let model = Model::init(arch, &mut rng)?;
    fit_from(model, train, val, config)
}

/// Train starting from the given parameters.
///
/// Each epoch records the errors of the current parameters, evaluates the
/// stopping rule and, if training continues, applies one Rprop update. With
/// the progress rule the returned parameters are those of the last recorded
/// epoch; with the validation rule they are those with the lowest validation
/// error (earliest on ties).
pub fn fit_from(mut model: Model, train: &Dataset, val: Option<&Dataset>, config: &TrainConfig) -> Result<(Model, TrainTrace)> {
    config.stop.validate()?;
    if train.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    if config.stop.needs_validation() != val.is_some() {
        return Err(Error::contract("a validation set is required exactly when the validation rule is used"));
    }
    if let Some(v) = val {
        if v.is_empty() {
            return Err(Error::contract("validation set is empty"));
        }
    }
    let mut rprop = RpropState::new(model.params().len(), config.rprop)?;
    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, usize, Model)> = None;
    let max_epochs = config.stop.max_epochs();

    for epoch in 1..=max_epochs {
        let (train_mse, grad) = match backward(&model, train) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(diverged(epoch, trace)),
            Err(e) => return Err(e),
        };
        let val_mse = match val {
            Some(v) => Some(model.mse(v)?),
            None => None,
        };
        if !train_mse.is_finite() || val_mse.is_some_and(|v| !v.is_finite()) {
            return Err(diverged(epoch, trace));
        }
        trace.rows.push(TraceRow {
            epoch,
            train_mse,
            val_mse,
            beta: model.beta(),
        });

        let mut stop = None;
        match config.stop {
            StopRule::ProgressStrip { strip, tau, .. } => {
                trace.selected_epoch = epoch;
                if train_mse == 0.0 {
                    stop = Some(StopReason::ExactFit);
                } else if trace.rows.len() >= strip {
                    let window: Vec<f64> = trace.rows[trace.rows.len() - strip..].iter().map(|r| r.train_mse).collect();
                    if window.iter().all(|&e| e > 0.0) && progress(&window)? < tau {
                        stop = Some(StopReason::Progress);
                    }
                }
            }
            StopRule::Validation { patience, .. } => {
                let v = val_mse.unwrap_or(f64::INFINITY);
                if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                    best = Some((v, epoch, model.clone()));
                }
                let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
                if epoch - best_epoch >= patience {
                    stop = Some(StopReason::Patience);
                } else if train_mse == 0.0 {
                    stop = Some(StopReason::ExactFit);
                }
            }
        }
        if stop.is_none() && epoch == max_epochs {
            stop = Some(StopReason::MaxEpochs);
        }
        if let Some(reason) = stop {
            trace.stopped = Some(reason);
            break;
        }
        rprop.step(model.params_mut().as_mut_slice(), grad.as_slice())?;
    }

    if let Some((_, epoch, m)) = best {
        trace.selected_epoch = epoch;
        model = m;
    }
    debug_assert!(model.constrained_weights_nonnegative());
    Ok((model, trace))
}

fn diverged(epoch: usize, mut trace: TrainTrace) -> Error {
    trace.stopped = Some(StopReason::Diverged);
    Error::Diverged {
        epoch,
        trace: Box::new(trace),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::model::{GroupShape, MonotonicityMask, Variant};

    #[test]
    fn zero_gradient_is_a_no_op() {
        let state = RpropState::new(3, RpropConfig::default()).unwrap();
        let (p, s) = rprop_step(&[1.0, 2.0, 3.0], &[0.0; 3], &state).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.step_sizes, state.step_sizes);
    }

    #[test]
    fn sign_flip_shrinks_by_eta_minus() {
        let mut s = RpropState::new(1, RpropConfig::default()).unwrap();
        let mut p = [0.0];
        s.step(&mut p, &[1.0]).unwrap();
        let before = s.step_sizes[0];
        s.step(&mut p, &[-1.0]).unwrap();
        assert_eq!(s.step_sizes[0], before * 0.5);
        assert_eq!(s.prev_signs[0], 0);
        // After a cleared sign the step size is left alone.
        s.step(&mut p, &[-1.0]).unwrap();
        assert_eq!(s.step_sizes[0], before * 0.5);
        s.step(&mut p, &[-1.0]).unwrap();
        assert_eq!(s.step_sizes[0], before * 0.5 * 1.2);
    }

    #[test]
    fn quadratic_converges() {
        // Oracle: the scalar recurrence itself, loss (p - 3)^2.
        let mut s = RpropState::new(1, RpropConfig::default()).unwrap();
        let mut p = [0.0];
        let mut last_loss = 9.0;
        let mut overshot = false;
        let mut converged_at = None;
        for t in 0..200 {
            let g = 2.0 * (p[0] - 3.0);
            s.step(&mut p, &[g]).unwrap();
            let loss = (p[0] - 3.0) * (p[0] - 3.0);
            if p[0] > 3.0 {
                overshot = true;
            }
            if !overshot {
                assert!(loss < last_loss);
            }
            last_loss = loss;
            if converged_at.is_none() && (p[0] - 3.0).abs() < 1e-3 {
                converged_at = Some(t);
            }
        }
        assert!(converged_at.is_some());
        assert!((p[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn progress_values() {
        assert_eq!(progress(&[0.3; 5]).unwrap(), 0.0);
        assert!((progress(&[2.0, 2.0, 2.0, 2.0, 1.0]).unwrap() - 800.0).abs() < 1e-9);
        assert!(progress(&[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() > 0.0);
        assert!(progress(&[1.0, 0.0]).is_err());
        assert!(progress(&[]).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = RpropConfig {
            eta_minus: 1.5,
            ..RpropConfig::default()
        };
        assert!(RpropState::new(1, bad).is_err());
        assert!(StopRule::ProgressStrip { strip: 0, tau: 1e-3, max_epochs: 10 }.validate().is_err());
        assert!(StopRule::Validation { patience: 0, max_epochs: 10 }.validate().is_err());
    }

    fn linear_data() -> Dataset {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 0.1).collect();
        Dataset::new(1, xs, ys, Provenance::Derived { from: "linear".into() }).unwrap()
    }

    #[test]
    fn fits_realizable_linear_target() {
        let arch = Architecture::new(Variant::Smm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1)).unwrap();
        let data = linear_data();
        let (model, trace) = fit(arch, &data, None, &TrainConfig::default()).unwrap();
        assert!(trace.last().unwrap().train_mse < 1e-8);
        assert_eq!(model.mse(&data).unwrap(), trace.last().unwrap().train_mse);
    }

    #[test]
    fn fit_is_deterministic() {
        let arch = Architecture::new(Variant::Smm, GroupShape::uniform(2, 2).unwrap(), MonotonicityMask::all(1)).unwrap();
        let data = linear_data();
        let config = TrainConfig {
            stop: StopRule::ProgressStrip { strip: 5, tau: 1e-3, max_epochs: 300 },
            seed: 42,
            ..TrainConfig::default()
        };
        let a = fit(arch.clone(), &data, None, &config).unwrap();
        let b = fit(arch, &data, None, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rule_returns_best_epoch() {
        let arch = Architecture::new(Variant::Smm, GroupShape::uniform(2, 2).unwrap(), MonotonicityMask::all(1)).unwrap();
        let data = linear_data();
        let val = data.subset(&[1, 5, 9, 13]);
        let config = TrainConfig {
            stop: StopRule::Validation { patience: 20, max_epochs: 400 },
            seed: 1,
            ..TrainConfig::default()
        };
        let (model, trace) = fit(arch.clone(), &data, Some(&val), &config).unwrap();
        let min = trace.rows.iter().filter_map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(trace.selected().unwrap().val_mse, Some(min));
        assert_eq!(model.mse(&val).unwrap(), min);
        assert!(fit(arch, &data, None, &config).is_err());
    }

    #[test]
    fn progress_rule_respects_max_epochs() {
        let arch = Architecture::new(Variant::Mm, GroupShape::default(), MonotonicityMask::all(1)).unwrap();
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let data = Dataset::new(1, xs, ys, Provenance::Derived { from: "sq".into() }).unwrap();
        let config = TrainConfig {
            stop: StopRule::ProgressStrip { strip: 5, tau: 1e-12, max_epochs: 50 },
            ..TrainConfig::default()
        };
        let (_, trace) = fit(arch, &data, None, &config).unwrap();
        assert!(trace.epochs() <= 50);
        assert!(trace.stopped.is_some());
    }
}
