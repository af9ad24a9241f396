//! Reverse-mode gradients of the mean squared error.
//!
//! Derivatives are written out per architecture rather than taped. For the
//! smooth variants the chain is
//!
//! ```text
//! dy/da_kj   = p_k * q_kj        p = softmax(-beta g),  q_k = softmax(beta a_k.)
//! dy/dln_beta = (sum_k p_k g_k - y) + sum_k p_k (sum_j q_kj a_kj - g_k)
//! ```
//!
//! and for the hard variant the gradient flows through the selected neuron
//! only, with the same lowest-index tie rule as the forward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Model, Scratch, Variant};
use crate::{Dataset, Error, Result};

/// `d(MSE)/d(param)` in flat parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradVector(pub Vec<f64>);

impl GradVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `(1/n) sum_i (f(x_i) - y_i)^2`.
pub fn mse_loss(model: &Model, data: &Dataset) -> Result<f64> {
    model.mse(data)
}

/// Loss and its exact gradient over the full batch.
pub fn backward(model: &Model, data: &Dataset) -> Result<(f64, GradVector)> {
    if data.is_empty() {
        return Err(Error::contract("gradient of an empty dataset"));
    }
    if data.dim() != model.dim() {
        return Err(Error::contract("dataset dimension does not match model"));
    }
    let layout = model.layout().clone();
    let arch = model.arch();
    let shape = &arch.shape;
    let mask = arch.mask.flags();
    let d = layout.dim;
    let params = model.params().as_slice();
    let beta = model.beta();

    let mut scratch: Scratch = model.prepared();
    let mut grad = vec![0.0; layout.len];
    // Sums of dL/da_n * x_m over the batch, feature-major like the decoded
    // weights; the encoding's chain factor is constant over the batch and
    // applied at the end.
    let neurons = layout.neurons;
    let mut weight_sums = vec![0.0; neurons * d];
    let mut sens = vec![0.0; neurons];
    let mut bias_sums = vec![0.0; layout.neurons];
    let scale = 2.0 / data.len() as f64;
    let mut loss = 0.0;

    for (x, target) in data.rows() {
        model.activations(x, &mut scratch);
        let (y, selected, d_ln_beta) = match beta {
            Some(beta) if arch.variant.is_smooth() => {
                let y = model.smooth_min_max(&mut scratch, beta);
                let mut through_groups = 0.0;
                let mut through_output = -y;
                let mut start = 0;
                for (k, &h) in shape.sizes().iter().enumerate() {
                    let g = scratch.groups[k];
                    let pk = scratch.group_weights[k];
                    through_output += pk * g;
                    let q = &mut scratch.neuron_weights[start..start + h];
                    let a = &scratch.activations[start..start + h];
                    let mut mean_a = 0.0;
                    for (qi, ai) in q.iter_mut().zip(a) {
                        mean_a += *qi * ai;
                        // Becomes dy/da for this neuron.
                        *qi *= pk;
                    }
                    through_groups += pk * (mean_a - g);
                    start += h;
                }
                (y, None, through_output + through_groups)
            }
            _ => {
                let (y, _, n) = model.min_max(&scratch.activations);
                (y, Some(n), 0.0)
            }
        };

        let out = if arch.variant == Variant::Smm64 {
            crate::numerics::sigmoid(y)
        } else {
            y
        };
        let residual = out - target;
        loss += residual * residual;
        let mut d_y = scale * residual;
        if arch.variant == Variant::Smm64 {
            d_y *= out * (1.0 - out);
        }

        match selected {
            Some(n) => {
                for (m, &xm) in x.iter().enumerate() {
                    weight_sums[m * neurons + n] += d_y * xm;
                }
                bias_sums[n] += d_y;
            }
            None => {
                for ((e, &s), bs) in sens.iter_mut().zip(&scratch.neuron_weights).zip(bias_sums.iter_mut()) {
                    *e = d_y * s;
                    *bs += *e;
                }
                for (row, &xm) in weight_sums.chunks_exact_mut(neurons).zip(x) {
                    for (r, &e) in row.iter_mut().zip(&sens) {
                        *r += e * xm;
                    }
                }
            }
        }
        if let Some(i) = layout.ln_beta {
            grad[i] += d_y * d_ln_beta;
        }
        if let Some(aux) = &layout.aux {
            // Every activation carries phi once and the sensitivities sum to
            // one, so dL/dphi = dL/dy.
            let d_phi = d_y;
            let act = arch.aux_activation;
            for h in 0..aux.hidden {
                let hv = scratch.hidden[h];
                grad[aux.w2.start + h] += d_phi * hv;
                let d_pre = d_phi * params[aux.w2.start + h] * act.derivative_from_output(hv);
                let row = aux.w1.start + h * aux.inputs;
                for (i, &u) in scratch.free_inputs.iter().enumerate() {
                    grad[row + i] += d_pre * u;
                }
                grad[aux.b1.start + h] += d_pre;
            }
            grad[aux.b2] += d_phi;
        }
    }

    for (i, g) in grad[layout.z.clone()].iter_mut().enumerate() {
        let (n, m) = (i / d, i % d);
        let s = weight_sums[m * neurons + n];
        *g = if mask[m] { s * arch.encoding.derivative(params[i]) } else { s };
    }
    for (g, s) in grad[layout.b.clone()].iter_mut().zip(&bias_sums) {
        *g = -s;
    }

    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            block: layout.block_of(i),
        });
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite { block: "loss" });
    }
    Ok((loss / data.len() as f64, GradVector(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::model::{Architecture, GroupShape, ModelParams, MonotonicityMask};
    use crate::numerics::RngStream;

    fn dataset(dim: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Dataset {
        Dataset::new(dim, inputs, targets, Provenance::Derived { from: "test".into() }).unwrap()
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        // K=1, h=1: y = exp(0) x - 0 = x.
        let arch = Architecture::new(Variant::Smm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1)).unwrap();
        let model = Model::from_params(arch, ModelParams(vec![0.0, 0.0, 0.3])).unwrap();
        let data = dataset(1, vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]);
        let (loss, grad) = backward(&model, &data).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.0.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_target_fit() {
        // w = exp(-inf) is not representable; use b with tiny weight instead:
        // a K=1,h=1 MM net at x=0 gives -b regardless of the weight.
        let arch = Architecture::new(Variant::Mm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1)).unwrap();
        let model = Model::from_params(arch, ModelParams(vec![0.7, -0.25])).unwrap();
        let data = dataset(1, vec![0.0, 0.0], vec![0.25, 0.25]);
        let (loss, grad) = backward(&model, &data).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.0, vec![0.0, 0.0]);
    }

    #[test]
    fn two_point_linear_quadratic() {
        // y(x) = e^z x - b; data (0, 1), (1, 2); with z = 0: residuals (-b-1, -b-1).
        let arch = Architecture::new(Variant::Mm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1)).unwrap();
        let b = 0.5;
        let model = Model::from_params(arch, ModelParams(vec![0.0, b])).unwrap();
        let data = dataset(1, vec![0.0, 1.0], vec![1.0, 2.0]);
        let (loss, grad) = backward(&model, &data).unwrap();
        let r = -b - 1.0;
        assert!((loss - r * r).abs() < 1e-15);
        // dL/dz = (1/2) * 2 r * x * e^z summed -> r ; dL/db = -(2/2)(r + r) = -2r
        assert!((grad.0[0] - r).abs() < 1e-15);
        assert!((grad.0[1] + 2.0 * r).abs() < 1e-15);
    }

    #[test]
    fn gradient_length_and_determinism() {
        let mask = MonotonicityMask::new(vec![true, false, true]).unwrap();
        let arch = Architecture::new(Variant::Smm64, GroupShape::default(), mask).unwrap();
        let mut rng = RngStream::new(4, 4);
        let model = Model::init(arch, &mut rng).unwrap();
        let inputs: Vec<f64> = (0..30).map(|_| rng.uniform()).collect();
        let targets: Vec<f64> = (0..10).map(|_| rng.uniform()).collect();
        let data = dataset(3, inputs, targets);
        let (l1, g1) = backward(&model, &data).unwrap();
        let (l2, g2) = backward(&model, &data).unwrap();
        assert_eq!(g1.len(), model.arch().param_count());
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert!(g1.0.iter().zip(&g2.0).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!((l1 - mse_loss(&model, &data).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let arch = Architecture::new(Variant::Smm, GroupShape::default(), MonotonicityMask::all(1)).unwrap();
        let model = Model::init(arch, &mut RngStream::new(0, 0)).unwrap();
        let data = dataset(1, vec![], vec![]);
        assert!(backward(&model, &data).is_err());
        assert!(mse_loss(&model, &data).is_err());
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let arch = Architecture::new(Variant::Smm, GroupShape::uniform(1, 1).unwrap(), MonotonicityMask::all(1)).unwrap();
        let model = Model::from_params(arch, ModelParams(vec![800.0, 0.0, 0.0])).unwrap();
        let data = dataset(1, vec![1.0], vec![0.0]);
        match backward(&model, &data) {
            Err(Error::NonFinite { block }) => assert!(block == "z" || block == "loss" || block == "b"),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }
}
