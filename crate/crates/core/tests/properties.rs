use proptest::prelude::*;
use smm_core::bench::{kfold_with_validation, RandomPolyTarget};
use smm_core::isotonic::{pava, pava_fit};
use smm_core::numerics::{lse_scaled, lse_scaled_neg};
use smm_core::stats::Summary;
use smm_core::train::{RpropConfig, RpropState};
use smm_core::{Architecture, AuxActivation, GroupShape, Model, ModelParams, MonotonicityMask, RngStream, Variant, WeightEncoding};

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..24)
}

fn beta() -> impl Strategy<Value = f64> {
    (-7.0..7.0f64).prop_map(f64::exp)
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Mm), Just(Variant::Smm), Just(Variant::Smm64)]
}

fn encoding() -> impl Strategy<Value = WeightEncoding> {
    prop_oneof![
        Just(WeightEncoding::Exponential),
        Just(WeightEncoding::Squared),
        Just(WeightEncoding::ExpLinear)
    ]
}

fn model(variant: Variant, encoding: WeightEncoding, groups: usize, neurons: usize, seed: u64) -> Model {
    let mask = MonotonicityMask::new(vec![true, false, true]).unwrap();
    let mut a = Architecture::new(variant, GroupShape::uniform(groups, neurons).unwrap(), mask)
        .unwrap()
        .with_encoding(encoding);
    if variant == Variant::Smm64 {
        a = a.with_aux(6, AuxActivation::Tanh).unwrap();
    }
    let mut rng = RngStream::new(seed, 0);
    let mut m = Model::init(a, &mut rng).unwrap();
    if let Some(i) = m.layout().ln_beta {
        m.params_mut().0[i] = rng.uniform_in(-2.0, 4.0);
    }
    m
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn lse_lies_between_max_and_max_plus_log_n(xs in values(), beta in beta()) {
        let v = lse_scaled(&xs, beta).unwrap();
        let m = max_of(&xs);
        let slack = 4.0 * f64::EPSILON * m.abs().max(1.0);
        prop_assert!(v >= m - slack);
        prop_assert!(v <= m + (xs.len() as f64).ln() / beta + slack);
        let w = lse_scaled_neg(&xs, beta).unwrap();
        let m = min_of(&xs);
        prop_assert!(w <= m + slack);
        prop_assert!(w >= m - (xs.len() as f64).ln() / beta - slack);
    }

    #[test]
    fn lse_ignores_order(mut xs in values(), beta in beta(), seed in any::<u64>()) {
        let v = lse_scaled(&xs, beta).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for i in (1..xs.len()).rev() {
            xs.swap(i, rng.index(i + 1));
        }
        let w = lse_scaled(&xs, beta).unwrap();
        prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn lse_is_nondecreasing_in_each_argument(xs in values(), beta in beta(), i in any::<prop::sample::Index>(), bump in 0.0..5.0f64) {
        let i = i.index(xs.len());
        let mut up = xs.clone();
        up[i] += bump;
        prop_assert!(lse_scaled(&up, beta).unwrap() >= lse_scaled(&xs, beta).unwrap());
        prop_assert!(lse_scaled_neg(&up, beta).unwrap() >= lse_scaled_neg(&xs, beta).unwrap());
    }

    #[test]
    fn output_is_monotone_in_constrained_inputs(
        variant in variant(),
        encoding in encoding(),
        seed in any::<u64>(),
        x in prop::array::uniform3(0.0..1.0f64),
        step in prop::array::uniform2(0.0..1.0f64),
    ) {
        let m = model(variant, encoding, 3, 3, seed);
        let up = [x[0] + step[0], x[1], x[2] + step[1]];
        prop_assert!(m.predict(&up).unwrap() >= m.predict(&x).unwrap());
    }

    #[test]
    fn smooth_output_is_bracketed_by_hard_min_max(
        seed in any::<u64>(),
        groups in 1usize..5,
        neurons in 1usize..5,
        x in prop::array::uniform3(0.0..1.0f64),
    ) {
        let m = model(Variant::Smm, WeightEncoding::Exponential, groups, neurons, seed);
        let beta = m.beta().unwrap();
        let hard = m.hard_min_max(&x).unwrap();
        let smooth = m.predict(&x).unwrap();
        let slack = 1e-12 * hard.abs().max(1.0);
        prop_assert!(smooth >= hard - (groups as f64).ln() / beta - slack);
        prop_assert!(smooth <= hard + (neurons as f64).ln() / beta + slack);
    }

    #[test]
    fn decoded_constrained_weights_are_nonnegative(z in prop::collection::vec(-30.0..30.0f64, 19), encoding in encoding()) {
        let mask = MonotonicityMask::new(vec![true, true, true]).unwrap();
        let a = Architecture::new(Variant::Mm, GroupShape::uniform(2, 2).unwrap(), mask).unwrap().with_encoding(encoding);
        let mut params = z;
        params.truncate(a.param_count());
        let m = Model::from_params(a, ModelParams(params)).unwrap();
        prop_assert!(m.constrained_weights_nonnegative());
    }

    #[test]
    fn rprop_moves_each_parameter_by_its_step(
        grads in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 6), 1..40),
    ) {
        let config = RpropConfig::default();
        let mut state = RpropState::new(6, config).unwrap();
        let mut params = vec![0.0; 6];
        for g in &grads {
            let before = params.clone();
            state.step(&mut params, g).unwrap();
            for i in 0..6 {
                let delta = state.step_sizes[i];
                prop_assert!((config.delta_min..=config.delta_max).contains(&delta));
                let moved = params[i] - before[i];
                if g[i] == 0.0 {
                    prop_assert_eq!(moved, 0.0);
                } else {
                    prop_assert!(moved * g[i] < 0.0);
                    prop_assert!((moved.abs() - delta).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn pava_output_is_nondecreasing_and_idempotent(ys in prop::collection::vec(-10.0..10.0f64, 1..40)) {
        let w = vec![1.0; ys.len()];
        let fit = pava(&ys, &w);
        prop_assert!(fit.windows(2).all(|p| p[0] <= p[1]));
        prop_assert_eq!(pava(&fit, &w), fit.clone());
        // Pooling preserves the total.
        let total: f64 = ys.iter().sum();
        prop_assert!((fit.iter().sum::<f64>() - total).abs() <= 1e-9 * (1.0 + total.abs()));
        // Never worse than the best constant.
        let mean = total / ys.len() as f64;
        let sse = |f: &[f64]| f.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        prop_assert!(sse(&fit) <= sse(&vec![mean; ys.len()]) + 1e-9);
    }

    #[test]
    fn isotonic_predictions_are_nondecreasing(
        points in prop::collection::vec((0.0..1.0f64, -1.0..2.0f64), 1..30),
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let fit = pava_fit(&xs, &ys, (0.0, 1.0)).unwrap();
        let sweep: Vec<f64> = (0..=200).map(|i| -0.2 + 1.4 * i as f64 / 200.0).collect();
        for w in sweep.windows(2) {
            prop_assert!(fit.predict(w[0]) <= fit.predict(w[1]));
            prop_assert!(fit.predict_linear(w[0]) <= fit.predict_linear(w[1]) + 1e-15);
        }
        prop_assert!(fit.levels.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn random_poly_is_monotone_on_unit_cube(
        dim in 1usize..5,
        seed in any::<u64>(),
        x in prop::collection::vec(0.0..1.0f64, 4),
        step in prop::collection::vec(0.0..1.0f64, 4),
    ) {
        let t = RandomPolyTarget::sample(dim, &mut RngStream::new(seed, 0)).unwrap();
        let lo = &x[..dim];
        let hi: Vec<f64> = lo.iter().zip(&step).map(|(a, s)| (a + s).min(1.0)).collect();
        let (a, b) = (t.eval(lo), t.eval(&hi));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn folds_partition_every_row(n in 10usize..200, seed in any::<u64>()) {
        let folds = kfold_with_validation(n, 5, 0.25, &mut RngStream::new(seed, 0)).unwrap();
        let mut tested = vec![0usize; n];
        for f in &folds {
            let mut seen = vec![false; n];
            for &i in f.train.iter().chain(&f.val).chain(&f.test) {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
            prop_assert!(seen.iter().all(|&s| s));
            f.test.iter().for_each(|&i| tested[i] += 1);
        }
        prop_assert!(tested.iter().all(|&c| c == 1));
    }

    #[test]
    fn quartiles_are_ordered(xs in prop::collection::vec(-1e3..1e3f64, 1..50)) {
        let s = Summary::of(&xs).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    }
}
