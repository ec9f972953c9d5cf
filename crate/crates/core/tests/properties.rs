use proptest::prelude::*;

use cgmpinn::balancing::{softmax_weights, BalancerConfig, BalancerState};
use cgmpinn::curriculum::{
    bound_constants, component_difficulty, curriculum_component_weights, normalize_difficulty, normalize_unit_mean,
    sample_weights, tau, CurriculumConfig, Variant,
};
use cgmpinn::gmm::{fit_gmm_with_report, log_likelihood, responsibilities, GmmConfig, GmmModel};

fn model_strategy() -> impl Strategy<Value = GmmModel> {
    (1usize..6).prop_flat_map(|k| {
        (
            prop::collection::vec(0.05f64..1.0, k),
            prop::collection::vec(-20.0f64..20.0, k),
            prop::collection::vec(-6.0f64..3.0, k),
        )
            .prop_map(|(w, means, log_var)| {
                let total: f64 = w.iter().sum();
                GmmModel {
                    weights: w.iter().map(|x| x / total).collect(),
                    means,
                    variances: log_var.iter().map(|e| 10f64.powf(*e)).collect(),
                    reg_covar: 1e-6,
                }
            })
    })
}

fn residuals() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, 8..120), -3.0f64..3.0)
        .prop_map(|(r, e)| r.iter().map(|x| x * 10f64.powf(e)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn responsibilities_are_row_stochastic(model in model_strategy(), xs in residuals()) {
        let g = responsibilities(&model, &xs);
        for i in 0..g.n() {
            let row = g.row(i);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn em_never_lowers_likelihood(xs in residuals(), k in 1usize..5, seed in 0u64..1000) {
        let cfg = GmmConfig { k, ..GmmConfig::default() };
        let (model, report) = fit_gmm_with_report(&xs, &cfg, seed).unwrap();
        for w in report.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
        prop_assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(model.variances.iter().all(|&v| v >= cfg.reg_covar));
        prop_assert!(log_likelihood(&model, &xs).is_finite());
    }

    #[test]
    fn sample_weights_have_unit_mean_and_stay_banded(
        model in model_strategy(),
        xs in residuals(),
        beta in 0.1f64..5.0,
        t in 0.0f64..=1.0,
    ) {
        let cfg = CurriculumConfig { beta, ..CurriculumConfig::default() };
        let g = responsibilities(&model, &xs);
        let d = normalize_difficulty(&component_difficulty(&xs, &g, cfg.eps), cfg.eps);
        prop_assert!(d.iter().all(|&v| (0.0..1.0).contains(&v) || v == 0.0));
        let w_comp = curriculum_component_weights(&d, &model.variances, t, &cfg);
        let w = sample_weights(Some(&g), &w_comp, &xs, t, &cfg);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-6);
        let (lo, hi) = bound_constants(beta, cfg.eps, xs.len(), model.var_min(), model.var_max());
        prop_assert!(w.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }

    #[test]
    fn unit_mean_normalization(raw in prop::collection::vec(1e-3f64..1e3, 1..200)) {
        let w = normalize_unit_mean(&raw, 1e-8);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tau_is_monotone_and_saturates(k_max in 1usize..10_000, c_sat in 0.01f64..=1.0, a in 0usize..20_000, b in 0usize..20_000) {
        let cfg = CurriculumConfig { k_max, c_sat, ..CurriculumConfig::default() };
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(tau(lo, &cfg) <= tau(hi, &cfg));
        prop_assert!((0.0..=1.0).contains(&tau(a, &cfg)));
        prop_assert_eq!(tau(k_max, &cfg), 1.0);
    }

    #[test]
    fn uniform_variant_is_exactly_one(xs in residuals(), t in 0.0f64..=1.0) {
        let cfg = CurriculumConfig { variant: Variant::Uniform, ..CurriculumConfig::default() };
        prop_assert!(sample_weights(None, &[], &xs, t, &cfg).iter().all(|&w| w == 1.0));
    }

    #[test]
    fn softmax_sums_to_term_count(ratios in prop::collection::vec(0.0f64..50.0, 1..6), log_kappa in -2.0f64..2.0) {
        let l = softmax_weights(&ratios, 10f64.powf(log_kappa));
        prop_assert!((l.iter().sum::<f64>() - ratios.len() as f64).abs() < 1e-9);
        prop_assert!(l.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn raising_one_ratio_raises_its_lambda(ratios in prop::collection::vec(0.0f64..5.0, 2..5), bump in 0.01f64..2.0) {
        let base = softmax_weights(&ratios, 0.5);
        let mut up = ratios.clone();
        up[0] += bump;
        prop_assert!(softmax_weights(&up, 0.5)[0] > base[0]);
    }

    #[test]
    fn disabled_balancer_emits_ones(losses in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 3), 1..20)) {
        let mut b = BalancerState::new(BalancerConfig { enabled: false, ..BalancerConfig::default() }, 1);
        for l in &losses {
            b.update_ema(l).unwrap();
            prop_assert_eq!(b.compute_lambdas(l), vec![1.0; 3]);
        }
    }

    #[test]
    fn balancer_is_deterministic(losses in prop::collection::vec(prop::collection::vec(1e-3f64..10.0, 2), 1..40), seed in 0u64..100) {
        let cfg = BalancerConfig { enabled: true, rho: 0.5, ..BalancerConfig::default() };
        let mut a = BalancerState::new(cfg, seed);
        let mut b = BalancerState::new(cfg, seed);
        for l in &losses {
            a.update_ema(l).unwrap();
            b.update_ema(l).unwrap();
            let la = a.compute_lambdas(l);
            prop_assert_eq!(&la, &b.compute_lambdas(l));
            prop_assert!((la.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        }
    }
}
