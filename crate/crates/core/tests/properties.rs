use dynbo_core::benchmarks::{mpb_advance, mpb_eval, mpb_init, true_optimum, MpbSettings, PeakShape};
use dynbo_core::design::lhs_sample;
use dynbo_core::gp::{gp_predict, Dataset, GpModel, KernelParams};
use dynbo_core::metrics::{a12, error_metrics, rho_c, rho_t, sign_test, wilcoxon_signed_rank, EffectSize};
use dynbo_core::mogp::{mt_kernel_eval, MultiTaskKernel};
use dynbo_core::optimizer::{Evaluation, RunRecord, StepRecord};
use dynbo_core::rng::seeded;
use dynbo_core::warm::{diversity_filter, LocalOptimum};
use dynbo_core::Bounds;
use proptest::prelude::*;

fn step(ys: &[f64], optimum: f64) -> StepRecord {
    let mut best = f64::NEG_INFINITY;
    let evaluations = ys
        .iter()
        .map(|&y| {
            best = best.max(y);
            Evaluation { x: vec![y], y, best_y: best }
        })
        .collect();
    StepRecord { t: 1, evaluations, incumbent: vec![best], incumbent_y: best, optimum: (vec![0.0], optimum), sources: vec![], wallclock_secs: 0.0 }
}

fn record(steps: Vec<StepRecord>) -> RunRecord {
    RunRecord { seed: 0, algorithm: "a".into(), steps, events: vec![] }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn posterior_variance_within_prior(
        xs in prop::collection::vec(0.0f64..10.0, 2..8),
        z in 0.0f64..10.0,
        gamma in 0.1f64..10.0,
        ell in 0.5f64..5.0,
    ) {
        let mut pts: Vec<f64> = xs;
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let ys: Vec<f64> = pts.iter().map(|x| x.sin()).collect();
        let data = Dataset::from_points(1, pts.iter().map(|x| vec![*x]).collect(), ys, false).unwrap();
        let m = GpModel::with_params(data, KernelParams::new(gamma, ell).unwrap(), 1e-6, 0.0).unwrap();
        let p = gp_predict(&m, &[z]).unwrap();
        prop_assert!(p.variance >= 0.0 && p.variance <= gamma * (1.0 + 1e-9));
    }

    #[test]
    fn lhs_stratifies_every_dimension(count in 1usize..30, n in 1usize..4, seed in any::<u64>()) {
        let b = Bounds::uniform(n, -5.0, 5.0).unwrap();
        let pts = lhs_sample(count, &b, &mut seeded(seed));
        prop_assert_eq!(pts.len(), count);
        for d in 0..n {
            let mut seen = vec![false; count];
            for p in &pts {
                let s = (((p[d] + 5.0) / 10.0 * count as f64) as usize).min(count - 1);
                prop_assert!(!seen[s]);
                seen[s] = true;
            }
        }
    }

    #[test]
    fn advance_preserves_ranges(seed in any::<u64>(), h in 0.0f64..20.0, s in 0.0f64..30.0, steps in 1usize..20) {
        let b = Bounds::uniform(2, 0.0, 100.0).unwrap();
        let settings = MpbSettings::with_severities(h, s);
        let mut rng = seeded(seed);
        let mut st = mpb_init(4, PeakShape::Gaussian, &b, &settings, &mut rng).unwrap();
        for _ in 0..steps {
            st = mpb_advance(&st, &mut rng);
        }
        for p in &st.peaks {
            prop_assert!(b.contains(&p.center));
            prop_assert!((30.0..=70.0).contains(&p.height) && (1.0..=12.0).contains(&p.width));
        }
        let (x, f) = true_optimum(&st);
        prop_assert_eq!(mpb_eval(&st, &x).unwrap(), f);
    }

    #[test]
    fn hmogp_kernel_symmetric_and_prefix(
        x in prop::collection::vec(0.0f64..1.0, 2),
        y in prop::collection::vec(0.0f64..1.0, 2),
        t in 1usize..5,
        u in 1usize..5,
    ) {
        let kernels: Vec<KernelParams> = (0..4).map(|i| KernelParams::new(1.0 + i as f64, 0.5).unwrap()).collect();
        let k = MultiTaskKernel::hmogp(kernels.clone()).unwrap();
        let a = mt_kernel_eval((&x, t), (&y, u), &k).unwrap();
        prop_assert_eq!(a, mt_kernel_eval((&y, u), (&x, t), &k).unwrap());
        let d2: f64 = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum();
        let prefix: f64 = kernels[..t.min(u)].iter().map(|p| p.gamma * (-d2 / 0.25).exp()).sum();
        prop_assert!((a - prefix).abs() <= 1e-12 * prefix.max(1.0));
    }

    #[test]
    fn diversity_filter_output(
        xs in prop::collection::vec(0.0f64..1.0, 0..30),
        sigma in 1usize..8,
        eps in 0.0f64..0.3,
    ) {
        let cands: Vec<LocalOptimum> = xs.iter().enumerate().map(|(i, x)| LocalOptimum { x: vec![*x], value: -(i as f64) }).collect();
        let kept = diversity_filter(&cands, sigma, eps);
        prop_assert!(kept.len() <= sigma);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!((a.x[0] - b.x[0]).abs() >= eps);
            }
        }
    }

    #[test]
    fn error_metrics_invariants(
        steps in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 5), 1..6),
    ) {
        // equal per-step budgets
        let r = record(steps.iter().map(|ys| step(ys, 10.0)).collect());
        let m = error_metrics(&r, &r.optima()).unwrap();
        prop_assert!(m.eps_t >= 0.0 && m.eps_f >= 0.0);
        prop_assert!(m.eps_t <= m.eps_f + 1e-12);
        for traj in &m.loss_trajectory {
            for w in traj.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
        prop_assert_eq!(rho_t(&r, &r).unwrap(), 1.0);
        let rc = rho_c(&[&r]).unwrap();
        prop_assert_eq!(rc, vec![1.0]);
    }

    #[test]
    fn test_statistics_ranges(
        pairs in prop::collection::vec((0u8..6, 0u8..6), 1..40),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let p = wilcoxon_signed_rank(&a, &b).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(p, wilcoxon_signed_rank(&b, &a).unwrap());
        let s = sign_test(&a, &b).unwrap();
        prop_assert!(s.p_value > 0.0 && s.p_value <= 1.0);
        let v = a12(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let m = v.max(1.0 - v);
        let expected = if m < 0.56 { EffectSize::Equal } else if m < 0.64 { EffectSize::Small } else if m < 0.71 { EffectSize::Medium } else { EffectSize::Large };
        prop_assert_eq!(EffectSize::from_a12(v), expected);
    }
}
