//! Grid oracles for posterior-mean optimum extraction and UCB maximization.

use dynbo_core::acquisition::{optimize_acquisition, ucb, AcqConfig, AcqOptimizerKind};
use dynbo_core::gp::{gp_predict, Dataset, GpModel, KernelParams};
use dynbo_core::rng::seeded;
use dynbo_core::warm::{build_augmented, diversity_filter, extract_local_optima, LocalOptimum, WarmStartConfig};
use dynbo_core::Bounds;
use rand::Rng;

const GRID: usize = 10001;

/// A 1-D GP on [0, 10] whose posterior mean has (at least) two humps.
fn bimodal(seed: u64) -> GpModel {
    let mut rng = seeded(seed);
    let a = rng.gen_range(1.5..3.5);
    let b = rng.gen_range(6.5..8.5);
    let ha = rng.gen_range(2.0..4.0);
    let hb = rng.gen_range(2.0..4.0);
    let f = |x: f64| ha * (-(x - a) * (x - a)).exp() + hb * (-(x - b) * (x - b)).exp();
    let xs: Vec<Vec<f64>> = (0..9).map(|i| vec![0.5 + i as f64 * 1.1 + rng.gen_range(-0.2..0.2)]).collect();
    let ys = xs.iter().map(|x| f(x[0])).collect();
    let params = KernelParams::new(rng.gen_range(1.0..3.0), rng.gen_range(0.9..1.3)).unwrap();
    GpModel::with_params(Dataset::from_points(1, xs, ys, false).unwrap(), params, 1e-6, 0.0).unwrap()
}

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..GRID).map(move |i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64)
}

fn grid_local_maxima(m: &GpModel) -> Vec<f64> {
    let xs: Vec<f64> = grid(0.0, 10.0).collect();
    let mu: Vec<f64> = xs.iter().map(|x| gp_predict(m, &[*x]).unwrap().mean).collect();
    (0..GRID)
        .filter(|&i| {
            let left = i == 0 || mu[i] > mu[i - 1];
            let right = i == GRID - 1 || mu[i] >= mu[i + 1];
            left && right
        })
        .map(|i| xs[i])
        .collect()
}

#[test]
fn recovers_every_grid_local_maximum() {
    let bounds = Bounds::uniform(1, 0.0, 10.0).unwrap();
    let cfg = WarmStartConfig::default();
    let eps = cfg.diversity_threshold(&bounds);
    assert_eq!(eps, 0.1);
    for seed in 0..10 {
        let m = bimodal(seed);
        let oracle = grid_local_maxima(&m);
        assert!(oracle.len() >= 2, "seed {seed} not bimodal: {oracle:?}");
        let found = extract_local_optima(&m, &bounds, &cfg, &mut seeded(seed));
        for x in &oracle {
            assert!(found.iter().any(|o| (o.x[0] - x).abs() <= 0.05 * 10.0), "seed {seed}: missed {x}, got {found:?}");
        }
        for w in found.windows(2) {
            assert!(w[0].value >= w[1].value);
        }
        for (i, a) in found.iter().enumerate() {
            for b in &found[i + 1..] {
                assert!((a.x[0] - b.x[0]).abs() >= eps);
            }
        }
        let pseudo = build_augmented(&[&m], &bounds, &cfg, &mut seeded(seed)).unwrap();
        assert_eq!(pseudo.len(), 1);
        assert!(pseudo[0].is_pseudo() && pseudo[0].len() <= cfg.sigma);
        for o in pseudo[0].observations() {
            assert!((gp_predict(&m, &o.x).unwrap().mean - o.y).abs() < 1e-12);
        }
    }
}

#[test]
fn diversity_filter_is_greedy_by_value() {
    let c = |x: f64, v: f64| LocalOptimum { x: vec![x], value: v };
    let cands = [c(0.0, 9.0), c(0.05, 8.0), c(0.5, 7.0), c(0.52, 6.0), c(3.0, 5.0)];
    let kept = diversity_filter(&cands, 5, 0.1);
    assert_eq!(kept.iter().map(|o| o.x[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 3.0]);
    assert_eq!(diversity_filter(&cands, 2, 0.1).len(), 2);
}

fn acquisition_model(seed: u64) -> GpModel {
    let mut rng = seeded(seed);
    let count = rng.gen_range(3..=8);
    let xs: Vec<Vec<f64>> = (0..count).map(|_| vec![rng.gen_range(0.0..10.0)]).collect();
    let ys = (0..count).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let params = KernelParams::new(rng.gen_range(0.5..4.0), rng.gen_range(0.3..2.0)).unwrap();
    GpModel::with_params(Dataset::from_points(1, xs, ys, false).unwrap(), params, 1e-6, 10.0).unwrap()
}

#[test]
fn hybrid_optimizer_matches_the_grid() {
    let bounds = Bounds::uniform(1, 0.0, 10.0).unwrap();
    let cfg = AcqConfig::default();
    let mut hits = 0;
    for seed in 0..20 {
        let m = acquisition_model(seed);
        let best = grid(0.0, 10.0).map(|x| ucb(&m, &[x], cfg.omega)).fold(f64::MIN, f64::max);
        let r = optimize_acquisition(&m, &bounds, &cfg, AcqOptimizerKind::Hybrid, &mut seeded(seed)).unwrap();
        assert!(bounds.contains(&r.x));
        assert!((r.value - ucb(&m, &r.x, cfg.omega)).abs() < 1e-12);
        if r.value >= best - 1e-3 * best.abs() {
            hits += 1;
        }
        for w in r.best_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn kappa_stays_in_range() {
    let bounds = Bounds::uniform(1, 0.0, 10.0).unwrap();
    let cfg = AcqConfig::default();
    let r = optimize_acquisition(&acquisition_model(3), &bounds, &cfg, AcqOptimizerKind::Hybrid, &mut seeded(3)).unwrap();
    assert_eq!(r.kappa_trace.len(), cfg.generations);
    assert!(r.kappa_trace.iter().all(|k| (1..=2 * cfg.pop_size).contains(k)));
    let de = optimize_acquisition(&acquisition_model(3), &bounds, &cfg, AcqOptimizerKind::DeOnly, &mut seeded(3)).unwrap();
    assert!(de.kappa_trace.is_empty());
}
