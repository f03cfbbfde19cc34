//! Posterior and likelihood checked against a dense Gaussian-elimination solve.

use dynbo_core::gp::{gp_predict, log_marginal_likelihood, Dataset, GpModel, KernelParams};
use dynbo_core::mogp::{predict_mt, MogpModel, MultiTaskKernel};
use dynbo_core::rng::seeded;
use rand::Rng;

/// Solves `a·x = b` and returns `(x, ln|det a|)`, partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        log_det += a[c][c].abs().ln();
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    (x, log_det)
}

fn k(x: &[f64], y: &[f64], p: &KernelParams) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    p.gamma * (-d2 / (p.ell * p.ell)).exp()
}

struct Case {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    params: KernelParams,
}

fn random_case(seed: u64) -> Case {
    let mut rng = seeded(seed);
    let n = rng.gen_range(1..=3);
    let count = rng.gen_range(2..=8);
    let xs: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
    let ys = (0..count).map(|_| rng.gen_range(-50.0..50.0)).collect();
    let params = KernelParams::new(rng.gen_range(0.5..20.0), rng.gen_range(1.0..6.0)).unwrap();
    Case { xs, ys, params }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn posterior_and_likelihood_match_dense_solve() {
    let jitter = 1e-6;
    for seed in 0..20 {
        let c = random_case(seed);
        let data = Dataset::from_points(1, c.xs.clone(), c.ys.clone(), false).unwrap();
        let offset = c.ys.iter().sum::<f64>() / c.ys.len() as f64;
        let model = GpModel::with_params(data.clone(), c.params, jitter, offset).unwrap();
        assert_eq!(model.jitter(), jitter);

        let kmat: Vec<Vec<f64>> = c
            .xs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                c.xs.iter()
                    .enumerate()
                    .map(|(j, b)| k(a, b, &c.params) + if i == j { jitter * c.params.gamma } else { 0.0 })
                    .collect()
            })
            .collect();
        let centered: Vec<f64> = c.ys.iter().map(|y| y - offset).collect();
        let (alpha, _) = dense_solve(kmat.clone(), centered);

        let mut rng = seeded(1000 + seed);
        for _ in 0..5 {
            let z: Vec<f64> = (0..c.xs[0].len()).map(|_| rng.gen_range(0.0..10.0)).collect();
            let ks: Vec<f64> = c.xs.iter().map(|x| k(&z, x, &c.params)).collect();
            let mean = offset + ks.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
            let (v, _) = dense_solve(kmat.clone(), ks.clone());
            let var = c.params.gamma - ks.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let p = gp_predict(&model, &z).unwrap();
            assert!(rel(p.mean, mean) < 1e-8, "seed {seed}: mean {} vs {}", p.mean, mean);
            assert!((p.variance - var.max(0.0)).abs() < 1e-8 * c.params.gamma, "seed {seed}: var {} vs {}", p.variance, var);
        }

        let (raw_alpha, log_det) = dense_solve(kmat, c.ys.clone());
        let fit: f64 = raw_alpha.iter().zip(&c.ys).map(|(a, b)| a * b).sum();
        let lml = -0.5 * fit - 0.5 * log_det - 0.5 * c.ys.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        let got = log_marginal_likelihood(&data, &c.params, jitter).unwrap();
        assert!(rel(got.value, lml) < 1e-8, "seed {seed}: lml {} vs {}", got.value, lml);
    }
}

#[test]
fn interpolates_training_targets() {
    let c = random_case(7);
    let data = Dataset::from_points(1, c.xs.clone(), c.ys.clone(), false).unwrap();
    let model = GpModel::with_params(data, c.params, 1e-10, 0.0).unwrap();
    for (x, y) in c.xs.iter().zip(&c.ys) {
        let p = gp_predict(&model, x).unwrap();
        assert!((p.mean - y).abs() < 1e-4 * (1.0 + y.abs()));
        assert!(p.variance < 1e-6 * c.params.gamma);
    }
}

#[test]
fn single_task_mogp_is_the_gp() {
    for seed in 0..5 {
        let c = random_case(50 + seed);
        let data = Dataset::from_points(1, c.xs.clone(), c.ys.clone(), false).unwrap();
        let gp = GpModel::with_params(data.clone(), c.params, 1e-6, 1.5).unwrap();
        let kernel = MultiTaskKernel::hmogp(vec![c.params]).unwrap();
        let mt = MogpModel::with_params(vec![data], kernel, 1e-6, 1.5).unwrap();
        let n = c.xs[0].len();
        for i in 0..100 {
            let z = vec![i as f64 / 10.0; n];
            let a = gp_predict(&gp, &z).unwrap();
            let b = predict_mt(&mt, &z, 1).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-10 * (1.0 + a.mean.abs()));
            assert!((a.variance - b.variance).abs() < 1e-10 * c.params.gamma);
        }
    }
}

#[test]
fn rejects_mismatched_query() {
    let c = random_case(3);
    let data = Dataset::from_points(1, c.xs.clone(), c.ys, false).unwrap();
    let model = GpModel::with_params(data, c.params, 1e-6, 0.0).unwrap();
    let wrong = vec![0.0; c.xs[0].len() + 1];
    assert!(gp_predict(&model, &wrong).is_err());
}
