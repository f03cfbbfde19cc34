//! Analytic gradients against central finite differences.

use dynbo_core::acquisition::{ucb, ucb_grad};
use dynbo_core::gp::{gp_predict, log_marginal_likelihood, posterior_mean_grad, rbf_eval, rbf_grad_x, Dataset, GpModel, KernelParams};
use dynbo_core::mogp::{MogpModel, MultiTaskKernel};
use dynbo_core::rng::{seeded, StdRng};
use rand::Rng;

const H: f64 = 1e-5;

fn central(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += H;
            b[i] -= H;
            (f(&a) - f(&b)) / (2.0 * H)
        })
        .collect()
}

fn assert_close(analytic: &[f64], fd: &[f64], what: &str) {
    let scale = analytic.iter().chain(fd).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-10);
    for (a, b) in analytic.iter().zip(fd) {
        assert!((a - b).abs() <= 1e-4 * scale, "{what}: {analytic:?} vs {fd:?}");
    }
}

fn point(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..10.0)).collect()
}

fn model(rng: &mut StdRng) -> GpModel {
    let n = rng.gen_range(1..=3);
    let count = rng.gen_range(3..=8);
    let xs: Vec<Vec<f64>> = (0..count).map(|_| point(rng, n)).collect();
    let ys: Vec<f64> = (0..count).map(|_| rng.gen_range(-20.0..20.0)).collect();
    let params = KernelParams::new(rng.gen_range(1.0..10.0), rng.gen_range(1.5..5.0)).unwrap();
    GpModel::with_params(Dataset::from_points(1, xs, ys, false).unwrap(), params, 1e-6, 0.5).unwrap()
}

#[test]
fn kernel_gradient() {
    let mut rng = seeded(1);
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let p = KernelParams::new(rng.gen_range(0.1..10.0), rng.gen_range(0.5..5.0)).unwrap();
        let (x, y) = (point(&mut rng, n), point(&mut rng, n));
        let fd = central(|z| rbf_eval(z, &y, &p).unwrap(), &x);
        assert_close(&rbf_grad_x(&x, &y, &p).unwrap(), &fd, "kernel");
    }
}

#[test]
fn posterior_mean_gradient() {
    let mut rng = seeded(2);
    for _ in 0..50 {
        let m = model(&mut rng);
        let z = point(&mut rng, m.data().dim());
        let fd = central(|q| gp_predict(&m, q).unwrap().mean, &z);
        assert_close(&posterior_mean_grad(&m, &z).unwrap(), &fd, "posterior mean");
    }
}

#[test]
fn likelihood_gradient_in_log_space() {
    let mut rng = seeded(3);
    for _ in 0..50 {
        let m = model(&mut rng);
        let p = *m.params();
        let theta = [p.gamma.ln(), p.ell.ln()];
        let f = |th: &[f64]| {
            let q = KernelParams::new(th[0].exp(), th[1].exp()).unwrap();
            log_marginal_likelihood(m.data(), &q, 1e-6).unwrap().value
        };
        let got = log_marginal_likelihood(m.data(), &p, 1e-6).unwrap();
        assert_close(&got.grad, &central(f, &theta), "likelihood");
    }
}

#[test]
fn ucb_gradient() {
    let mut rng = seeded(4);
    for _ in 0..50 {
        let m = model(&mut rng);
        let z = point(&mut rng, m.data().dim());
        let omega = rng.gen_range(0.0..3.0);
        let fd = central(|q| ucb(&m, q, omega), &z);
        assert_close(&ucb_grad(&m, &z, omega), &fd, "ucb");
    }
}

#[test]
fn multi_task_ucb_gradient() {
    let mut rng = seeded(5);
    for _ in 0..20 {
        let tasks: Vec<Dataset> = (1..=3)
            .map(|t| {
                let xs: Vec<Vec<f64>> = (0..4).map(|_| point(&mut rng, 2)).collect();
                let ys = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
                Dataset::from_points(t, xs, ys, t < 3).unwrap()
            })
            .collect();
        let kernels: Vec<KernelParams> = (0..3).map(|_| KernelParams::new(rng.gen_range(0.5..3.0), rng.gen_range(1.5..4.0)).unwrap()).collect();
        let coeffs: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        for kernel in [MultiTaskKernel::hmogp(kernels.clone()).unwrap(), MultiTaskKernel::lmc(kernels.clone(), coeffs, 2).unwrap()] {
            let m = MogpModel::with_params(tasks.clone(), kernel, 1e-6, 0.0).unwrap();
            let z = point(&mut rng, 2);
            let fd = central(|q| ucb(&m, q, 2.0), &z);
            assert_close(&ucb_grad(&m, &z, 2.0), &fd, "multi-task ucb");
        }
    }
}
