//! UCB acquisition and its maximization by differential evolution with an
//! adaptive number of local gradient-ascent refinements per generation.

use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::Bounds;
use crate::design::lhs_sample;
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::optim::{maximize, AscentSettings};
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AcqOptimizerKind {
    /// DE generations with local ascent on the top-κ candidates.
    #[default]
    Hybrid,
    /// Plain DE/rand/1/bin with elitist truncation.
    DeOnly,
    /// Gradient ascent from every initial population member.
    AscentOnly,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AcqConfig {
    /// UCB exploration weight ω.
    pub omega: f64,
    pub pop_size: usize,
    /// DE scale factor.
    pub f: f64,
    /// DE crossover rate.
    pub cr: f64,
    pub kappa_init: usize,
    /// Closeness threshold for κ adaptation, in unit-cube coordinates.
    pub eps_d: f64,
    pub generations: usize,
    pub local_iters: usize,
    /// Local ascent stops on moves shorter than `local_step_tol · R`.
    pub local_step_tol: f64,
}

impl Default for AcqConfig {
    fn default() -> Self {
        Self {
            omega: 2.0,
            pop_size: 30,
            f: 0.5,
            cr: 0.9,
            kappa_init: 5,
            eps_d: 0.01,
            generations: 50,
            local_iters: 20,
            local_step_tol: 1e-6,
        }
    }
}

impl AcqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::InvalidInput("DE population needs at least 4 members".into()));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::InvalidInput("crossover rate must lie in [0, 1]".into()));
        }
        if self.kappa_init < 1 || self.kappa_init > 2 * self.pop_size {
            return Err(Error::InvalidInput("kappa_init must lie in [1, 2 * pop_size]".into()));
        }
        if self.omega < 0.0 || !self.omega.is_finite() {
            return Err(Error::InvalidInput("omega must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// `μ(z) + ω·σ(z)`.
pub fn ucb<S: Surrogate + ?Sized>(model: &S, z: &[f64], omega: f64) -> f64 {
    let p = model.predict(z);
    p.mean + omega * libm::sqrt(p.variance)
}

/// UCB value and gradient `∇μ + ω·∇σ²/(2·max(σ, 1e-8))`.
pub fn ucb_with_grad<S: Surrogate + ?Sized>(model: &S, z: &[f64], omega: f64) -> (f64, Vec<f64>) {
    let p = model.predict_grad(z);
    let sd = libm::sqrt(p.variance);
    let denom = 2.0 * sd.max(1e-8);
    let g = p.mean_grad.iter().zip(&p.variance_grad).map(|(m, v)| m + omega * v / denom).collect();
    (p.mean + omega * sd, g)
}

pub fn ucb_grad<S: Surrogate + ?Sized>(model: &S, z: &[f64], omega: f64) -> Vec<f64> {
    ucb_with_grad(model, z, omega).1
}

/// One DE/rand/1/bin generation: `v = x_r1 + F(x_r2 − x_r3)` with distinct
/// `r1, r2, r3` different from the parent, binomial crossover with a forced
/// coordinate, clamped to the box.
pub fn de_step<R: Rng + ?Sized>(population: &[Vec<f64>], f: f64, cr: f64, bounds: &Bounds, rng: &mut R) -> Vec<Vec<f64>> {
    let np = population.len();
    assert!(np >= 4, "DE/rand/1 needs at least 4 members");
    let n = bounds.dim();
    population
        .iter()
        .enumerate()
        .map(|(i, parent)| {
            let mut pick = |taken: &[usize]| loop {
                let r = rng.gen_range(0..np);
                if r != i && !taken.contains(&r) {
                    return r;
                }
            };
            let r1 = pick(&[]);
            let r2 = pick(&[r1]);
            let r3 = pick(&[r1, r2]);
            let j_rand = rng.gen_range(0..n);
            let mut trial: Vec<f64> = (0..n)
                .map(|j| {
                    if j == j_rand || rng.gen::<f64>() < cr {
                        population[r1][j] + f * (population[r2][j] - population[r3][j])
                    } else {
                        parent[j]
                    }
                })
                .collect();
            bounds.clamp_in_place(&mut trial);
            trial
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAscentSettings {
    pub max_iter: usize,
    /// Absolute minimum move length.
    pub min_step: f64,
}

/// Projected gradient ascent with backtracking; never returns a point worse
/// than the start.
pub fn local_ascent<F>(x0: &[f64], mut objective_and_grad: F, bounds: &Bounds, cfg: &LocalAscentSettings) -> Vec<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let settings = AscentSettings {
        max_iter: cfg.max_iter,
        grad_tol: 0.0,
        min_step: cfg.min_step,
        initial_move: 0.05 * bounds.max_range(),
        f_tol: 0.0,
    };
    maximize(
        |x| {
            let (v, g) = objective_and_grad(x);
            v.is_finite().then_some((v, g))
        },
        x0,
        bounds.lower(),
        bounds.upper(),
        &settings,
    )
    .map(|r| r.x)
    .unwrap_or_else(|| x0.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcqResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// κ at the end of each generation (hybrid optimizer only).
    pub kappa_trace: Vec<usize>,
    /// Best UCB in the population after each generation.
    pub best_trace: Vec<f64>,
}

fn truncate_best(pool: &mut Vec<(Vec<f64>, f64)>, keep: usize) {
    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
    pool.truncate(keep);
}

/// Maximizes UCB over the box with the chosen optimizer and returns the best
/// member of the final population.
pub fn optimize_acquisition<S: Surrogate + ?Sized, R: Rng + ?Sized>(
    model: &S,
    bounds: &Bounds,
    cfg: &AcqConfig,
    kind: AcqOptimizerKind,
    rng: &mut R,
) -> Result<AcqResult> {
    cfg.validate()?;
    let omega = cfg.omega;
    let np = cfg.pop_size;
    let local = LocalAscentSettings { max_iter: cfg.local_iters, min_step: cfg.local_step_tol * bounds.max_range() };
    let objective = |z: &[f64]| ucb_with_grad(model, z, omega);
    let mut pop: Vec<(Vec<f64>, f64)> = lhs_sample(np, bounds, rng)
        .into_iter()
        .map(|x| {
            let v = ucb(model, &x, omega);
            (x, v)
        })
        .collect();
    let mut kappa_trace = Vec::new();
    let mut best_trace = Vec::new();

    match kind {
        AcqOptimizerKind::AscentOnly => {
            let long = LocalAscentSettings { max_iter: cfg.local_iters * cfg.generations.max(1), ..local };
            if cfg.generations > 0 {
                for member in pop.iter_mut() {
                    let x = local_ascent(&member.0, objective, bounds, &long);
                    let v = ucb(model, &x, omega);
                    if v >= member.1 {
                        *member = (x, v);
                    }
                }
            }
        }
        AcqOptimizerKind::DeOnly | AcqOptimizerKind::Hybrid => {
            let mut kappa = cfg.kappa_init;
            for _ in 0..cfg.generations {
                let parents: Vec<Vec<f64>> = pop.iter().map(|p| p.0.clone()).collect();
                let offspring = de_step(&parents, cfg.f, cfg.cr, bounds, rng);
                let mut merged = core::mem::take(&mut pop);
                merged.extend(offspring.into_iter().map(|x| {
                    let v = ucb(model, &x, omega);
                    (x, v)
                }));
                if kind == AcqOptimizerKind::Hybrid {
                    merged.sort_by(|a, b| b.1.total_cmp(&a.1));
                    let archive = kappa.min(merged.len());
                    for member in merged.iter_mut().take(archive) {
                        let x = local_ascent(&member.0, objective, bounds, &local);
                        let moved = dist(&bounds.normalize(&x), &bounds.normalize(&member.0));
                        let v = ucb(model, &x, omega);
                        if v >= member.1 {
                            *member = (x, v);
                        }
                        kappa = if moved < cfg.eps_d { kappa.saturating_sub(1).max(1) } else { (kappa + 1).min(2 * np) };
                    }
                    kappa_trace.push(kappa);
                }
                truncate_best(&mut merged, np);
                pop = merged;
                best_trace.push(pop[0].1);
            }
        }
    }
    let best = pop.iter().fold(&pop[0], |b, p| if p.1 > b.1 { p } else { b });
    Ok(AcqResult { x: best.0.clone(), value: best.1, kappa_trace, best_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, GpModel, KernelParams};
    use crate::rng::seeded;
    use alloc::vec;

    fn model() -> GpModel {
        let d = Dataset::from_points(1, vec![vec![1.0], vec![3.0], vec![6.0]], vec![2.0, 4.0, 1.0], false).unwrap();
        GpModel::with_params(d, KernelParams::new(4.0, 1.5).unwrap(), 1e-6, 0.0).unwrap()
    }

    #[test]
    fn ucb_reduces_to_mean() {
        let m = model();
        let p = m.predict(&[2.2]);
        assert_eq!(ucb(&m, &[2.2], 0.0), p.mean);
        let g = ucb_grad(&m, &[2.2], 0.0);
        assert_eq!(g, crate::gp::posterior_mean_grad(&m, &[2.2]).unwrap());
        assert!((ucb(&m, &[3.0], 2.0) - 4.0).abs() < 1e-2);
        assert!(ucb_grad(&m, &[3.0], 2.0).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn de_f_zero_copies_donor() {
        let b = Bounds::uniform(2, 0.0, 10.0).unwrap();
        let pop: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 9.0 - i as f64]).collect();
        let trials = de_step(&pop, 0.0, 1.0, &b, &mut seeded(3));
        for (i, t) in trials.iter().enumerate() {
            assert!(pop.iter().enumerate().any(|(j, p)| j != i && p == t));
        }
    }

    #[test]
    fn de_cr_zero_changes_one_coordinate() {
        let b = Bounds::uniform(4, -100.0, 100.0).unwrap();
        let mut rng = seeded(8);
        let pop: Vec<Vec<f64>> = (0..8).map(|_| (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect()).collect();
        for (p, t) in pop.iter().zip(de_step(&pop, 0.7, 0.0, &b, &mut rng)) {
            assert_eq!(p.iter().zip(&t).filter(|(a, b)| a != b).count(), 1);
        }
    }

    #[test]
    fn local_ascent_quadratic() {
        let b = Bounds::uniform(1, -5.0, 5.0).unwrap();
        let cfg = LocalAscentSettings { max_iter: 20, min_step: 1e-5 };
        let f = |x: &[f64]| (-(x[0] - 1.0).powi(2), vec![-2.0 * (x[0] - 1.0)]);
        let x = local_ascent(&[0.0], f, &b, &cfg);
        assert!((x[0] - 1.0).abs() < 1e-4);
        assert_eq!(local_ascent(&[1.0], f, &b, &cfg), vec![1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(AcqConfig { pop_size: 3, ..AcqConfig::default() }.validate().is_err());
        assert!(AcqConfig { cr: 1.5, ..AcqConfig::default() }.validate().is_err());
        assert!(AcqConfig { kappa_init: 61, ..AcqConfig::default() }.validate().is_err());
        assert!(AcqConfig::default().validate().is_ok());
    }
}
