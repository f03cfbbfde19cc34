//! Warm-start initialization: local optima of earlier posterior means become
//! pseudo-labelled datasets for the new time step, at no evaluation cost.

use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::Bounds;
use crate::error::Result;
use crate::gp::{Dataset, GpModel};
use crate::linalg::dist;
use crate::optim::{maximize, AscentSettings};
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WarmStartConfig {
    /// Pseudo samples kept per source.
    pub sigma: usize,
    /// Minimum distance between kept samples; `None` means `1e-2 · R`.
    pub eps_l: Option<f64>,
    /// Random ascent starts per decision dimension, on top of the training inputs.
    pub random_starts_per_dim: usize,
    pub max_iter: usize,
    /// Convergence needs `‖∇μ‖∞ ≤ grad_tol_scale · γ / R`.
    pub grad_tol_scale: f64,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self { sigma: 5, eps_l: None, random_starts_per_dim: 10, max_iter: 500, grad_tol_scale: 1e-5 }
    }
}

impl WarmStartConfig {
    pub fn diversity_threshold(&self, bounds: &Bounds) -> f64 {
        self.eps_l.unwrap_or(1e-2 * bounds.max_range())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptimum {
    pub x: Vec<f64>,
    /// Posterior mean at `x`.
    pub value: f64,
}

/// Local maxima of the posterior mean, sorted by value (best first).
///
/// Projected gradient ascent runs from every training input, from the center
/// of each of the `2n` box faces and from `random_starts_per_dim · n` uniform
/// points. The face starts catch maxima pinned to the boundary, whose basins
/// are often too thin for the random starts. Converged points on the box
/// boundary count when only the outward gradient component is large. Points
/// within `eps_l` of a better optimum are dropped.
pub fn extract_local_optima<R: Rng + ?Sized>(
    model: &GpModel,
    bounds: &Bounds,
    cfg: &WarmStartConfig,
    rng: &mut R,
) -> Vec<LocalOptimum> {
    let n = bounds.dim();
    let range = bounds.max_range();
    let tol = cfg.grad_tol_scale * model.params().gamma / range;
    let settings = AscentSettings { max_iter: cfg.max_iter, grad_tol: tol, min_step: 0.0, initial_move: 0.05 * range, f_tol: 0.0 };
    let mut starts: Vec<Vec<f64>> = model.data().observations().iter().map(|o| o.x.clone()).collect();
    let center: Vec<f64> = (0..n).map(|d| 0.5 * (bounds.lower()[d] + bounds.upper()[d])).collect();
    for d in 0..n {
        for edge in [bounds.lower()[d], bounds.upper()[d]] {
            let mut s = center.clone();
            s[d] = edge;
            starts.push(s);
        }
    }
    for _ in 0..cfg.random_starts_per_dim * n {
        starts.push((0..n).map(|d| rng.gen_range(bounds.lower()[d]..=bounds.upper()[d])).collect());
    }
    let mut found = Vec::new();
    for s in &starts {
        let Some(r) = maximize(|z| Some(model.mean_with_grad(z)), s, bounds.lower(), bounds.upper(), &settings) else {
            continue;
        };
        if r.pg_norm <= tol {
            let value = model.predict(&r.x).mean;
            found.push(LocalOptimum { x: r.x, value });
        }
    }
    found.sort_by(|a, b| b.value.total_cmp(&a.value));
    diversity_filter(&found, usize::MAX, cfg.diversity_threshold(bounds))
}

/// Greedy scan in the given (value-descending) order keeping a candidate only
/// when it is at least `eps_l` from every kept point; stops at `sigma` kept.
pub fn diversity_filter(candidates: &[LocalOptimum], sigma: usize, eps_l: f64) -> Vec<LocalOptimum> {
    let mut kept: Vec<LocalOptimum> = Vec::new();
    for c in candidates {
        if kept.len() >= sigma {
            break;
        }
        if kept.iter().all(|k| dist(&k.x, &c.x) >= eps_l) {
            kept.push(c.clone());
        }
    }
    kept
}

/// Pseudo-labelled dataset per source model, tagged with the source's time
/// step. Sources whose posterior mean yields no converged optimum contribute
/// nothing. No objective evaluations are made.
pub fn build_augmented<R: Rng + ?Sized>(
    sources: &[&GpModel],
    bounds: &Bounds,
    cfg: &WarmStartConfig,
    rng: &mut R,
) -> Result<Vec<Dataset>> {
    let eps = cfg.diversity_threshold(bounds);
    let mut out = Vec::with_capacity(sources.len());
    for m in sources {
        let optima = extract_local_optima(m, bounds, cfg, rng);
        let kept = diversity_filter(&optima, cfg.sigma, eps);
        if kept.is_empty() {
            continue;
        }
        let (xs, ys) = kept.into_iter().map(|o| (o.x, o.value)).unzip();
        out.push(Dataset::from_points(m.data().t(), xs, ys, true)?);
    }
    Ok(out)
}
