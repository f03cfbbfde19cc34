//! Projected quasi-Newton ascent with backtracking, shared by hyperparameter
//! fitting, posterior-mean optimum extraction and acquisition local search.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentSettings {
    pub max_iter: usize,
    /// Stop once the projected gradient's ∞-norm falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted move is shorter than this (Euclidean).
    pub min_step: f64,
    /// Largest coordinate displacement of the very first trial move.
    pub initial_move: f64,
    /// Stop once an iteration gains at most `f_tol · max(1, |f|)`.
    pub f_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    /// Projected gradient ∞-norm at `x`.
    pub pg_norm: f64,
}

/// Gradient components that would push `x` out of the box are dropped.
pub fn projected_grad(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            if (xi <= lo[i] && gi < 0.0) || (xi >= hi[i] && gi > 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Number of curvature pairs kept by [`maximize`].
const MEMORY: usize = 10;

/// L-BFGS direction `H·g` restricted to the free coordinates.
fn lbfgs_direction(g: &[f64], free: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(free).map(|(gi, f)| if *f { *gi } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for (qi, f) in q.iter_mut().zip(free) {
        if !f {
            *qi = 0.0;
        }
    }
    q
}

/// Maximizes `f` over the box `[lo, hi]` starting from `x0` by projected
/// L-BFGS with backtracking along the projected path.
///
/// `f` returns `(value, gradient)` or `None` where the objective is undefined;
/// undefined trial points are treated as failed line-search steps. Returns
/// `None` only when `f(x0)` itself is undefined. The returned value is never
/// below `f(proj(x0))`.
pub fn maximize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &AscentSettings) -> Option<AscentResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let project = |x: &mut [f64]| {
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut pg_norm = inf_norm(&projected_grad(&x, &g, lo, hi));
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;

    while iterations < cfg.max_iter && pg_norm > cfg.grad_tol {
        let free: Vec<bool> =
            (0..x.len()).map(|i| !((x[i] <= lo[i] && g[i] < 0.0) || (x[i] >= hi[i] && g[i] > 0.0))).collect();
        let mut dir = lbfgs_direction(&g, &free, &memory);
        if memory.is_empty() || dot(&g, &dir) <= 0.0 {
            memory.clear();
            let scale = cfg.initial_move / pg_norm.max(1e-300);
            dir = g.iter().zip(&free).map(|(gi, f)| if *f { gi * scale } else { 0.0 }).collect();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial);
            let d: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if libm::sqrt(dot(&d, &d)) <= cfg.min_step {
                break;
            }
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft >= fx + 1e-4 * dot(&g, &d) {
                    accepted = Some((trial, d, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, d, fxn, gn)) = accepted else { break };
        iterations += 1;
        let moved = libm::sqrt(dot(&d, &d));
        let gain = fxn - fx;
        let y: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let sy = dot(&d, &y);
        if sy > 1e-12 * libm::sqrt(dot(&d, &d) * dot(&y, &y)) {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((d, y, 1.0 / sy));
        }
        x = xn;
        fx = fxn;
        g = gn;
        pg_norm = inf_norm(&projected_grad(&x, &g, lo, hi));
        if moved <= cfg.min_step || gain <= cfg.f_tol * fx.abs().max(1.0) {
            break;
        }
    }
    Some(AscentResult { x, value: fx, grad: g, iterations, pg_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg() -> AscentSettings {
        AscentSettings { max_iter: 500, grad_tol: 1e-10, min_step: 0.0, initial_move: 0.5, f_tol: 0.0 }
    }

    #[test]
    fn concave_quadratic() {
        let f = |x: &[f64]| Some((-(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 2.0).powi(2), vec![-2.0 * (x[0] - 1.0), -6.0 * (x[1] + 2.0)]));
        let r = maximize(f, &[5.0, 5.0], &[-10.0, -10.0], &[10.0, 10.0], &cfg()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn stops_on_active_bound() {
        let f = |x: &[f64]| Some((x[0], vec![1.0]));
        let r = maximize(f, &[0.0], &[0.0], &[2.0], &cfg()).unwrap();
        assert_eq!(r.x, vec![2.0]);
        assert_eq!(r.pg_norm, 0.0);
    }
}
