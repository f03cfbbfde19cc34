//! Single-output Gaussian-process regression with an isotropic RBF kernel.
//!
//! The latent function is noise free with a constant mean. A relative jitter
//! `j` enters the training covariance as `K + j·γ·I`; fitting starts at
//! `j = 1e-6` and escalates ×10 up to `1e-2` when the factorization fails.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::Bounds;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist, Cholesky};
use crate::optim::{maximize, AscentSettings};
use crate::surrogate::{Posterior, Prediction, PredictionGrad, Surrogate};

const LN_2PI: f64 = 1.8378770664093453;

/// RBF kernel hyperparameters: signal variance `gamma`, length scale `ell`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelParams {
    pub gamma: f64,
    pub ell: f64,
}

impl KernelParams {
    pub fn new(gamma: f64, ell: f64) -> Result<Self> {
        if gamma > 0.0 && ell > 0.0 && gamma.is_finite() && ell.is_finite() {
            Ok(Self { gamma, ell })
        } else {
            Err(Error::InvalidInput(format!("kernel parameters must be positive and finite, got gamma={gamma}, ell={ell}")))
        }
    }

    #[inline]
    pub(crate) fn eval_sq(&self, d2: f64) -> f64 {
        self.gamma * libm::exp(-d2 / (self.ell * self.ell))
    }
}

/// `γ·exp(−(‖x−x2‖/ℓ)²)`.
pub fn rbf_eval(x: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    check_dim(x.len(), x2.len())?;
    Ok(params.eval_sq(sq_dist(x, x2)))
}

/// `∂k(x, x2)/∂x = −(2/ℓ²)(x − x2)·k(x, x2)`.
pub fn rbf_grad_x(x: &[f64], x2: &[f64], params: &KernelParams) -> Result<Vec<f64>> {
    let k = rbf_eval(x, x2, params)?;
    let c = -2.0 / (params.ell * params.ell) * k;
    Ok(x.iter().zip(x2).map(|(a, b)| c * (a - b)).collect())
}

/// Coordinates closer than this in every dimension count as the same input.
pub const DUPLICATE_TOL: f64 = 1e-12;

pub(crate) fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(u, v)| (u - v).abs() <= DUPLICATE_TOL)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub x: Vec<f64>,
    /// Time step, starting at 1.
    pub t: usize,
    pub y: f64,
}

/// Observations collected at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    t: usize,
    observations: Vec<Observation>,
    pseudo: bool,
}

impl Dataset {
    pub fn new(t: usize, observations: Vec<Observation>, pseudo: bool) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidInput(format!("dataset for step {t} is empty")));
        }
        let mut ds = Self { t, observations: Vec::with_capacity(observations.len()), pseudo };
        for o in observations {
            if o.t != t {
                return Err(Error::InvalidInput(format!("observation tagged step {} in dataset for step {t}", o.t)));
            }
            ds.push(o.x, o.y)?;
        }
        Ok(ds)
    }

    pub fn from_points(t: usize, xs: Vec<Vec<f64>>, ys: Vec<f64>, pseudo: bool) -> Result<Self> {
        check_dim(xs.len(), ys.len())?;
        let obs = xs.into_iter().zip(ys).map(|(x, y)| Observation { x, t, y }).collect();
        Self::new(t, obs, pseudo)
    }

    /// Appends an observation; duplicates and non-finite values are rejected.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if let Some(first) = self.observations.first() {
            check_dim(first.x.len(), x.len())?;
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite observation in dataset for step {}", self.t)));
        }
        if self.contains_point(&x) {
            return Err(Error::InvalidInput(format!("duplicate input in dataset for step {}", self.t)));
        }
        self.observations.push(Observation { x, t: self.t, y });
        Ok(())
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.observations.iter().any(|o| same_point(&o.x, x))
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_pseudo(&self) -> bool {
        self.pseudo
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.observations[0].x.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.y)
    }

    /// Observation with the largest value.
    pub fn best(&self) -> &Observation {
        self.observations.iter().fold(&self.observations[0], |b, o| if o.y > b.y { o } else { b })
    }
}

/// Hyperparameter fitting settings, shared by the single- and multi-output models.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FitSettings {
    /// Number of ascent starts; the first is deterministic, the rest log-uniform.
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Relative likelihood gain below which an ascent stops early.
    pub f_tol: f64,
    /// Initial relative jitter.
    pub jitter: f64,
    pub max_jitter: f64,
    /// Subtract the sample mean of the targets before fitting.
    pub center: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { restarts: 5, max_iter: 200, grad_tol: 1e-6, f_tol: 1e-9, jitter: 1e-6, max_jitter: 1e-2, center: true }
    }
}

impl FitSettings {
    pub(crate) fn ascent(&self) -> AscentSettings {
        AscentSettings { max_iter: self.max_iter, grad_tol: self.grad_tol, min_step: 1e-10, initial_move: 0.5, f_tol: self.f_tol }
    }

    /// Jitter levels tried in order.
    pub(crate) fn jitter_ladder(&self, start: f64) -> impl Iterator<Item = f64> {
        let max = self.max_jitter;
        core::iter::successors(Some(start), |j| Some(if *j == 0.0 { 1e-6 } else { j * 10.0 }))
            .take_while(move |j| *j <= max * (1.0 + 1e-9))
    }
}

/// Population variance floored at `1e-6`; the scale of the `γ` bounds.
pub(crate) fn variance_floor(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    var.max(1e-6)
}

/// Log-space box `[ln γ, ln ℓ]` for one kernel.
pub(crate) fn log_param_box(var: f64, range: f64) -> ([f64; 2], [f64; 2]) {
    (
        [libm::log(1e-6 * var), libm::log(1e-3 * range)],
        [libm::log(1e6 * var), libm::log(10.0 * range)],
    )
}

/// Likelihood evaluation: value and gradient with respect to `(ln γ, ln ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Likelihood {
    pub value: f64,
    pub grad: [f64; 2],
    /// Relative jitter actually used.
    pub jitter: f64,
}

/// Precomputed pairwise distances for repeated likelihood evaluation.
struct LikelihoodSurface<'a> {
    n: usize,
    d2: Vec<f64>,
    y: &'a [f64],
}

impl<'a> LikelihoodSurface<'a> {
    fn new(xs: &[&[f64]], y: &'a [f64]) -> Self {
        let n = xs.len();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = sq_dist(xs[i], xs[j]);
                d2[i * n + j] = d;
                d2[j * n + i] = d;
            }
        }
        Self { n, d2, y }
    }

    fn covariance(&self, p: &KernelParams, jitter: f64) -> Vec<f64> {
        let n = self.n;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = p.eval_sq(self.d2[i * n + j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
            k[i * n + i] = p.gamma * (1.0 + jitter);
        }
        k
    }

    fn eval(&self, p: &KernelParams, jitter: f64) -> Option<(f64, [f64; 2])> {
        let n = self.n;
        let k = self.covariance(p, jitter);
        let chol = Cholesky::factor(&k, n)?;
        let alpha = chol.solve(self.y);
        let fit: f64 = alpha.iter().zip(self.y).map(|(a, y)| a * y).sum();
        let value = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
        let kinv = chol.inverse();
        // grad_j = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ_j)
        let inv_ell2 = 1.0 / (p.ell * p.ell);
        let (mut g_gamma, mut g_ell) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = alpha[i] * alpha[j] - kinv[i * n + j];
                let kij = k[i * n + j];
                g_gamma += w * kij;
                g_ell += w * kij * 2.0 * self.d2[i * n + j] * inv_ell2;
            }
        }
        if !value.is_finite() {
            return None;
        }
        Some((value, [0.5 * g_gamma, 0.5 * g_ell]))
    }
}

/// Log marginal likelihood `−½fᵀK⁻¹f − ½log|K| − (N/2)log 2π` of the raw
/// targets, with `K` including `jitter·γ` on the diagonal. The jitter is
/// escalated on factorization failure.
pub fn log_marginal_likelihood(data: &Dataset, params: &KernelParams, jitter: f64) -> Result<Likelihood> {
    let xs: Vec<&[f64]> = data.observations.iter().map(|o| o.x.as_slice()).collect();
    let ys: Vec<f64> = data.ys().collect();
    let surface = LikelihoodSurface::new(&xs, &ys);
    let settings = FitSettings::default();
    for j in settings.jitter_ladder(jitter) {
        if let Some((value, grad)) = surface.eval(params, j) {
            return Ok(Likelihood { value, grad, jitter: j });
        }
    }
    Err(Error::Numerical(format!(
        "covariance of dataset for step {} ({} observations) is not positive definite",
        data.t,
        data.len()
    )))
}

/// A fitted single-output GP. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    data: Dataset,
    params: KernelParams,
    jitter: f64,
    posterior: Posterior,
    log_likelihood: f64,
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `data`. `mean_offset` is
    /// the constant prior mean.
    pub fn with_params(data: Dataset, params: KernelParams, jitter: f64, mean_offset: f64) -> Result<Self> {
        let ys: Vec<f64> = data.ys().map(|y| y - mean_offset).collect();
        let xs: Vec<&[f64]> = data.observations.iter().map(|o| o.x.as_slice()).collect();
        let surface = LikelihoodSurface::new(&xs, &ys);
        let settings = FitSettings::default();
        for j in settings.jitter_ladder(jitter) {
            let k = surface.covariance(&params, j);
            if let Some(chol) = Cholesky::factor(&k, data.len()) {
                let posterior = Posterior::new(chol, &ys, mean_offset);
                let fit: f64 = posterior.alpha.iter().zip(&ys).map(|(a, y)| a * y).sum();
                let log_likelihood =
                    -0.5 * fit - 0.5 * posterior.chol.log_det() - 0.5 * data.len() as f64 * LN_2PI;
                return Ok(Self { data, params, jitter: j, posterior, log_likelihood });
            }
        }
        Err(Error::Numerical(format!(
            "covariance of dataset for step {} ({} observations) is not positive definite",
            data.t,
            data.len()
        )))
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn mean_offset(&self) -> f64 {
        self.posterior.offset
    }

    /// Log marginal likelihood of the (centered) targets at the fitted parameters.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Lower Cholesky factor of the training covariance, row-major.
    pub fn cholesky_factor(&self) -> &[f64] {
        self.posterior.chol.factor_matrix()
    }

    /// Weight vector `K⁻¹ (y − offset)`.
    pub fn alpha(&self) -> &[f64] {
        &self.posterior.alpha
    }

    /// Posterior mean and its gradient, skipping the variance.
    pub fn mean_with_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let c = -2.0 / (self.params.ell * self.params.ell);
        let mut mean = self.posterior.offset;
        let mut g = vec![0.0; z.len()];
        for (o, a) in self.data.observations.iter().zip(&self.posterior.alpha) {
            let k = self.params.eval_sq(sq_dist(z, &o.x));
            mean += a * k;
            for d in 0..z.len() {
                g[d] += a * c * (z[d] - o.x[d]) * k;
            }
        }
        (mean, g)
    }

    fn kstar(&self, z: &[f64]) -> Vec<f64> {
        self.data.observations.iter().map(|o| self.params.eval_sq(sq_dist(z, &o.x))).collect()
    }
}

impl Surrogate for GpModel {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn predict(&self, z: &[f64]) -> Prediction {
        self.posterior.predict(&self.kstar(z), self.params.gamma)
    }

    fn predict_grad(&self, z: &[f64]) -> PredictionGrad {
        let dim = z.len();
        let kstar = self.kstar(z);
        let c = -2.0 / (self.params.ell * self.params.ell);
        let mut dk = Vec::with_capacity(kstar.len() * dim);
        for (o, k) in self.data.observations.iter().zip(&kstar) {
            dk.extend(z.iter().zip(&o.x).map(|(a, b)| c * (a - b) * k));
        }
        self.posterior.predict_grad(&kstar, &dk, dim, self.params.gamma)
    }

    fn signal_variance(&self) -> f64 {
        self.params.gamma
    }
}

/// Posterior mean and variance at `z`.
pub fn gp_predict(model: &GpModel, z: &[f64]) -> Result<Prediction> {
    check_dim(model.dim(), z.len())?;
    Ok(model.predict(z))
}

/// `(∂k*/∂z)ᵀ K⁻¹ f`, the gradient of the posterior mean.
pub fn posterior_mean_grad(model: &GpModel, z: &[f64]) -> Result<Vec<f64>> {
    check_dim(model.dim(), z.len())?;
    Ok(model.mean_with_grad(z).1)
}

/// Fits `(γ, ℓ)` by multi-start projected gradient ascent of the log marginal
/// likelihood in log space. The length-scale box is `[1e-3·R, 10·R]` with `R`
/// the widest coordinate range of `bounds`; the `γ` box is `[1e-6, 1e6]` times
/// the target variance.
pub fn fit_gp<R: Rng + ?Sized>(data: &Dataset, bounds: &Bounds, cfg: &FitSettings, rng: &mut R) -> Result<GpModel> {
    check_dim(bounds.dim(), data.dim())?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidInput("fit settings need at least one restart".into()));
    }
    let raw: Vec<f64> = data.ys().collect();
    let offset = if cfg.center { raw.iter().sum::<f64>() / raw.len() as f64 } else { 0.0 };
    let ys: Vec<f64> = raw.iter().map(|y| y - offset).collect();
    let var = variance_floor(&ys);
    let range = bounds.max_range();
    let (lo, hi) = log_param_box(var, range);

    let mut starts = Vec::with_capacity(cfg.restarts);
    starts.push([libm::log(var).clamp(lo[0], hi[0]), libm::log(range / 4.0)]);
    for _ in 1..cfg.restarts {
        starts.push([rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])]);
    }

    let xs: Vec<&[f64]> = data.observations.iter().map(|o| o.x.as_slice()).collect();
    let surface = LikelihoodSurface::new(&xs, &ys);
    let ascent = cfg.ascent();
    let mut best: Option<(f64, [f64; 2], f64)> = None;
    for s in &starts {
        for jitter in cfg.jitter_ladder(cfg.jitter) {
            let objective = |th: &[f64]| {
                let p = KernelParams { gamma: libm::exp(th[0]), ell: libm::exp(th[1]) };
                surface.eval(&p, jitter).map(|(v, g)| (v, g.to_vec()))
            };
            if let Some(r) = maximize(objective, s, &lo, &hi, &ascent) {
                if best.map_or(true, |(v, _, _)| r.value > v) {
                    best = Some((r.value, [r.x[0], r.x[1]], jitter));
                }
                break;
            }
        }
    }
    let Some((_, th, jitter)) = best else {
        return Err(Error::Numerical(format!(
            "covariance of dataset for step {} ({} observations) is not positive definite at any start",
            data.t,
            data.len()
        )));
    };
    let params = KernelParams { gamma: libm::exp(th[0]), ell: libm::exp(th[1]) };
    GpModel::with_params(data.clone(), params, jitter, offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use alloc::vec;

    const E_INV: f64 = 0.36787944117144233;

    fn p(g: f64, l: f64) -> KernelParams {
        KernelParams::new(g, l).unwrap()
    }

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_eval(&[0.3, -1.0], &[0.3, -1.0], &p(2.5, 1.0)).unwrap(), 2.5);
        assert!((rbf_eval(&[0.0], &[1.0], &p(1.0, 1.0)).unwrap() - E_INV).abs() < 1e-12);
        assert!((rbf_eval(&[0.0, 0.0], &[2.0, 0.0], &p(1.0, 2.0)).unwrap() - E_INV).abs() < 1e-12);
        assert!(matches!(rbf_eval(&[0.0], &[1.0, 2.0], &p(1.0, 1.0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rbf_gradient_values() {
        assert_eq!(rbf_grad_x(&[1.0, 2.0], &[1.0, 2.0], &p(1.0, 1.0)).unwrap(), vec![0.0, 0.0]);
        let g = rbf_grad_x(&[1.0], &[0.0], &p(1.0, 1.0)).unwrap();
        assert!((g[0] + 2.0 * E_INV).abs() < 1e-12);
    }

    #[test]
    fn kernel_params_validated() {
        assert!(KernelParams::new(0.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn dataset_rejects_duplicates() {
        let r = Dataset::from_points(1, vec![vec![0.0, 1.0], vec![0.0, 1.0 + 1e-13]], vec![1.0, 2.0], false);
        assert!(r.is_err());
        assert!(Dataset::from_points(1, vec![], vec![], false).is_err());
    }

    #[test]
    fn one_point_posterior_by_hand() {
        let d = Dataset::from_points(1, vec![vec![0.0]], vec![3.0], false).unwrap();
        let m = GpModel::with_params(d, p(1.0, 1.0), 0.0, 0.0).unwrap();
        let pr = gp_predict(&m, &[1.0]).unwrap();
        assert!((pr.mean - 3.0 * E_INV).abs() < 1e-12);
        assert!((pr.variance - (1.0 - E_INV * E_INV)).abs() < 1e-12);
        let g = posterior_mean_grad(&m, &[1.0]).unwrap();
        assert!((g[0] + 6.0 * E_INV).abs() < 1e-12);
        let far = gp_predict(&m, &[50.0]).unwrap();
        assert!(far.mean.abs() < 1e-12 && (far.variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_has_flat_mean_at_midpoint() {
        let d = Dataset::from_points(1, vec![vec![-1.0], vec![1.0]], vec![5.0, 5.0], false).unwrap();
        let m = GpModel::with_params(d, p(1.0, 1.0), 1e-6, 0.0).unwrap();
        assert!(posterior_mean_grad(&m, &[0.0]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn single_point_likelihood() {
        let d = Dataset::from_points(1, vec![vec![0.4]], vec![0.0], false).unwrap();
        let l = log_marginal_likelihood(&d, &p(1.0, 1.0), 0.0).unwrap();
        assert!((l.value + 0.9189385332046727).abs() < 1e-12);
        assert_eq!(l.jitter, 0.0);
    }

    #[test]
    fn single_point_fit_recovers_unit_gamma() {
        let d = Dataset::from_points(1, vec![vec![0.0]], vec![1.0], false).unwrap();
        let b = Bounds::uniform(1, -1.0, 1.0).unwrap();
        let cfg = FitSettings { center: false, ..FitSettings::default() };
        let m = fit_gp(&d, &b, &cfg, &mut seeded(3)).unwrap();
        assert!((m.params().gamma - 1.0).abs() < 1e-3, "gamma = {}", m.params().gamma);
    }

    #[test]
    fn prediction_dimension_checked() {
        let d = Dataset::from_points(1, vec![vec![0.0, 0.0]], vec![1.0], false).unwrap();
        let m = GpModel::with_params(d, p(1.0, 1.0), 1e-6, 0.0).unwrap();
        assert!(gp_predict(&m, &[0.0]).is_err());
        assert!(posterior_mean_grad(&m, &[0.0, 1.0, 2.0]).is_err());
    }
}
