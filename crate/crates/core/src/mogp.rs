//! Multi-output GP over time-tagged datasets.
//!
//! Tasks are the datasets handed to [`fit_mogp`], re-indexed `1..=T` in
//! ascending time order; the last task is the one being optimized. The
//! covariance between `(x, t)` and `(x', t')` is `Σ_i w_i(t, t')·k_i(x, x')`
//! with one RBF kernel `k_i` per task. The hierarchical model fixes
//! `w_i(t, t') = 1` when both `t, t' ≥ i` and 0 otherwise, so the covariance
//! is a prefix sum of per-task kernels with `2T` hyperparameters. The linear
//! model of coregionalization learns `w_i = [B_i B_iᵀ]_{t,t'}` with `B_i` a
//! `T × r` coefficient matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::Bounds;
use crate::error::{check_dim, Error, Result};
use crate::gp::{log_param_box, variance_floor, Dataset, FitSettings, KernelParams};
use crate::linalg::{sq_dist, Cholesky};
use crate::optim::maximize;
use crate::rng::normal;
use crate::surrogate::{Posterior, Prediction, PredictionGrad, Surrogate};

const LN_2PI: f64 = 1.8378770664093453;
/// Standard deviation of the initial coregionalization coefficients (variance 0.1).
const COEFF_INIT_SD: f64 = 0.31622776601683794;
const COEFF_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CoregionalizationKind {
    Hmogp,
    Lmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoregionalizationSpec {
    pub kind: CoregionalizationKind,
    /// Number of tasks `T`.
    pub tasks: usize,
    /// Columns of each `B_i`; ignored by the hierarchical model.
    pub rank: usize,
}

impl CoregionalizationSpec {
    pub fn hmogp(tasks: usize) -> Self {
        Self { kind: CoregionalizationKind::Hmogp, tasks, rank: 0 }
    }

    pub fn lmc(tasks: usize, rank: usize) -> Self {
        Self { kind: CoregionalizationKind::Lmc, tasks, rank }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 {
            return Err(Error::InvalidInput("a multi-output model needs at least one task".into()));
        }
        if self.kind == CoregionalizationKind::Lmc && self.rank == 0 {
            return Err(Error::InvalidInput("LMC rank must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of free hyperparameters: `2T` for the hierarchical model and
/// `2T + T²r` for LMC.
pub fn hyperparameter_count(spec: &CoregionalizationSpec) -> usize {
    let t = spec.tasks;
    match spec.kind {
        CoregionalizationKind::Hmogp => 2 * t,
        CoregionalizationKind::Lmc => 2 * t + t * t * spec.rank,
    }
}

/// Covariance function over `(x, task)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskKernel {
    spec: CoregionalizationSpec,
    kernels: Vec<KernelParams>,
    /// One `T × r` row-major matrix per task kernel (LMC only).
    coeffs: Vec<Vec<f64>>,
}

impl MultiTaskKernel {
    pub fn hmogp(kernels: Vec<KernelParams>) -> Result<Self> {
        let spec = CoregionalizationSpec::hmogp(kernels.len());
        spec.validate()?;
        Ok(Self { spec, kernels, coeffs: Vec::new() })
    }

    pub fn lmc(kernels: Vec<KernelParams>, coeffs: Vec<Vec<f64>>, rank: usize) -> Result<Self> {
        let spec = CoregionalizationSpec::lmc(kernels.len(), rank);
        spec.validate()?;
        check_dim(spec.tasks, coeffs.len())?;
        for b in &coeffs {
            check_dim(spec.tasks * rank, b.len())?;
        }
        Ok(Self { spec, kernels, coeffs })
    }

    pub fn spec(&self) -> &CoregionalizationSpec {
        &self.spec
    }

    pub fn kernels(&self) -> &[KernelParams] {
        &self.kernels
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Weight of kernel `i` (0-based) between tasks `t` and `t2` (1-based).
    #[inline]
    pub fn task_weight(&self, i: usize, t: usize, t2: usize) -> f64 {
        match self.spec.kind {
            CoregionalizationKind::Hmogp => {
                if t.min(t2) > i {
                    1.0
                } else {
                    0.0
                }
            }
            CoregionalizationKind::Lmc => {
                let r = self.spec.rank;
                let b = &self.coeffs[i];
                (0..r).map(|k| b[(t - 1) * r + k] * b[(t2 - 1) * r + k]).sum()
            }
        }
    }

    fn check_task(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.spec.tasks {
            Err(Error::InvalidInput(format!("task index {t} outside 1..={}", self.spec.tasks)))
        } else {
            Ok(())
        }
    }

    /// Prior variance at task `t`.
    pub fn prior_variance(&self, t: usize) -> f64 {
        self.kernels.iter().enumerate().map(|(i, k)| self.task_weight(i, t, t) * k.gamma).sum()
    }
}

/// `k((x, task), (x2, task2))`.
pub fn mt_kernel_eval(p: (&[f64], usize), q: (&[f64], usize), kernel: &MultiTaskKernel) -> Result<f64> {
    check_dim(p.0.len(), q.0.len())?;
    kernel.check_task(p.1)?;
    kernel.check_task(q.1)?;
    let d2 = sq_dist(p.0, q.0);
    Ok(kernel
        .kernels
        .iter()
        .enumerate()
        .map(|(i, k)| kernel.task_weight(i, p.1, q.1) * k.eval_sq(d2))
        .sum())
}

struct Stacked {
    xs: Vec<Vec<f64>>,
    task: Vec<usize>,
    raw: Vec<f64>,
}

fn stack(tasks: &[Dataset]) -> Result<Stacked> {
    if tasks.is_empty() {
        return Err(Error::InvalidInput("no tasks to fit".into()));
    }
    let dim = tasks[0].dim();
    for w in tasks.windows(2) {
        if w[0].t() >= w[1].t() {
            return Err(Error::InvalidInput(format!(
                "tasks must be in strictly ascending time order, got step {} before {}",
                w[0].t(),
                w[1].t()
            )));
        }
    }
    let mut s = Stacked { xs: Vec::new(), task: Vec::new(), raw: Vec::new() };
    for (idx, d) in tasks.iter().enumerate() {
        check_dim(dim, d.dim())?;
        for o in d.observations() {
            s.xs.push(o.x.clone());
            s.task.push(idx + 1);
            s.raw.push(o.y);
        }
    }
    Ok(s)
}

/// Likelihood of stacked observations as a function of the packed log-parameters.
struct MtSurface<'a> {
    n: usize,
    d2: Vec<f64>,
    task: &'a [usize],
    y: &'a [f64],
    spec: CoregionalizationSpec,
}

impl<'a> MtSurface<'a> {
    fn new(stacked: &'a Stacked, y: &'a [f64], spec: CoregionalizationSpec) -> Self {
        let n = stacked.xs.len();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = sq_dist(&stacked.xs[i], &stacked.xs[j]);
                d2[i * n + j] = d;
                d2[j * n + i] = d;
            }
        }
        Self { n, d2, task: &stacked.task, y, spec }
    }

    fn n_params(&self) -> usize {
        hyperparameter_count(&self.spec)
    }

    fn unpack(&self, theta: &[f64]) -> MultiTaskKernel {
        let t = self.spec.tasks;
        let kernels = (0..t)
            .map(|i| KernelParams { gamma: libm::exp(theta[i]), ell: libm::exp(theta[t + i]) })
            .collect();
        let coeffs = match self.spec.kind {
            CoregionalizationKind::Hmogp => Vec::new(),
            CoregionalizationKind::Lmc => {
                let block = t * self.spec.rank;
                (0..t).map(|i| theta[2 * t + i * block..2 * t + (i + 1) * block].to_vec()).collect()
            }
        };
        MultiTaskKernel { spec: self.spec, kernels, coeffs }
    }

    /// Per-kernel matrices `γ_i exp(−d²/ℓ_i²)` with `(1 + jitter)` on the diagonal.
    fn components(&self, kernel: &MultiTaskKernel, jitter: f64) -> Vec<Vec<f64>> {
        let n = self.n;
        kernel
            .kernels
            .iter()
            .map(|p| {
                let mut m = vec![0.0; n * n];
                for a in 0..n {
                    for b in 0..a {
                        let v = p.eval_sq(self.d2[a * n + b]);
                        m[a * n + b] = v;
                        m[b * n + a] = v;
                    }
                    m[a * n + a] = p.gamma * (1.0 + jitter);
                }
                m
            })
            .collect()
    }

    fn covariance(&self, kernel: &MultiTaskKernel, comps: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n;
        let mut k = vec![0.0; n * n];
        for (i, c) in comps.iter().enumerate() {
            for a in 0..n {
                for b in 0..=a {
                    let w = kernel.task_weight(i, self.task[a], self.task[b]);
                    if w != 0.0 {
                        k[a * n + b] += w * c[a * n + b];
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                k[b * n + a] = k[a * n + b];
            }
        }
        k
    }

    fn eval(&self, theta: &[f64], jitter: f64) -> Option<(f64, Vec<f64>)> {
        let n = self.n;
        let t = self.spec.tasks;
        let kernel = self.unpack(theta);
        let comps = self.components(&kernel, jitter);
        let k = self.covariance(&kernel, &comps);
        let chol = Cholesky::factor(&k, n)?;
        let alpha = chol.solve(self.y);
        let fit: f64 = alpha.iter().zip(self.y).map(|(a, y)| a * y).sum();
        let value = -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;
        if !value.is_finite() {
            return None;
        }
        let kinv = chol.inverse();
        let mut grad = vec![0.0; self.n_params()];
        let rank = self.spec.rank;
        for (i, c) in comps.iter().enumerate() {
            let inv_ell2 = 1.0 / (kernel.kernels[i].ell * kernel.kernels[i].ell);
            let mut m = vec![0.0; t * t];
            let (mut g_gamma, mut g_ell) = (0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    let g = (alpha[a] * alpha[b] - kinv[a * n + b]) * c[a * n + b];
                    let (ta, tb) = (self.task[a], self.task[b]);
                    let w = kernel.task_weight(i, ta, tb);
                    g_gamma += w * g;
                    g_ell += w * g * 2.0 * self.d2[a * n + b] * inv_ell2;
                    if self.spec.kind == CoregionalizationKind::Lmc {
                        m[(ta - 1) * t + (tb - 1)] += g;
                    }
                }
            }
            grad[i] = 0.5 * g_gamma;
            grad[t + i] = 0.5 * g_ell;
            if self.spec.kind == CoregionalizationKind::Lmc {
                // ∂/∂B_i = M_i B_i with M_i the task-blocked sums of W ⊙ K_i.
                let b = &kernel.coeffs[i];
                let off = 2 * t + i * t * rank;
                for row in 0..t {
                    for col in 0..rank {
                        grad[off + row * rank + col] = (0..t).map(|s| m[row * t + s] * b[s * rank + col]).sum();
                    }
                }
            }
        }
        Some((value, grad))
    }
}

/// A fitted multi-output GP. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MogpModel {
    tasks: Vec<Dataset>,
    kernel: MultiTaskKernel,
    xs: Vec<Vec<f64>>,
    task_of: Vec<usize>,
    posterior: Posterior,
    jitter: f64,
    log_likelihood: f64,
}

impl MogpModel {
    /// Conditions a model with fixed hyperparameters; `mean_offset` is the
    /// constant prior mean shared by all tasks.
    pub fn with_params(tasks: Vec<Dataset>, kernel: MultiTaskKernel, jitter: f64, mean_offset: f64) -> Result<Self> {
        check_dim(kernel.spec.tasks, tasks.len())?;
        let stacked = stack(&tasks)?;
        let y: Vec<f64> = stacked.raw.iter().map(|v| v - mean_offset).collect();
        let surface = MtSurface::new(&stacked, &y, kernel.spec);
        for j in FitSettings::default().jitter_ladder(jitter) {
            let comps = surface.components(&kernel, j);
            let k = surface.covariance(&kernel, &comps);
            if let Some(chol) = Cholesky::factor(&k, surface.n) {
                let posterior = Posterior::new(chol, &y, mean_offset);
                let fit: f64 = posterior.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
                let log_likelihood = -0.5 * fit - 0.5 * posterior.chol.log_det() - 0.5 * y.len() as f64 * LN_2PI;
                return Ok(Self {
                    tasks,
                    kernel,
                    xs: stacked.xs,
                    task_of: stacked.task,
                    posterior,
                    jitter: j,
                    log_likelihood,
                });
            }
        }
        Err(Error::Numerical(format!(
            "joint covariance of {} tasks ({} observations) is not positive definite",
            tasks.len(),
            stacked.raw.len()
        )))
    }

    pub fn tasks(&self) -> &[Dataset] {
        &self.tasks
    }

    pub fn kernel(&self) -> &MultiTaskKernel {
        &self.kernel
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Joint training covariance (including jitter), row-major.
    pub fn joint_covariance(&self) -> Vec<f64> {
        let stacked = Stacked { xs: self.xs.clone(), task: self.task_of.clone(), raw: vec![0.0; self.xs.len()] };
        let surface = MtSurface::new(&stacked, &stacked.raw, self.kernel.spec);
        let comps = surface.components(&self.kernel, self.jitter);
        surface.covariance(&self.kernel, &comps)
    }

    pub fn cholesky_factor(&self) -> &[f64] {
        self.posterior.chol.factor_matrix()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.posterior.alpha
    }

    /// The model seen as a single-output surrogate of task `task`.
    pub fn task_view(&self, task: usize) -> Result<TaskView<'_>> {
        self.kernel.check_task(task)?;
        Ok(TaskView { model: self, task })
    }

    fn kstar(&self, z: &[f64], task: usize) -> Vec<f64> {
        self.xs
            .iter()
            .zip(&self.task_of)
            .map(|(x, &tp)| {
                let d2 = sq_dist(z, x);
                self.kernel
                    .kernels
                    .iter()
                    .enumerate()
                    .map(|(i, k)| {
                        let w = self.kernel.task_weight(i, task, tp);
                        if w == 0.0 {
                            0.0
                        } else {
                            w * k.eval_sq(d2)
                        }
                    })
                    .sum()
            })
            .collect()
    }

    fn predict_at(&self, z: &[f64], task: usize) -> Prediction {
        self.posterior.predict(&self.kstar(z, task), self.kernel.prior_variance(task))
    }

    fn predict_grad_at(&self, z: &[f64], task: usize) -> PredictionGrad {
        let dim = z.len();
        let n = self.xs.len();
        let mut kstar = vec![0.0; n];
        let mut dk = vec![0.0; n * dim];
        for (p, (x, &tp)) in self.xs.iter().zip(&self.task_of).enumerate() {
            let d2 = sq_dist(z, x);
            for (i, k) in self.kernel.kernels.iter().enumerate() {
                let w = self.kernel.task_weight(i, task, tp);
                if w == 0.0 {
                    continue;
                }
                let kv = w * k.eval_sq(d2);
                kstar[p] += kv;
                let c = -2.0 / (k.ell * k.ell) * kv;
                for d in 0..dim {
                    dk[p * dim + d] += c * (z[d] - x[d]);
                }
            }
        }
        self.posterior.predict_grad(&kstar, &dk, dim, self.kernel.prior_variance(task))
    }
}

/// Predictions of a [`MogpModel`] restricted to one task.
#[derive(Debug, Clone, Copy)]
pub struct TaskView<'a> {
    model: &'a MogpModel,
    task: usize,
}

impl Surrogate for TaskView<'_> {
    fn dim(&self) -> usize {
        self.model.xs[0].len()
    }
    fn predict(&self, z: &[f64]) -> Prediction {
        self.model.predict_at(z, self.task)
    }
    fn predict_grad(&self, z: &[f64]) -> PredictionGrad {
        self.model.predict_grad_at(z, self.task)
    }
    fn signal_variance(&self) -> f64 {
        self.model.kernel.prior_variance(self.task)
    }
}

/// The model predicts its last (current) task.
impl Surrogate for MogpModel {
    fn dim(&self) -> usize {
        self.xs[0].len()
    }
    fn predict(&self, z: &[f64]) -> Prediction {
        self.predict_at(z, self.num_tasks())
    }
    fn predict_grad(&self, z: &[f64]) -> PredictionGrad {
        self.predict_grad_at(z, self.num_tasks())
    }
    fn signal_variance(&self) -> f64 {
        self.kernel.prior_variance(self.num_tasks())
    }
}

/// Posterior mean and variance of task `task` at `z`.
pub fn predict_mt(model: &MogpModel, z: &[f64], task: usize) -> Result<Prediction> {
    check_dim(model.dim(), z.len())?;
    model.kernel.check_task(task)?;
    Ok(model.predict_at(z, task))
}

/// Jointly fits all task kernels (and LMC coefficients) by multi-start
/// projected ascent of the stacked log marginal likelihood.
///
/// The ascent settings and the `(γ, ℓ)` boxes are those of
/// [`crate::gp::fit_gp`]. The first start puts `γ_i = var/T`, `ℓ_i = R/4`;
/// the others draw log-uniformly. LMC coefficients start from `N(0, 0.1)`.
pub fn fit_mogp<R: Rng + ?Sized>(
    tasks: &[Dataset],
    spec: &CoregionalizationSpec,
    bounds: &Bounds,
    cfg: &FitSettings,
    rng: &mut R,
) -> Result<MogpModel> {
    spec.validate()?;
    check_dim(spec.tasks, tasks.len())?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidInput("fit settings need at least one restart".into()));
    }
    let stacked = stack(tasks)?;
    check_dim(bounds.dim(), stacked.xs[0].len())?;
    let offset = if cfg.center { stacked.raw.iter().sum::<f64>() / stacked.raw.len() as f64 } else { 0.0 };
    let y: Vec<f64> = stacked.raw.iter().map(|v| v - offset).collect();
    let var = variance_floor(&y);
    let range = bounds.max_range();
    let (plo, phi) = log_param_box(var, range);
    let t = spec.tasks;
    let surface = MtSurface::new(&stacked, &y, *spec);
    let np = surface.n_params();

    let mut lo = vec![-COEFF_LIMIT; np];
    let mut hi = vec![COEFF_LIMIT; np];
    for i in 0..t {
        lo[i] = plo[0];
        hi[i] = phi[0];
        lo[t + i] = plo[1];
        hi[t + i] = phi[1];
    }

    let mut starts = Vec::with_capacity(cfg.restarts);
    for s in 0..cfg.restarts {
        let mut th = vec![0.0; np];
        if s == 0 {
            for i in 0..t {
                th[i] = libm::log(var / t as f64).clamp(plo[0], phi[0]);
                th[t + i] = libm::log(range / 4.0);
            }
        } else {
            for i in 0..t {
                th[i] = rng.gen_range(plo[0]..phi[0]);
            }
            for i in 0..t {
                th[t + i] = rng.gen_range(plo[1]..phi[1]);
            }
        }
        for v in th.iter_mut().skip(2 * t) {
            *v = COEFF_INIT_SD * normal(rng);
        }
        starts.push(th);
    }

    let ascent = cfg.ascent();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for s in &starts {
        for jitter in cfg.jitter_ladder(cfg.jitter) {
            if let Some(r) = maximize(|th| surface.eval(th, jitter), s, &lo, &hi, &ascent) {
                if best.as_ref().map_or(true, |(v, _, _)| r.value > *v) {
                    best = Some((r.value, r.x, jitter));
                }
                break;
            }
        }
    }
    let Some((_, theta, jitter)) = best else {
        return Err(Error::Numerical(format!(
            "joint covariance of {} tasks ({} observations) is not positive definite at any start",
            tasks.len(),
            y.len()
        )));
    };
    let kernel = surface.unpack(&theta);
    MogpModel::with_params(tasks.to_vec(), kernel, jitter, offset)
}
