//! The dynamic optimization loop: DETO and the RBO / CBO baselines.
//!
//! Every step starts with Latin-hypercube initial samples and then spends the
//! rest of its budget one evaluation at a time on UCB maximizers of a freshly
//! fitted surrogate. What differs between the algorithms is the surrogate:
//!
//! * RBO fits a GP on the current step only.
//! * CBO fits a GP on the pooled data of the most recent `cbo_window` steps.
//! * DETO fits a multi-output GP over the selected sources (pseudo-labelled
//!   local optima under warm start, raw data otherwise) and the current step.
//!
//! Evaluation is exact to the budget: when a surrogate cannot be built or
//! proposes an already evaluated point, the remaining reserve LHS point
//! farthest from the step's data is evaluated instead and an event is logged.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::acquisition::{optimize_acquisition, AcqConfig, AcqOptimizerKind};
use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::{fit_gp, Dataset, FitSettings, GpModel};
use crate::linalg::sq_dist;
use crate::mogp::{fit_mogp, CoregionalizationKind, CoregionalizationSpec};
use crate::rng::{seeded, StdRng};
use crate::select::{kernel_features, select_with_policy, HyperparamArchive, SourcePolicy};
use crate::warm::{build_augmented, WarmStartConfig};

pub use crate::design::lhs_sample;

/// A dynamic objective to be maximized. The environment only changes on
/// [`DynamicProblem::advance`].
pub trait DynamicProblem {
    fn bounds(&self) -> &Bounds;
    /// Evaluates the current environment and counts the call.
    fn evaluate(&mut self, x: &[f64]) -> f64;
    fn advance(&mut self);
    /// Number of `evaluate` calls so far.
    fn evaluations(&self) -> usize;
    /// Current time step, starting at 1.
    fn step(&self) -> usize;
    /// Global maximizer and maximum of the current environment.
    fn optimum(&self) -> (Vec<f64>, f64);
}

/// Evaluation budgets per time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BudgetSchedule {
    pub first_total: usize,
    pub first_initial: usize,
    pub later_total: usize,
    pub later_initial: usize,
    pub steps: usize,
}

impl BudgetSchedule {
    /// Step 1 spends `2(11n − 1)` evaluations of which `11n − 1` are initial
    /// samples; later steps spend `9n` with `2n` initial samples.
    pub fn standard(n: usize, steps: usize) -> Self {
        Self {
            first_total: 2 * (11 * n - 1),
            first_initial: 11 * n - 1,
            later_total: 9 * n,
            later_initial: 2 * n,
            steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("a schedule needs at least one step".into()));
        }
        if self.first_initial == 0 || self.later_initial == 0 {
            return Err(Error::InvalidInput("every step needs at least one initial sample".into()));
        }
        if self.first_initial > self.first_total || self.later_initial > self.later_total {
            return Err(Error::InvalidInput("initial samples cannot exceed a step's budget".into()));
        }
        Ok(())
    }

    pub fn total(&self, t: usize) -> usize {
        if t <= 1 {
            self.first_total
        } else {
            self.later_total
        }
    }

    pub fn initial(&self, t: usize) -> usize {
        if t <= 1 {
            self.first_initial
        } else {
            self.later_initial
        }
    }

    pub fn total_evaluations(&self) -> usize {
        self.first_total + (self.steps - 1) * self.later_total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AlgorithmKind {
    #[default]
    Deto,
    /// Restart from scratch at every step.
    Rbo,
    /// Pool the data of recent steps into one GP.
    Cbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum InitStrategy {
    /// Source tasks are pseudo-labelled local optima of the source surrogates.
    #[default]
    Warm,
    /// Source tasks are the sources' raw data.
    Random,
}

/// An algorithm and its switches. The defaults are DETO's.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AlgorithmConfig {
    pub name: String,
    pub kind: AlgorithmKind,
    pub surrogate: CoregionalizationKind,
    /// LMC rank; the number of tasks when unset.
    pub lmc_rank: Option<usize>,
    pub source_policy: SourcePolicy,
    pub init: InitStrategy,
    pub acq_optimizer: AcqOptimizerKind,
    /// Number of source steps.
    pub k: usize,
    pub cbo_window: usize,
    pub warm: WarmStartConfig,
    pub acq: AcqConfig,
    pub fit: FitSettings,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            name: "deto".into(),
            kind: AlgorithmKind::Deto,
            surrogate: CoregionalizationKind::Hmogp,
            lmc_rank: None,
            source_policy: SourcePolicy::Adaptive,
            init: InitStrategy::Warm,
            acq_optimizer: AcqOptimizerKind::Hybrid,
            k: 3,
            cbo_window: 5,
            warm: WarmStartConfig::default(),
            acq: AcqConfig::default(),
            fit: FitSettings::default(),
        }
    }
}

impl AlgorithmConfig {
    pub fn deto() -> Self {
        Self::default()
    }

    pub fn rbo() -> Self {
        Self { name: "rbo".into(), kind: AlgorithmKind::Rbo, ..Self::default() }
    }

    pub fn cbo() -> Self {
        Self { name: "cbo".into(), kind: AlgorithmKind::Cbo, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidInput("algorithm name must not be empty".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.cbo_window == 0 {
            return Err(Error::InvalidInput("cbo_window must be at least 1".into()));
        }
        if self.lmc_rank == Some(0) {
            return Err(Error::InvalidInput("lmc_rank must be at least 1".into()));
        }
        if self.warm.sigma == 0 {
            return Err(Error::InvalidInput("warm.sigma must be at least 1".into()));
        }
        self.acq.validate()
    }
}

/// Monotone time source, in seconds. The core crate has no clock of its own.
pub trait Clock {
    fn now(&mut self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub y: f64,
    /// Best value of the step so far, this evaluation included.
    pub best_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub t: usize,
    pub evaluations: Vec<Evaluation>,
    /// Best evaluated point of the step.
    pub incumbent: Vec<f64>,
    pub incumbent_y: f64,
    /// True optimum of the step's environment.
    pub optimum: (Vec<f64>, f64),
    /// Source steps used (DETO only).
    pub sources: Vec<usize>,
    pub wallclock_secs: f64,
}

impl StepRecord {
    /// Best value after each evaluation.
    pub fn best_series(&self) -> impl Iterator<Item = f64> + '_ {
        self.evaluations.iter().map(|e| e.best_y)
    }
}

/// Something unusual that happened during a run, such as a fallback evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunEvent {
    pub t: usize,
    /// 1-based evaluation index within the step.
    pub fe_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub seed: u64,
    pub algorithm: String,
    pub steps: Vec<StepRecord>,
    pub events: Vec<RunEvent>,
}

impl RunRecord {
    /// True optimum value per step.
    pub fn optima(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.optimum.1).collect()
    }

    pub fn total_evaluations(&self) -> usize {
        self.steps.iter().map(|s| s.evaluations.len()).sum()
    }
}

struct StepState {
    t: usize,
    data: Option<Dataset>,
    evaluations: Vec<Evaluation>,
    reserve: Vec<Vec<f64>>,
}

impl StepState {
    fn contains(&self, x: &[f64]) -> bool {
        self.data.as_ref().is_some_and(|d| d.contains_point(x))
    }

    fn evaluate<P: DynamicProblem + ?Sized>(&mut self, problem: &mut P, x: Vec<f64>, events: &mut Vec<RunEvent>) {
        let y = problem.evaluate(&x);
        let best_y = self.evaluations.last().map_or(y, |e| e.best_y.max(y));
        let stored = match self.data.as_mut() {
            Some(d) => d.push(x.clone(), y),
            None => Dataset::from_points(self.t, alloc::vec![x.clone()], alloc::vec![y], false).map(|d| {
                self.data = Some(d);
            }),
        };
        self.evaluations.push(Evaluation { x, y, best_y });
        if let Err(e) = stored {
            events.push(RunEvent { t: self.t, fe_index: self.evaluations.len(), message: format!("not added to the model data: {e}") });
        }
    }

    /// Removes and returns the reserve point farthest from the step's data.
    fn fallback<R: rand::Rng + ?Sized>(&mut self, bounds: &Bounds, rng: &mut R) -> Vec<f64> {
        if self.reserve.is_empty() {
            self.reserve = lhs_sample(self.evaluations.len().max(1), bounds, rng);
        }
        let gap = |p: &[f64]| self.evaluations.iter().map(|e| sq_dist(p, &e.x)).fold(f64::INFINITY, f64::min);
        let mut best = 0;
        let mut best_gap = f64::NEG_INFINITY;
        for (i, p) in self.reserve.iter().enumerate() {
            let g = gap(p);
            if g > best_gap {
                best = i;
                best_gap = g;
            }
        }
        self.reserve.swap_remove(best)
    }
}

/// Data a DETO step borrows from earlier steps.
struct Transfer {
    sources: Vec<usize>,
    tasks: Vec<Dataset>,
}

fn fit_for_step(data: &Dataset, bounds: &Bounds, cfg: &FitSettings, rng: &mut StdRng) -> Result<GpModel> {
    fit_gp(data, bounds, cfg, rng)
}

fn prepare_transfer(
    cfg: &AlgorithmConfig,
    current: &Dataset,
    archive: &HyperparamArchive,
    models: &BTreeMap<usize, GpModel>,
    bounds: &Bounds,
    rng: &mut StdRng,
) -> Result<Transfer> {
    if archive.is_empty() {
        return Ok(Transfer { sources: Vec::new(), tasks: Vec::new() });
    }
    let features = match cfg.source_policy {
        SourcePolicy::Similar => Some(kernel_features(fit_for_step(current, bounds, &cfg.fit, rng)?.params())),
        _ => None,
    };
    let sources = select_with_policy(cfg.source_policy, archive, cfg.k, features.as_deref(), rng)?;
    let chosen: Vec<&GpModel> = sources.iter().filter_map(|s| models.get(s)).collect();
    let tasks = match cfg.init {
        InitStrategy::Warm => build_augmented(&chosen, bounds, &cfg.warm, rng)?,
        InitStrategy::Random => chosen.iter().map(|m| m.data().clone()).collect(),
    };
    Ok(Transfer { sources, tasks })
}

/// Single-step data pooled over the window, newest observations first so a
/// repeated location keeps its most recent value.
fn pool(current: &Dataset, history: &[Dataset], window: usize) -> Dataset {
    let mut pooled = current.clone();
    let older = window.saturating_sub(1).min(history.len());
    for d in history[history.len() - older..].iter().rev() {
        for o in d.observations() {
            if !pooled.contains_point(&o.x) {
                // cannot fail: dimension matches and the point is new
                let _ = pooled.push(o.x.clone(), o.y);
            }
        }
    }
    pooled
}

fn propose(
    cfg: &AlgorithmConfig,
    current: &Dataset,
    history: &[Dataset],
    transfer: Option<&Transfer>,
    bounds: &Bounds,
    rng: &mut StdRng,
) -> Result<Vec<f64>> {
    let single = |data: &Dataset, rng: &mut StdRng| -> Result<Vec<f64>> {
        let model = fit_for_step(data, bounds, &cfg.fit, rng)?;
        Ok(optimize_acquisition(&model, bounds, &cfg.acq, cfg.acq_optimizer, rng)?.x)
    };
    match (cfg.kind, transfer) {
        (AlgorithmKind::Cbo, _) => single(&pool(current, history, cfg.cbo_window), rng),
        (AlgorithmKind::Deto, Some(tr)) if !tr.tasks.is_empty() => {
            let mut tasks = tr.tasks.clone();
            tasks.push(current.clone());
            let spec = match cfg.surrogate {
                CoregionalizationKind::Hmogp => CoregionalizationSpec::hmogp(tasks.len()),
                CoregionalizationKind::Lmc => CoregionalizationSpec::lmc(tasks.len(), cfg.lmc_rank.unwrap_or(tasks.len())),
            };
            let model = fit_mogp(&tasks, &spec, bounds, &cfg.fit, rng)?;
            Ok(optimize_acquisition(&model, bounds, &cfg.acq, cfg.acq_optimizer, rng)?.x)
        }
        _ => single(current, rng),
    }
}

/// Runs `cfg` on `problem` for `schedule.steps` time steps. The same `seed`,
/// configuration and problem state give an identical record.
pub fn run<P: DynamicProblem + ?Sized, C: Clock + ?Sized>(
    cfg: &AlgorithmConfig,
    problem: &mut P,
    schedule: &BudgetSchedule,
    seed: u64,
    clock: &mut C,
) -> Result<RunRecord> {
    cfg.validate()?;
    schedule.validate()?;
    let bounds = problem.bounds().clone();
    let mut rng = seeded(seed);
    let mut history: Vec<Dataset> = Vec::new();
    let mut models: BTreeMap<usize, GpModel> = BTreeMap::new();
    let mut archive = HyperparamArchive::new();
    let mut steps = Vec::with_capacity(schedule.steps);
    let mut events = Vec::new();

    for t in 1..=schedule.steps {
        if t > 1 {
            problem.advance();
        }
        let started = clock.now();
        let optimum = problem.optimum();
        let total = schedule.total(t);
        let before = problem.evaluations();
        let mut step = StepState { t, data: None, evaluations: Vec::new(), reserve: lhs_sample(total, &bounds, &mut rng) };
        for x in lhs_sample(schedule.initial(t), &bounds, &mut rng) {
            step.evaluate(problem, x, &mut events);
        }

        let transfer = match (cfg.kind, step.data.as_ref()) {
            (AlgorithmKind::Deto, Some(current)) if t > 1 => {
                match prepare_transfer(cfg, current, &archive, &models, &bounds, &mut rng) {
                    Ok(tr) => Some(tr),
                    Err(e) => {
                        events.push(RunEvent { t, fe_index: step.evaluations.len(), message: format!("no transfer this step: {e}") });
                        None
                    }
                }
            }
            _ => None,
        };

        while step.evaluations.len() < total {
            let fe_index = step.evaluations.len() + 1;
            let proposal = match step.data.as_ref() {
                Some(current) => propose(cfg, current, &history, transfer.as_ref(), &bounds, &mut rng),
                None => Err(Error::InvalidInput("no data for this step".into())),
            };
            let x = match proposal {
                Ok(x) if x.iter().all(|v| v.is_finite()) && bounds.contains(&x) && !step.contains(&x) => x,
                Ok(_) => {
                    events.push(RunEvent { t, fe_index, message: "proposal already evaluated; using a reserve point".into() });
                    step.fallback(&bounds, &mut rng)
                }
                Err(e) => {
                    events.push(RunEvent { t, fe_index, message: format!("surrogate failed ({e}); using a reserve point") });
                    step.fallback(&bounds, &mut rng)
                }
            };
            step.evaluate(problem, x, &mut events);
        }
        debug_assert_eq!(problem.evaluations() - before, total);

        let data = step.data.take();
        if let (AlgorithmKind::Deto, Some(d)) = (cfg.kind, data.as_ref()) {
            if t < schedule.steps {
                match fit_for_step(d, &bounds, &cfg.fit, &mut rng) {
                    Ok(m) => {
                        archive.insert(t, kernel_features(m.params()))?;
                        models.insert(t, m);
                    }
                    Err(e) => events.push(RunEvent { t, fe_index: total, message: format!("step model not archived: {e}") }),
                }
            }
        }
        if let Some(d) = data {
            history.push(d);
            if cfg.kind == AlgorithmKind::Cbo && history.len() > cfg.cbo_window {
                history.remove(0);
            }
        }

        let best = step.evaluations.iter().fold(&step.evaluations[0], |b, e| if e.y > b.y { e } else { b });
        let (incumbent, incumbent_y) = (best.x.clone(), best.y);
        steps.push(StepRecord {
            t,
            evaluations: step.evaluations,
            incumbent,
            incumbent_y,
            optimum,
            sources: transfer.map(|tr| tr.sources).unwrap_or_default(),
            wallclock_secs: clock.now() - started,
        });
    }
    Ok(RunRecord { seed, algorithm: cfg.name.clone(), steps, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{MovingPeaks, MpbSettings, PeakShape};

    #[test]
    fn standard_budget_n3() {
        let s = BudgetSchedule::standard(3, 10);
        assert_eq!((s.total(1), s.initial(1), s.total(2), s.initial(2)), (64, 32, 27, 6));
        assert_eq!(s.total_evaluations(), 307);
    }

    #[test]
    fn invalid_schedule() {
        let mut s = BudgetSchedule::standard(2, 0);
        assert!(s.validate().is_err());
        s.steps = 2;
        s.later_initial = 100;
        assert!(s.validate().is_err());
    }

    #[test]
    fn rbo_counts_and_monotone_best() {
        let b = Bounds::uniform(1, 0.0, 100.0).unwrap();
        let mut p = MovingPeaks::new(2, PeakShape::Cone, &b, &MpbSettings::default(), 3).unwrap();
        let sched = BudgetSchedule { first_total: 8, first_initial: 4, later_total: 5, later_initial: 2, steps: 3 };
        let mut cfg = AlgorithmConfig::rbo();
        cfg.acq.generations = 5;
        let r = run(&cfg, &mut p, &sched, 1, &mut NoClock).unwrap();
        assert_eq!(r.steps.iter().map(|s| s.evaluations.len()).collect::<Vec<_>>(), [8, 5, 5]);
        assert_eq!(p.evaluations(), 18);
        for s in &r.steps {
            assert!(s.best_series().collect::<Vec<_>>().windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(s.incumbent_y, s.evaluations.last().unwrap().best_y);
        }
    }
}
