//! Seeded, parallel experiment sweeps.
//!
//! Results directory layout:
//!
//! ```text
//! <output>/config.toml                       effective configuration
//! <output>/runs/<problem>/<algorithm>/rep-NNN.csv
//! <output>/summary.csv                       ε̄_f, ε̄_t per run
//! <output>/statistics.csv                    per algorithm versus the baseline
//! <output>/failures.csv                      only when some run failed
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dynbo_core::benchmarks::MovingPeaks;
use dynbo_core::optimizer::{run, AlgorithmConfig, BudgetSchedule, Clock, RunRecord};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ProblemInstance};
use crate::error::HarnessError;
use crate::record::{write_record, RecordMeta};
use crate::report::{load_results, write_report};

/// Stable 64-bit seed from a tuple of labels.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest holds 32 bytes"))
}

/// Seed of an algorithm's run. Adding algorithms or problems leaves the
/// seeds of existing runs unchanged.
pub fn run_seed(master: u64, problem: &str, algorithm: &str, repetition: usize) -> u64 {
    derive_seed(&["run", &master.to_string(), problem, algorithm, &repetition.to_string()])
}

/// Seed of the benchmark instance; every algorithm of a repetition faces the
/// same sequence of environments.
pub fn problem_seed(master: u64, problem: &str, repetition: usize) -> u64 {
    derive_seed(&["problem", &master.to_string(), problem, &repetition.to_string()])
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: ProblemInstance,
    pub algorithm: AlgorithmConfig,
    pub repetition: usize,
    pub steps: usize,
    pub seed: u64,
    pub problem_seed: u64,
}

impl RunSpec {
    pub fn meta(&self) -> RecordMeta {
        RecordMeta { problem: self.problem.id.clone(), repetition: self.repetition, problem_seed: self.problem_seed }
    }

    pub fn execute(&self) -> Result<RunRecord, HarnessError> {
        let p = &self.problem;
        let mut problem = MovingPeaks::new(p.peaks, p.shape, &p.bounds, &p.settings, self.problem_seed)?;
        let schedule = BudgetSchedule::standard(p.dim, self.steps);
        Ok(run(&self.algorithm, &mut problem, &schedule, self.seed, &mut WallClock::default())?)
    }
}

/// Every run of the experiment, ordered by problem, algorithm and repetition.
pub fn plan(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    let mut out = Vec::new();
    for problem in cfg.instances() {
        for algorithm in &cfg.algorithms {
            for repetition in 0..cfg.repetitions {
                out.push(RunSpec {
                    seed: run_seed(cfg.master_seed, &problem.id, &algorithm.name, repetition),
                    problem_seed: problem_seed(cfg.master_seed, &problem.id, repetition),
                    problem: problem.clone(),
                    algorithm: algorithm.clone(),
                    repetition,
                    steps: cfg.steps,
                });
            }
        }
    }
    out
}

pub fn record_path(dir: &Path, problem: &str, algorithm: &str, repetition: usize) -> PathBuf {
    dir.join("runs").join(problem).join(algorithm).join(format!("rep-{repetition:03}.csv"))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunFailure {
    pub problem: String,
    pub algorithm: String,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub completed: usize,
    pub failures: Vec<RunFailure>,
}

impl ExperimentOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every planned run, persists the records and writes the summary and
/// statistics tables. Failed runs are listed in `failures.csv` and skipped.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| HarnessError::io(&cfg_path, e))?;

    let specs = plan(cfg);
    let one = |spec: &RunSpec| -> Result<(), HarnessError> {
        let record = spec.execute()?;
        let path = record_path(&dir, &spec.problem.id, &spec.algorithm.name, spec.repetition);
        let parent = path.parent().expect("record paths have a parent");
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        write_record(&path, &spec.meta(), &record)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.parallelism {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<(), HarnessError>> = pool.install(|| specs.par_iter().map(one).collect());

    let mut failures = Vec::new();
    for (spec, r) in specs.iter().zip(results) {
        if let Err(e) = r {
            failures.push(RunFailure {
                problem: spec.problem.id.clone(),
                algorithm: spec.algorithm.name.clone(),
                repetition: spec.repetition,
                message: e.to_string(),
            });
        }
    }
    let failures_path = dir.join("failures.csv");
    if failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(|e| HarnessError::io(&failures_path, e))?;
        }
    } else {
        let mut w = csv::Writer::from_path(&failures_path).map_err(|e| HarnessError::record(&failures_path, e.to_string()))?;
        for f in &failures {
            w.serialize(f).map_err(|e| HarnessError::record(&failures_path, e.to_string()))?;
        }
        w.flush().map_err(|e| HarnessError::io(&failures_path, e))?;
    }

    let completed = specs.len() - failures.len();
    if completed > 0 {
        let results = load_results(&dir)?;
        write_report(&dir, &results, cfg.baseline_name())?;
    }
    Ok(ExperimentOutcome { dir, completed, failures })
}
