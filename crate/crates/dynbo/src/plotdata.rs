//! Tables for external plotting tools.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::HarnessError;
use crate::report::{baseline_for, load_results, mean, statistics, std_dev, write_table, ResultSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Mean best-so-far loss per evaluation with a 95% band.
    Trajectory,
    /// ε̄_f and ε̄_t means and standard deviations.
    Bars,
    /// ρ_c and ρ_t per algorithm.
    Rho,
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trajectory" => Ok(PlotKind::Trajectory),
            "bars" => Ok(PlotKind::Bars),
            "rho" => Ok(PlotKind::Rho),
            other => Err(format!("unknown plot kind {other:?}; expected trajectory, bars or rho")),
        }
    }
}

impl PlotKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::Trajectory => "trajectory",
            PlotKind::Bars => "bars",
            PlotKind::Rho => "rho",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub problem: String,
    pub algorithm: String,
    /// Evaluation index over the whole run, from 1.
    pub fe: usize,
    pub step: usize,
    pub mean_loss: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarRow {
    pub problem: String,
    pub algorithm: String,
    pub runs: usize,
    pub eps_f_mean: f64,
    pub eps_f_std: f64,
    pub eps_t_mean: f64,
    pub eps_t_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoRow {
    pub problem: String,
    pub algorithm: String,
    pub rho_c: f64,
    pub rho_t: f64,
}

/// Mean over repetitions ± 1.96 standard errors. Runs of a group must share
/// their budget schedule.
pub fn trajectory(results: &ResultSet) -> Result<Vec<TrajectoryRow>, HarnessError> {
    let mut rows = Vec::new();
    for problem in results.problems() {
        for algorithm in results.algorithms(problem) {
            let group = results.group(problem, algorithm);
            let series: Vec<Vec<(usize, f64)>> = group
                .values()
                .map(|r| {
                    r.metrics
                        .loss_trajectory
                        .iter()
                        .enumerate()
                        .flat_map(|(t, l)| l.iter().map(move |v| (t + 1, *v)))
                        .collect()
                })
                .collect();
            let len = series[0].len();
            if series.iter().any(|s| s.len() != len) {
                return Err(HarnessError::Config(format!(
                    "{problem}/{algorithm}: runs have different evaluation counts"
                )));
            }
            let reps = series.len() as f64;
            for fe in 0..len {
                let v: Vec<f64> = series.iter().map(|s| s[fe].1).collect();
                let m = mean(&v);
                let half = 1.96 * std_dev(&v) / reps.sqrt();
                rows.push(TrajectoryRow {
                    problem: problem.to_string(),
                    algorithm: algorithm.to_string(),
                    fe: fe + 1,
                    step: series[0][fe].0,
                    mean_loss: m,
                    lower: m - half,
                    upper: m + half,
                });
            }
        }
    }
    Ok(rows)
}

pub fn bars(results: &ResultSet) -> Vec<BarRow> {
    let mut rows = Vec::new();
    for problem in results.problems() {
        for algorithm in results.algorithms(problem) {
            let group = results.group(problem, algorithm);
            let f: Vec<f64> = group.values().map(|r| r.metrics.eps_f).collect();
            let t: Vec<f64> = group.values().map(|r| r.metrics.eps_t).collect();
            rows.push(BarRow {
                problem: problem.to_string(),
                algorithm: algorithm.to_string(),
                runs: group.len(),
                eps_f_mean: mean(&f),
                eps_f_std: std_dev(&f),
                eps_t_mean: mean(&t),
                eps_t_std: std_dev(&t),
            });
        }
    }
    rows
}

pub fn rho(results: &ResultSet, baseline: &str) -> Result<Vec<RhoRow>, HarnessError> {
    Ok(statistics(results, baseline)?
        .into_iter()
        .map(|s| RhoRow { problem: s.problem, algorithm: s.algorithm, rho_c: s.rho_c, rho_t: s.rho_t_mean })
        .collect())
}

/// Writes `plot_<kind>.csv` into the results directory and returns its path.
pub fn emit_plot_data(dir: &Path, kind: PlotKind) -> Result<PathBuf, HarnessError> {
    let results = load_results(dir)?;
    let path = dir.join(format!("plot_{}.csv", kind.name()));
    match kind {
        PlotKind::Trajectory => write_table(&path, &trajectory(&results)?)?,
        PlotKind::Bars => write_table(&path, &bars(&results))?,
        PlotKind::Rho => write_table(&path, &rho(&results, &baseline_for(dir, &results))?)?,
    }
    Ok(path)
}
