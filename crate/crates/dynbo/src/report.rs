//! Summary and statistics tables, recomputed from the persisted run records.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dynbo_core::metrics::{compare, error_metrics, rho_c, rho_t, MetricReport};
use dynbo_core::optimizer::RunRecord;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::record::{read_record, RecordMeta};

#[derive(Debug, Clone)]
pub struct RunResult {
    pub meta: RecordMeta,
    pub record: RunRecord,
    pub metrics: MetricReport,
}

/// Every run of a results directory, ordered by problem, algorithm and repetition.
#[derive(Debug, Clone, Default)]
pub struct ResultSet {
    pub runs: Vec<RunResult>,
}

impl ResultSet {
    pub fn problems(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.runs.iter().map(|r| r.meta.problem.as_str()).collect();
        v.dedup();
        v
    }

    /// Algorithms of a problem in name order.
    pub fn algorithms(&self, problem: &str) -> Vec<&str> {
        let mut v: Vec<&str> =
            self.runs.iter().filter(|r| r.meta.problem == problem).map(|r| r.record.algorithm.as_str()).collect();
        v.dedup();
        v
    }

    /// Runs of one problem and algorithm keyed by repetition.
    pub fn group(&self, problem: &str, algorithm: &str) -> BTreeMap<usize, &RunResult> {
        self.runs
            .iter()
            .filter(|r| r.meta.problem == problem && r.record.algorithm == algorithm)
            .map(|r| (r.meta.repetition, r))
            .collect()
    }
}

fn collect_csv(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.is_dir() {
            collect_csv(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn load_results(dir: &Path) -> Result<ResultSet, HarnessError> {
    let runs_dir = dir.join("runs");
    if !runs_dir.is_dir() {
        return Err(HarnessError::Empty(dir.to_path_buf()));
    }
    let mut paths = Vec::new();
    collect_csv(&runs_dir, &mut paths)?;
    let mut runs = Vec::with_capacity(paths.len());
    for path in paths {
        let (meta, record) = read_record(&path)?;
        let metrics = error_metrics(&record, &record.optima()).map_err(|e| HarnessError::record(&path, e.to_string()))?;
        runs.push(RunResult { meta, record, metrics });
    }
    if runs.is_empty() {
        return Err(HarnessError::Empty(dir.to_path_buf()));
    }
    runs.sort_by(|a, b| {
        (&a.meta.problem, &a.record.algorithm, a.meta.repetition).cmp(&(&b.meta.problem, &b.record.algorithm, b.meta.repetition))
    });
    Ok(ResultSet { runs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub problem: String,
    pub algorithm: String,
    pub repetition: usize,
    pub seed: u64,
    pub eps_f: f64,
    pub eps_t: f64,
}

pub fn summary_rows(results: &ResultSet) -> Vec<SummaryRow> {
    results
        .runs
        .iter()
        .map(|r| SummaryRow {
            problem: r.meta.problem.clone(),
            algorithm: r.record.algorithm.clone(),
            repetition: r.meta.repetition,
            seed: r.record.seed,
            eps_f: r.metrics.eps_f,
            eps_t: r.metrics.eps_t,
        })
        .collect()
}

/// One algorithm on one problem, compared with the baseline on paired
/// repetitions. `a12` is the probability that the baseline's error exceeds
/// the algorithm's, so values above 0.5 favour the algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub problem: String,
    pub algorithm: String,
    pub baseline: String,
    pub runs: usize,
    pub eps_f_mean: f64,
    pub eps_f_std: f64,
    pub eps_t_mean: f64,
    pub eps_t_std: f64,
    pub eps_f_p: f64,
    pub eps_f_a12: f64,
    pub eps_t_p: f64,
    pub eps_t_a12: f64,
    pub eps_t_effect: String,
    pub rho_c: f64,
    pub rho_t_mean: f64,
    pub rho_t_median: f64,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn statistics(results: &ResultSet, baseline: &str) -> Result<Vec<StatRow>, HarnessError> {
    let mut rows = Vec::new();
    for problem in results.problems() {
        let algorithms = results.algorithms(problem);
        let groups: Vec<BTreeMap<usize, &RunResult>> = algorithms.iter().map(|a| results.group(problem, a)).collect();
        let base = results.group(problem, baseline);

        // ρ_c over the repetitions every algorithm completed
        let mut rho_c_sum = vec![0.0; algorithms.len()];
        let mut rho_c_reps = 0usize;
        for rep in groups[0].keys() {
            let recs: Option<Vec<&RunRecord>> = groups.iter().map(|g| g.get(rep).map(|r| &r.record)).collect();
            if let Some(recs) = recs {
                for (s, v) in rho_c_sum.iter_mut().zip(rho_c(&recs)?) {
                    *s += v;
                }
                rho_c_reps += 1;
            }
        }

        for (ai, algorithm) in algorithms.iter().enumerate() {
            let group = &groups[ai];
            let eps_f: Vec<f64> = group.values().map(|r| r.metrics.eps_f).collect();
            let eps_t: Vec<f64> = group.values().map(|r| r.metrics.eps_t).collect();
            let paired: Vec<(&RunResult, &RunResult)> =
                group.iter().filter_map(|(rep, r)| base.get(rep).map(|b| (*r, *b))).collect();
            let (mut eps_f_p, mut eps_f_a12, mut eps_t_p, mut eps_t_a12) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
            let (mut rho_t_mean, mut rho_t_median) = (f64::NAN, f64::NAN);
            if !paired.is_empty() {
                let pick = |f: fn(&RunResult) -> f64| -> (Vec<f64>, Vec<f64>) {
                    (paired.iter().map(|(_, b)| f(b)).collect(), paired.iter().map(|(r, _)| f(r)).collect())
                };
                let (bf, af) = pick(|r| r.metrics.eps_f);
                let (bt, at) = pick(|r| r.metrics.eps_t);
                let sf = compare(&bf, &af)?;
                let st = compare(&bt, &at)?;
                (eps_f_p, eps_f_a12, eps_t_p, eps_t_a12) = (sf.p_value, sf.a12, st.p_value, st.a12);
                let rt: Vec<f64> =
                    paired.iter().map(|(r, b)| rho_t(&r.record, &b.record)).collect::<Result<_, _>>()?;
                rho_t_mean = mean(&rt);
                rho_t_median = median(&rt);
            }
            rows.push(StatRow {
                problem: problem.to_string(),
                algorithm: algorithm.to_string(),
                baseline: baseline.to_string(),
                runs: group.len(),
                eps_f_mean: mean(&eps_f),
                eps_f_std: std_dev(&eps_f),
                eps_t_mean: mean(&eps_t),
                eps_t_std: std_dev(&eps_t),
                eps_f_p,
                eps_f_a12,
                eps_t_p,
                eps_t_a12,
                eps_t_effect: if eps_t_a12.is_nan() {
                    String::new()
                } else {
                    dynbo_core::metrics::EffectSize::from_a12(eps_t_a12).label().to_string()
                },
                rho_c: if rho_c_reps > 0 { rho_c_sum[ai] / rho_c_reps as f64 } else { f64::NAN },
                rho_t_mean,
                rho_t_median,
            });
        }
    }
    Ok(rows)
}

pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::record(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::record(path, e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn table_string<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes `summary.csv` and `statistics.csv` into `dir`.
pub fn write_report(dir: &Path, results: &ResultSet, baseline: &str) -> Result<(), HarnessError> {
    write_table(&dir.join("summary.csv"), &summary_rows(results))?;
    write_table(&dir.join("statistics.csv"), &statistics(results, baseline)?)
}

/// Baseline recorded in a results directory's `config.toml`, else `rbo`
/// when present, else the alphabetically first algorithm.
pub fn baseline_for(dir: &Path, results: &ResultSet) -> String {
    let from_cfg = fs::read_to_string(dir.join("config.toml"))
        .ok()
        .and_then(|t| ExperimentConfig::from_toml(&t).ok())
        .map(|c| c.baseline_name().to_string());
    from_cfg.unwrap_or_else(|| {
        let algs: Vec<&str> = results.runs.iter().map(|r| r.record.algorithm.as_str()).collect();
        if algs.contains(&"rbo") {
            "rbo".into()
        } else {
            algs.iter().min().map(|s| s.to_string()).unwrap_or_default()
        }
    })
}
