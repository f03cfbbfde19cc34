//! Run-record files: a `# key: value` header block followed by one CSV row
//! per evaluation with columns `step, fe_index, x_1..x_n, y, best_y`.
//!
//! Header keys: `algorithm`, `problem`, `repetition`, `seed`,
//! `problem_seed`, `dim`, `steps`, then per step `optimum.<t>` (`f* @ x*`),
//! `wallclock.<t>` and `sources.<t>`, and one `event` line per run event
//! (`<t> <fe_index> <message>`). Numbers use Rust's shortest round-trip
//! formatting, so reading a record back reproduces it exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dynbo_core::optimizer::{Evaluation, RunEvent, RunRecord, StepRecord};

use crate::error::HarnessError;

/// Identifies a run within an experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordMeta {
    pub problem: String,
    pub repetition: usize,
    /// Seed of the benchmark instance, shared by every algorithm of a repetition.
    pub problem_seed: u64,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_record(path: &Path, meta: &RecordMeta, record: &RunRecord) -> Result<(), HarnessError> {
    let io = |e| HarnessError::io(path, e);
    let dim = record.steps.first().and_then(|s| s.evaluations.first()).map_or(0, |e| e.x.len());
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = String::new();
    header.push_str(&format!("# algorithm: {}\n", record.algorithm));
    header.push_str(&format!("# problem: {}\n", meta.problem));
    header.push_str(&format!("# repetition: {}\n", meta.repetition));
    header.push_str(&format!("# seed: {}\n", record.seed));
    header.push_str(&format!("# problem_seed: {}\n", meta.problem_seed));
    header.push_str(&format!("# dim: {dim}\n"));
    header.push_str(&format!("# steps: {}\n", record.steps.len()));
    for s in &record.steps {
        header.push_str(&format!("# optimum.{}: {} @ {}\n", s.t, s.optimum.1, join(&s.optimum.0)));
        header.push_str(&format!("# wallclock.{}: {}\n", s.t, s.wallclock_secs));
        let src: Vec<String> = s.sources.iter().map(usize::to_string).collect();
        header.push_str(&format!("# sources.{}: {}\n", s.t, src.join(" ")));
    }
    for e in &record.events {
        header.push_str(&format!("# event: {} {} {}\n", e.t, e.fe_index, e.message.replace('\n', " ")));
    }
    out.write_all(header.as_bytes()).map_err(io)?;

    let mut w = csv::Writer::from_writer(out);
    let mut cols = vec!["step".to_string(), "fe_index".to_string()];
    cols.extend((1..=dim).map(|i| format!("x_{i}")));
    cols.extend(["y".to_string(), "best_y".to_string()]);
    let csv_err = |e: csv::Error| HarnessError::record(path, e.to_string());
    w.write_record(&cols).map_err(csv_err)?;
    for s in &record.steps {
        for (i, e) in s.evaluations.iter().enumerate() {
            let mut row = vec![s.t.to_string(), (i + 1).to_string()];
            row.extend(e.x.iter().map(f64::to_string));
            row.push(e.y.to_string());
            row.push(e.best_y.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn parse<T: std::str::FromStr>(path: &Path, key: &str, v: &str) -> Result<T, HarnessError> {
    v.trim().parse().map_err(|_| HarnessError::record(path, format!("bad value for `{key}`: {v:?}")))
}

fn parse_list(path: &Path, key: &str, v: &str) -> Result<Vec<f64>, HarnessError> {
    v.split_whitespace().map(|x| parse(path, key, x)).collect()
}

pub fn read_record(path: &Path) -> Result<(RecordMeta, RunRecord), HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut events = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let Some((k, v)) = line[1..].split_once(':') else {
            return Err(HarnessError::record(path, format!("header line without `key: value`: {line:?}")));
        };
        let (k, v) = (k.trim(), v.trim_start());
        if k == "event" {
            let mut parts = v.splitn(3, ' ');
            let t = parse(path, k, parts.next().unwrap_or(""))?;
            let fe_index = parse(path, k, parts.next().unwrap_or(""))?;
            events.push(RunEvent { t, fe_index, message: parts.next().unwrap_or("").to_string() });
        } else {
            header.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| header.get(k).ok_or_else(|| HarnessError::record(path, format!("missing header `{k}`")));
    let dim: usize = parse(path, "dim", get("dim")?)?;
    let steps: usize = parse(path, "steps", get("steps")?)?;
    let meta = RecordMeta {
        problem: get("problem")?.clone(),
        repetition: parse(path, "repetition", get("repetition")?)?,
        problem_seed: parse(path, "problem_seed", get("problem_seed")?)?,
    };
    let mut step_records = Vec::with_capacity(steps);
    for t in 1..=steps {
        let key = format!("optimum.{t}");
        let (f, x) = get(&key)?.split_once('@').ok_or_else(|| HarnessError::record(path, format!("`{key}` lacks '@'")))?;
        let sources = get(&format!("sources.{t}"))?
            .split_whitespace()
            .map(|s| parse(path, "sources", s))
            .collect::<Result<Vec<usize>, _>>()?;
        step_records.push(StepRecord {
            t,
            evaluations: Vec::new(),
            incumbent: Vec::new(),
            incumbent_y: f64::NEG_INFINITY,
            optimum: (parse_list(path, &key, x)?, parse(path, &key, f)?),
            sources,
            wallclock_secs: parse(path, "wallclock", get(&format!("wallclock.{t}"))?)?,
        });
    }

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    for row in rdr.records() {
        let row = row.map_err(|e| HarnessError::record(path, e.to_string()))?;
        if row.len() != dim + 4 {
            return Err(HarnessError::record(path, format!("row has {} columns, expected {}", row.len(), dim + 4)));
        }
        let t: usize = parse(path, "step", &row[0])?;
        let fe: usize = parse(path, "fe_index", &row[1])?;
        let step = step_records
            .get_mut(t.wrapping_sub(1))
            .ok_or_else(|| HarnessError::record(path, format!("row refers to step {t}")))?;
        if fe != step.evaluations.len() + 1 {
            return Err(HarnessError::record(path, format!("step {t}: fe_index {fe} out of order")));
        }
        let x = (0..dim).map(|i| parse(path, "x", &row[2 + i])).collect::<Result<Vec<f64>, _>>()?;
        let y: f64 = parse(path, "y", &row[dim + 2])?;
        let best_y = parse(path, "best_y", &row[dim + 3])?;
        if y > step.incumbent_y {
            step.incumbent_y = y;
            step.incumbent = x.clone();
        }
        step.evaluations.push(Evaluation { x, y, best_y });
    }
    if let Some(s) = step_records.iter().find(|s| s.evaluations.is_empty()) {
        return Err(HarnessError::record(path, format!("step {} has no evaluations", s.t)));
    }
    let record = RunRecord {
        seed: parse(path, "seed", get("seed")?)?,
        algorithm: get("algorithm")?.clone(),
        steps: step_records,
        events,
    };
    Ok((meta, record))
}
