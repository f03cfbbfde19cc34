//! Text dump of a moving-peaks instance: `# key: value` lines for the shape
//! and box, then one peak per line as `H,W,c_1,..,c_n`.

use dynbo_core::benchmarks::{MpbSettings, MpbState, Peak, PeakShape};
use dynbo_core::Bounds;

use crate::error::HarnessError;

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn dump_instance(state: &MpbState) -> String {
    let mut s = String::new();
    s.push_str(&format!("# shape: {}\n", state.shape.label()));
    s.push_str(&format!("# step: {}\n", state.step));
    s.push_str(&format!("# lower: {}\n", join(state.bounds.lower())));
    s.push_str(&format!("# upper: {}\n", join(state.bounds.upper())));
    for p in &state.peaks {
        s.push_str(&format!("{},{},{}\n", p.height, p.width, join(&p.center)));
    }
    s
}

fn bad(reason: impl Into<String>) -> HarnessError {
    HarnessError::Config(format!("instance dump: {}", reason.into()))
}

fn numbers(line: &str) -> Result<Vec<f64>, HarnessError> {
    line.split(',').map(|v| v.trim().parse().map_err(|_| bad(format!("not a number: {v:?}")))).collect()
}

/// Parses a dump. Severities are not part of the format and take `settings`.
pub fn parse_instance(text: &str, settings: &MpbSettings) -> Result<MpbState, HarnessError> {
    let (mut shape, mut step, mut lower, mut upper) = (None, 1, None, None);
    let mut peaks = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.split_once(':').ok_or_else(|| bad(format!("header without ':': {line:?}")))?;
            match k.trim() {
                "shape" => {
                    shape = Some(match v.trim() {
                        "cone" => PeakShape::Cone,
                        "gaussian" => PeakShape::Gaussian,
                        other => return Err(bad(format!("unknown shape {other:?}"))),
                    })
                }
                "step" => step = v.trim().parse().map_err(|_| bad("step must be an integer"))?,
                "lower" => lower = Some(numbers(v)?),
                "upper" => upper = Some(numbers(v)?),
                _ => {}
            }
            continue;
        }
        let v = numbers(line)?;
        if v.len() < 3 {
            return Err(bad(format!("peak line needs H, W and a center: {line:?}")));
        }
        peaks.push(Peak { height: v[0], width: v[1], center: v[2..].to_vec() });
    }
    let bounds = Bounds::new(lower.ok_or_else(|| bad("missing lower"))?, upper.ok_or_else(|| bad("missing upper"))?)?;
    if peaks.is_empty() {
        return Err(bad("no peaks"));
    }
    if peaks.iter().any(|p| p.center.len() != bounds.dim()) {
        return Err(bad("peak centers must match the box dimension"));
    }
    Ok(MpbState { peaks, bounds, shape: shape.ok_or_else(|| bad("missing shape"))?, settings: settings.clone(), step })
}
