//! Moving-peaks dynamic benchmarks with cone (MPB) or Gaussian (MPBG) peaks.
//!
//! The landscape is the pointwise maximum of `m` peaks. Between time steps
//! each peak's height and width take a Gaussian step scaled by their
//! severities (clamped to their ranges) and its center moves by exactly the
//! shift severity in a uniformly random direction, reflected at the box.

use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::Bounds;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, sq_dist};
use crate::optimizer::DynamicProblem;
use crate::rng::{normal, seeded, unit_vector, StdRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PeakShape {
    /// `H − W·‖x − c‖`
    #[default]
    Cone,
    /// `H·exp(−‖x − c‖² / (2W²))`
    Gaussian,
}

impl PeakShape {
    pub fn label(&self) -> &'static str {
        match self {
            PeakShape::Cone => "cone",
            PeakShape::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub center: Vec<f64>,
    pub height: f64,
    pub width: f64,
}

impl Peak {
    pub fn eval(&self, shape: PeakShape, x: &[f64]) -> f64 {
        match shape {
            PeakShape::Cone => self.height - self.width * dist(x, &self.center),
            PeakShape::Gaussian => {
                self.height * libm::exp(-sq_dist(x, &self.center) / (2.0 * self.width * self.width))
            }
        }
    }
}

/// Ranges and change severities of a moving-peaks instance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MpbSettings {
    pub height_range: (f64, f64),
    pub width_range: (f64, f64),
    pub height_severity: f64,
    pub shift_severity: f64,
    pub width_severity: f64,
}

impl Default for MpbSettings {
    fn default() -> Self {
        Self {
            height_range: (30.0, 70.0),
            width_range: (1.0, 12.0),
            height_severity: 1.0,
            shift_severity: 1.0,
            width_severity: 0.5,
        }
    }
}

impl MpbSettings {
    pub fn with_severities(height: f64, shift: f64) -> Self {
        Self { height_severity: height, shift_severity: shift, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpbState {
    pub peaks: Vec<Peak>,
    pub bounds: Bounds,
    pub shape: PeakShape,
    pub settings: MpbSettings,
    /// Time step, starting at 1.
    pub step: usize,
}

/// Peaks with centers uniform in the box, heights and widths uniform in their ranges.
pub fn mpb_init<R: Rng + ?Sized>(
    m: usize,
    shape: PeakShape,
    bounds: &Bounds,
    settings: &MpbSettings,
    rng: &mut R,
) -> Result<MpbState> {
    if m == 0 {
        return Err(Error::InvalidInput("a moving-peaks landscape needs at least one peak".into()));
    }
    let (hl, hh) = settings.height_range;
    let (wl, wh) = settings.width_range;
    if !(hl <= hh && wl <= wh && wl > 0.0) {
        return Err(Error::InvalidInput("peak height/width ranges must be ordered with positive widths".into()));
    }
    let peaks = (0..m)
        .map(|_| {
            let center = (0..bounds.dim()).map(|d| rng.gen_range(bounds.lower()[d]..=bounds.upper()[d])).collect();
            Peak { center, height: rng.gen_range(hl..=hh), width: rng.gen_range(wl..=wh) }
        })
        .collect();
    Ok(MpbState { peaks, bounds: bounds.clone(), shape, settings: settings.clone(), step: 1 })
}

pub fn mpb_eval(state: &MpbState, x: &[f64]) -> Result<f64> {
    check_dim(state.bounds.dim(), x.len())?;
    Ok(state.peaks.iter().map(|p| p.eval(state.shape, x)).fold(f64::NEG_INFINITY, f64::max))
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let mut v = v;
    while v < lo || v > hi {
        if v < lo {
            v = 2.0 * lo - v;
        }
        if v > hi {
            v = 2.0 * hi - v;
        }
    }
    v
}

/// The next environment.
pub fn mpb_advance<R: Rng + ?Sized>(state: &MpbState, rng: &mut R) -> MpbState {
    let s = &state.settings;
    let n = state.bounds.dim();
    let mut next = state.clone();
    for p in next.peaks.iter_mut() {
        p.height = (p.height + s.height_severity * normal(rng)).clamp(s.height_range.0, s.height_range.1);
        p.width = (p.width + s.width_severity * normal(rng)).clamp(s.width_range.0, s.width_range.1);
        let u = unit_vector(rng, n);
        for d in 0..n {
            let moved = p.center[d] + s.shift_severity * u[d];
            p.center[d] = reflect(moved, state.bounds.lower()[d], state.bounds.upper()[d]);
        }
    }
    next.step += 1;
    next
}

/// Global maximum: the center of the tallest peak.
pub fn true_optimum(state: &MpbState) -> (Vec<f64>, f64) {
    let best = state.peaks.iter().fold(&state.peaks[0], |b, p| if p.height > b.height { p } else { b });
    (best.center.clone(), best.height)
}

/// A moving-peaks problem handle that counts evaluations and owns the
/// random stream driving its changes.
#[derive(Debug, Clone)]
pub struct MovingPeaks {
    state: MpbState,
    rng: StdRng,
    evaluations: usize,
}

impl MovingPeaks {
    /// `seed` drives both the initial landscape and all later changes.
    pub fn new(m: usize, shape: PeakShape, bounds: &Bounds, settings: &MpbSettings, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let state = mpb_init(m, shape, bounds, settings, &mut rng)?;
        Ok(Self { state, rng, evaluations: 0 })
    }

    pub fn state(&self) -> &MpbState {
        &self.state
    }
}

impl DynamicProblem for MovingPeaks {
    fn bounds(&self) -> &Bounds {
        &self.state.bounds
    }

    fn evaluate(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        self.state.peaks.iter().map(|p| p.eval(self.state.shape, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn advance(&mut self) {
        self.state = mpb_advance(&self.state, &mut self.rng);
    }

    fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn step(&self) -> usize {
        self.state.step
    }

    fn optimum(&self) -> (Vec<f64>, f64) {
        true_optimum(&self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(shape: PeakShape, h: f64, w: f64) -> MpbState {
        MpbState {
            peaks: vec![Peak { center: vec![0.0], height: h, width: w }],
            bounds: Bounds::uniform(1, -20.0, 20.0).unwrap(),
            shape,
            settings: MpbSettings::default(),
            step: 1,
        }
    }

    #[test]
    fn closed_forms() {
        assert_eq!(mpb_eval(&single(PeakShape::Cone, 50.0, 2.0), &[10.0]).unwrap(), 30.0);
        let g = mpb_eval(&single(PeakShape::Gaussian, 40.0, 3.0), &[3.0]).unwrap();
        assert!((g - 40.0 * libm::exp(-0.5)).abs() < 1e-12);
        assert!(mpb_eval(&single(PeakShape::Cone, 50.0, 2.0), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn optimum_is_tallest_center() {
        let mut s = single(PeakShape::Cone, 40.0, 2.0);
        s.peaks.push(Peak { center: vec![5.0], height: 65.0, width: 3.0 });
        s.peaks.push(Peak { center: vec![-7.0], height: 55.0, width: 1.0 });
        let (x, f) = true_optimum(&s);
        assert_eq!((x, f), (vec![5.0], 65.0));
        assert_eq!(mpb_eval(&s, &[5.0]).unwrap(), 65.0);
    }

    #[test]
    fn zero_severity_only_counts_steps() {
        let b = Bounds::uniform(3, 0.0, 100.0).unwrap();
        let settings = MpbSettings { height_severity: 0.0, shift_severity: 0.0, width_severity: 0.0, ..MpbSettings::default() };
        let mut rng = seeded(5);
        let s = mpb_init(5, PeakShape::Cone, &b, &settings, &mut rng).unwrap();
        let n = mpb_advance(&s, &mut rng);
        assert_eq!(n.peaks, s.peaks);
        assert_eq!(n.step, 2);
    }

    #[test]
    fn init_ranges_and_seed() {
        let b = Bounds::uniform(2, 0.0, 100.0).unwrap();
        let s = mpb_init(5, PeakShape::Gaussian, &b, &MpbSettings::default(), &mut seeded(1)).unwrap();
        assert_eq!(s.peaks.len(), 5);
        assert!(s.peaks.iter().all(|p| (30.0..=70.0).contains(&p.height) && (1.0..=12.0).contains(&p.width)));
        assert_eq!(s, mpb_init(5, PeakShape::Gaussian, &b, &MpbSettings::default(), &mut seeded(1)).unwrap());
        assert!(mpb_init(0, PeakShape::Cone, &b, &MpbSettings::default(), &mut seeded(1)).is_err());
    }

    #[test]
    fn reflection_stays_inside() {
        assert_eq!(reflect(-3.0, 0.0, 10.0), 3.0);
        assert_eq!(reflect(12.0, 0.0, 10.0), 8.0);
        assert_eq!(reflect(25.0, 0.0, 10.0), 5.0);
    }
}
