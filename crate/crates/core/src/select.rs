//! Source data selection: cluster the hyperparameters of per-step GPs and
//! keep one representative time step per cluster.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::gp::KernelParams;
use crate::linalg::sq_dist;

const TIE_TOL: f64 = 1e-12;

/// Hyperparameter features `h^t` of the GP fitted at each finished step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HyperparamArchive {
    entries: BTreeMap<usize, Vec<f64>>,
}

/// Feature vector `(γ, ℓ)` of a fitted kernel.
pub fn kernel_features(p: &KernelParams) -> Vec<f64> {
    vec![p.gamma, p.ell]
}

impl HyperparamArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: usize, features: Vec<f64>) -> Result<()> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite features for step {t}")));
        }
        if let Some(first) = self.entries.values().next() {
            check_dim(first.len(), features.len())?;
        }
        self.entries.insert(t, features);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Steps in ascending order.
    pub fn steps(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn features(&self, t: usize) -> Option<&[f64]> {
        self.entries.get(&t).map(Vec::as_slice)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.values().cloned().collect()
    }
}

/// Min-max scales every column to `[0, 1]`; constant columns map to 0.
pub fn normalize_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = rows.first() else { return Vec::new() };
    let dim = first.len();
    let mut out = rows.to_vec();
    for d in 0..dim {
        let lo = rows.iter().map(|r| r[d]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for r in out.iter_mut() {
            r[d] = if span > 0.0 { (r[d] - lo) / span } else { 0.0 };
        }
    }
    out
}

/// Normalized archive features, one row per step in ascending step order.
pub fn normalize_features(archive: &HyperparamArchive) -> Vec<Vec<f64>> {
    normalize_rows(&archive.rows())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub objective_trace: Vec<f64>,
}

impl Clustering {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

pub const KMEANS_MAX_ITER: usize = 100;

/// Lloyd's algorithm from k-means++ seeding. Empty clusters are refilled with
/// the point farthest from its centroid (ties go to the later point).
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || n == 0 {
        return Err(Error::InvalidInput("k-means needs k >= 1 and at least one point".into()));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("k-means with k = {k} > {n} points")));
    }
    let dim = points[0].len();
    for p in points {
        check_dim(dim, p.len())?;
    }

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
    }

    let nearest = |p: &[f64], cs: &[Vec<f64>], current: Option<usize>| -> usize {
        let mut best = current.unwrap_or(0);
        let mut best_d = sq_dist(p, &cs[best]);
        for (c, cen) in cs.iter().enumerate() {
            let d = sq_dist(p, cen);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        best
    };

    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids, None)).collect();
    let mut trace = Vec::new();
    let mut iter = 0;
    loop {
        // refill empty clusters
        for c in 0..k {
            let mut counts = vec![0usize; k];
            for &a in &assignments {
                counts[a] += 1;
            }
            if counts[c] > 0 {
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for (i, p) in points.iter().enumerate() {
                if counts[assignments[i]] < 2 {
                    continue;
                }
                let d = sq_dist(p, &centroids[assignments[i]]);
                if pick.map_or(true, |(_, bd)| d >= bd) {
                    pick = Some((i, d));
                }
            }
            if let Some((i, _)) = pick {
                assignments[i] = c;
                centroids[c] = points[i].clone();
            }
        }
        // update
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for d in 0..dim {
                sums[a][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        trace.push(points.iter().zip(&assignments).map(|(p, &a)| sq_dist(p, &centroids[a])).sum());
        iter += 1;
        if iter >= KMEANS_MAX_ITER {
            break;
        }
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let a = nearest(p, &centroids, Some(assignments[i]));
            if a != assignments[i] {
                assignments[i] = a;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Clustering { assignments, centroids, objective_trace: trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SourcePolicy {
    /// One representative per k-means cluster of the hyperparameter archive.
    #[default]
    Adaptive,
    /// The `k` most recent steps.
    Recent,
    /// The `k` steps whose features are nearest the current step's.
    Similar,
    /// `k` steps drawn uniformly without replacement.
    Random,
}

/// Clusters the normalized archive into `k` groups and returns, per group, the
/// step nearest its centroid (ties go to the most recent). Returns every step
/// when the archive holds at most `k` entries. Sorted ascending.
pub fn select_sources<R: Rng + ?Sized>(archive: &HyperparamArchive, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let steps = archive.steps();
    if steps.len() <= k {
        return Ok(steps);
    }
    let rows = normalize_features(archive);
    let cl = kmeans(&rows, k, rng)?;
    let mut picked = Vec::with_capacity(k);
    for c in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if cl.assignments[i] != c {
                continue;
            }
            let d = sq_dist(row, &cl.centroids[c]);
            // later steps come later in `rows`, so `<=` within tolerance favours them
            if best.map_or(true, |(_, bd)| d <= bd + TIE_TOL) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            picked.push(steps[i]);
        }
    }
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

/// Source selection under any [`SourcePolicy`]. `current` holds the current
/// step's features and is required by [`SourcePolicy::Similar`] only.
pub fn select_with_policy<R: Rng + ?Sized>(
    policy: SourcePolicy,
    archive: &HyperparamArchive,
    k: usize,
    current: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let steps = archive.steps();
    match policy {
        SourcePolicy::Adaptive => select_sources(archive, k, rng),
        SourcePolicy::Recent => Ok(steps[steps.len().saturating_sub(k)..].to_vec()),
        SourcePolicy::Random => {
            if steps.len() <= k {
                return Ok(steps);
            }
            let mut picked: Vec<usize> =
                rand::seq::index::sample(rng, steps.len(), k).into_iter().map(|i| steps[i]).collect();
            picked.sort_unstable();
            Ok(picked)
        }
        SourcePolicy::Similar => {
            let Some(h) = current else {
                return Err(Error::InvalidInput("the similar-source policy needs the current step's features".into()));
            };
            if steps.len() <= k {
                return Ok(steps);
            }
            let mut rows = archive.rows();
            rows.push(h.to_vec());
            let rows = normalize_rows(&rows);
            let target = &rows[rows.len() - 1];
            let mut order: Vec<(usize, f64)> =
                steps.iter().zip(&rows).map(|(&s, r)| (s, sq_dist(r, target))).collect();
            // nearest first, most recent first among ties
            order.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            let mut picked: Vec<usize> = order.into_iter().take(k).map(|(s, _)| s).collect();
            picked.sort_unstable();
            Ok(picked)
        }
    }
}
