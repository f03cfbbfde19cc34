//! Space-filling initial designs.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bounds::Bounds;

/// Latin hypercube sample: along every dimension each of the `count` equal
/// strata holds exactly one point.
pub fn lhs_sample<R: Rng + ?Sized>(count: usize, bounds: &Bounds, rng: &mut R) -> Vec<Vec<f64>> {
    let n = bounds.dim();
    let mut points = alloc::vec![alloc::vec![0.0; n]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for d in 0..n {
        strata.shuffle(rng);
        let (lo, w) = (bounds.lower()[d], bounds.width(d));
        for (p, s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            p[d] = (lo + w * (*s as f64 + u) / count as f64).min(bounds.upper()[d]);
        }
    }
    points
}
