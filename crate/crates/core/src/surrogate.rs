//! Posterior algebra shared by the single- and multi-output models.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, Cholesky};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Clamped at zero.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrad {
    pub mean: f64,
    pub variance: f64,
    pub mean_grad: Vec<f64>,
    pub variance_grad: Vec<f64>,
}

/// A fitted model that can be queried (and differentiated) at a point.
///
/// Inputs must have the model's dimension; the checked entry points are the
/// free functions in [`crate::gp`] and [`crate::mogp`].
pub trait Surrogate {
    fn dim(&self) -> usize;
    fn predict(&self, z: &[f64]) -> Prediction;
    fn predict_grad(&self, z: &[f64]) -> PredictionGrad;
    /// Prior variance scale of the model at the prediction task.
    fn signal_variance(&self) -> f64;
}

impl<S: Surrogate + ?Sized> Surrogate for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn predict(&self, z: &[f64]) -> Prediction {
        (**self).predict(z)
    }
    fn predict_grad(&self, z: &[f64]) -> PredictionGrad {
        (**self).predict_grad(z)
    }
    fn signal_variance(&self) -> f64 {
        (**self).signal_variance()
    }
}

/// Factored training covariance plus the weight vector `K⁻¹ (y - offset)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Posterior {
    pub chol: Cholesky,
    pub alpha: Vec<f64>,
    pub offset: f64,
}

impl Posterior {
    pub fn new(chol: Cholesky, centered: &[f64], offset: f64) -> Self {
        let alpha = chol.solve(centered);
        Self { chol, alpha, offset }
    }

    pub fn predict(&self, kstar: &[f64], prior_var: f64) -> Prediction {
        let mean = self.offset + dot(kstar, &self.alpha);
        let mut v = kstar.to_vec();
        self.chol.solve_lower_in_place(&mut v);
        let variance = (prior_var - dot(&v, &v)).max(0.0);
        Prediction { mean, variance }
    }

    /// `dkstar` holds `∂k*_p/∂z` row-major, one row of length `dim` per training point.
    pub fn predict_grad(&self, kstar: &[f64], dkstar: &[f64], dim: usize, prior_var: f64) -> PredictionGrad {
        let n = kstar.len();
        let mean = self.offset + dot(kstar, &self.alpha);
        let mut v = kstar.to_vec();
        self.chol.solve_lower_in_place(&mut v);
        let variance = (prior_var - dot(&v, &v)).max(0.0);
        self.chol.solve_upper_in_place(&mut v); // v = K⁻¹ k*
        let mut mean_grad = vec![0.0; dim];
        let mut variance_grad = vec![0.0; dim];
        for p in 0..n {
            let row = &dkstar[p * dim..(p + 1) * dim];
            for d in 0..dim {
                mean_grad[d] += self.alpha[p] * row[d];
                variance_grad[d] -= 2.0 * v[p] * row[d];
            }
        }
        PredictionGrad { mean, variance, mean_grad, variance_grad }
    }
}
