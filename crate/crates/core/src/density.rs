//! Per-cluster Gaussian kernel density estimates.
//!
//! Each cluster gets its own full bandwidth matrix
//!
//! ```text
//! H = (scale * n^(-1/(dim + 4)))^2 * (S + lambda * I)
//! ```
//!
//! where `S` is the sample covariance of the cluster members and `lambda` a
//! small ridge that keeps `H` positive definite for tiny or flat clusters.
//! Only the Cholesky factor `L` (`H = L L^T`) is stored: density evaluation
//! uses triangular solves against it, and sampling perturbs a uniformly
//! chosen member by `L * eps` with `eps ~ N(0, I)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::data::JointPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("cluster has no points")]
    EmptyCluster,
    #[error("bandwidth matrix not positive definite even with ridge {lambda}")]
    CholeskyFailure { lambda: f64 },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bandwidth scale must be positive, got {0}")]
    BadScale(f64),
}

/// Number of ridge escalations (x10 each) tried after the first failure.
const CHOLESKY_RETRIES: usize = 3;

/// A fitted Gaussian KDE over one cluster's members.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterKde {
    points: Vec<JointPoint>,
    chol: DMatrix<f64>,
    log_norm_const: f64,
    lambda: f64,
    factor: f64,
}

/// Rule-of-thumb factor `n^(-1/(dim + 4))`.
pub fn scott_factor(n: usize, dim: usize) -> f64 {
    (n as f64).powf(-1.0 / (dim as f64 + 4.0))
}

/// Unbiased sample covariance; the zero matrix for a single point.
pub fn sample_covariance(points: &[JointPoint]) -> DMatrix<f64> {
    let n = points.len();
    let dim = points[0].dim();
    let mut mean = DVector::zeros(dim);
    for p in points {
        mean += DVector::from_column_slice(p.as_slice());
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    if n < 2 {
        return cov;
    }
    for p in points {
        let u = DVector::from_column_slice(p.as_slice()) - &mean;
        cov.ger(1.0, &u, &u, 1.0);
    }
    cov / (n as f64 - 1.0)
}

/// Fits the bandwidth for one cluster and factors it.
///
/// The ridge is `max(lambda_floor, 1e-6 * trace(S) / dim)`. When the factor
/// fails the ridge is multiplied by ten, up to three times.
pub fn select_bandwidth(
    points: Vec<JointPoint>,
    scale: f64,
    lambda_floor: f64,
) -> Result<ClusterKde, DensityError> {
    if points.is_empty() {
        return Err(DensityError::EmptyCluster);
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(DensityError::BadScale(scale));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(DensityError::DimensionMismatch {
            expected: dim,
            got: p.dim(),
        });
    }
    let cov = sample_covariance(&points);
    let factor = scale * scott_factor(points.len(), dim);
    let mut lambda = lambda_floor.max(1e-6 * cov.trace() / dim as f64);
    for attempt in 0..=CHOLESKY_RETRIES {
        let mut h = cov.clone();
        for i in 0..dim {
            h[(i, i)] += lambda;
        }
        h *= factor * factor;
        if let Some(chol) = cholesky(&h) {
            let log_det_half: f64 = (0..dim).map(|i| chol[(i, i)].ln()).sum();
            let log_norm_const =
                0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_half;
            return Ok(ClusterKde {
                points,
                chol,
                log_norm_const,
                lambda,
                factor,
            });
        }
        if attempt < CHOLESKY_RETRIES {
            log::debug!("bandwidth factor failed with ridge {lambda}; retrying");
            lambda *= 10.0;
        }
    }
    Err(DensityError::CholeskyFailure { lambda })
}

/// Lower Cholesky factor, requiring a strictly positive finite diagonal.
fn cholesky(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = nalgebra::Cholesky::new(h.clone())?.unpack();
    let ok = (0..l.nrows()).all(|i| {
        let v = l[(i, i)];
        v > 0.0 && v.is_finite()
    });
    ok.then_some(l)
}

impl ClusterKde {
    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn points(&self) -> &[JointPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lower-triangular `L` with `H = L L^T`.
    pub fn bandwidth_chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn bandwidth(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// `ln((2 pi)^(dim/2) |H|^(1/2))`.
    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    /// `ln |H|` from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.chol[(i, i)].ln()).sum::<f64>()
    }

    /// Ridge actually added to the covariance.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `scale * n^(-1/(dim + 4))`.
    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Estimated density at `z`: the mean of Gaussian kernels with
    /// covariance `H` centred on the members.
    pub fn density(&self, z: &[f64]) -> Result<f64, DensityError> {
        let dim = self.dim();
        if z.len() != dim {
            return Err(DensityError::DimensionMismatch {
                expected: dim,
                got: z.len(),
            });
        }
        let mut u = DVector::zeros(dim);
        let mut total = 0.0;
        for p in &self.points {
            for (ui, (a, b)) in u.iter_mut().zip(z.iter().zip(p.as_slice())) {
                *ui = a - b;
            }
            // ||L^-1 u||^2 == u^T H^-1 u
            self.chol.solve_lower_triangular_mut(&mut u);
            total += (-0.5 * u.norm_squared() - self.log_norm_const).exp();
        }
        Ok(total / self.points.len() as f64)
    }

    /// Draws `count` points: a uniformly chosen member plus `L * eps`.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<JointPoint> {
        self.sample_with(count, rng, |r| r.sample(StandardNormal))
    }

    /// As [`ClusterKde::sample`], with the standard normal draw supplied by
    /// `noise`.
    pub fn sample_with<R, F>(&self, count: usize, rng: &mut R, mut noise: F) -> Vec<JointPoint>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> f64,
    {
        let dim = self.dim();
        let n = self.points.len();
        let mut eps = DVector::zeros(dim);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let j = rng.random_range(0..n);
            for e in eps.iter_mut() {
                *e = noise(rng);
            }
            let shift = &self.chol * &eps;
            let z: Vec<f64> = self.points[j]
                .as_slice()
                .iter()
                .zip(shift.iter())
                .map(|(a, b)| a + b)
                .collect();
            out.push(JointPoint::new(z));
        }
        out
    }
}
