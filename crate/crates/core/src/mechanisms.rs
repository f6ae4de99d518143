//! The non-private Bayes estimator, ℓ₁-sensitivity, Laplace noise and the
//! Laplace-mechanism private estimator built from them.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{FiniteModel, NeighborGraph};

/// Laplace distribution with density `exp(-|z - location| / scale) / (2 scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    location: f64,
    scale: f64,
}

impl LaplaceParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !location.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Laplace needs a finite location and positive scale, got ({location}, {scale})"
            )));
        }
        Ok(LaplaceParams { location, scale })
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.scale * self.scale
    }

    pub fn pdf(&self, z: f64) -> f64 {
        (-(z - self.location).abs() / self.scale).exp() / (2.0 * self.scale)
    }

    /// Inverse CDF on the centered uniform `u ∈ (-1/2, 1/2)`.
    pub fn quantile_centered(&self, u: f64) -> f64 {
        self.location - self.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}

/// One inverse-CDF draw from `params`.
pub fn sample_laplace<R: Rng + ?Sized>(params: &LaplaceParams, rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        // u = -1/2 maps to -∞
        if u > -0.5 {
            // signum(0.0) is 1, and ln(1) = 0, so u = 0 still lands on the location
            return params.quantile_centered(u);
        }
    }
}

/// Posterior mean of `θ` on the model's grid after observing `y_obs`:
/// `Σ_k θ_k Q[obs][k] π_k / Σ_k Q[obs][k] π_k`.
pub fn posterior_mean(model: &FiniteModel, obs: usize) -> Result<f64> {
    if obs >= model.num_obs() {
        return Err(Error::IndexOutOfRange {
            index: obs,
            size: model.num_obs(),
        });
    }
    let row = model.likelihood().row(obs);
    let mut mass = 0.0;
    let mut moment = 0.0;
    for ((q, p), theta) in row.iter().zip(model.prior()).zip(model.grid().points()) {
        let w = q * p;
        mass += w;
        moment += w * theta;
    }
    if mass <= 0.0 {
        return Err(Error::ImpossibleObservation { index: obs });
    }
    Ok(moment / mass)
}

pub fn posterior_means(model: &FiniteModel) -> Result<Vec<f64>> {
    (0..model.num_obs()).map(|i| posterior_mean(model, i)).collect()
}

/// Largest `|estimates[i] - estimates[j]|` over neighbor pairs.
pub fn l1_sensitivity(estimates: &[f64], neighbors: &NeighborGraph) -> Result<f64> {
    if neighbors.is_empty() {
        log::warn!("l1 sensitivity over an empty neighbor relation is zero");
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for (i, j) in neighbors.pairs() {
        let size = estimates.len();
        let (a, b) = match (estimates.get(i), estimates.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::IndexOutOfRange { index: i.max(j), size }),
        };
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// A deterministic estimator made ε-DP by adding `Laplace(0, σ/ε)` noise,
/// with `σ` its ℓ₁-sensitivity over the neighbor relation.
#[derive(Debug, Clone, PartialEq)]
pub struct LbappEstimator {
    estimates: Vec<f64>,
    sensitivity: f64,
    epsilon: f64,
}

impl LbappEstimator {
    pub fn new(estimates: Vec<f64>, neighbors: &NeighborGraph, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let sensitivity = l1_sensitivity(&estimates, neighbors)?;
        Ok(LbappEstimator {
            estimates,
            sensitivity,
            epsilon,
        })
    }

    /// Wraps the model's grid posterior mean.
    pub fn from_model(model: &FiniteModel, epsilon: f64) -> Result<Self> {
        LbappEstimator::new(posterior_means(model)?, model.neighbors(), epsilon)
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn noise_scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    /// Variance contributed by the noise, `2 (σ/ε)²`.
    pub fn noise_variance(&self) -> f64 {
        2.0 * self.noise_scale().powi(2)
    }
}

/// Non-private estimate for `obs` plus one Laplace draw; not clipped.
pub fn lbapp_estimate<R: Rng + ?Sized>(est: &LbappEstimator, obs: usize, rng: &mut R) -> Result<f64> {
    let center = *est.estimates.get(obs).ok_or(Error::IndexOutOfRange {
        index: obs,
        size: est.estimates.len(),
    })?;
    let scale = est.noise_scale();
    if scale == 0.0 {
        return Ok(center);
    }
    Ok(center + sample_laplace(&LaplaceParams::new(0.0, scale)?, rng))
}
