use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::TraceError;

/// Shape parameters of a beta density.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, TraceError> {
        let shape = Self { alpha, beta };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(TraceError::InvalidShape { alpha: self.alpha, beta: self.beta })
        }
    }

    /// The mirrored shape `(beta, alpha)`: same variance, mean `1 - mean`.
    pub fn swapped(&self) -> Self {
        Self { alpha: self.beta, beta: self.alpha }
    }
}

/// Mean and variance of `Beta(alpha, beta)`.
pub fn beta_mean_var(shape: BetaShape) -> (f64, f64) {
    let BetaShape { alpha, beta } = shape;
    let sum = alpha + beta;
    (alpha / sum, alpha * beta / (sum * sum * (sum + 1.0)))
}

/// Marsaglia-Tsang squeeze for `shape >= 1`, boosted by `U^(1/shape)` below 1.
fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One draw from `Beta(alpha, beta)` as `X / (X + Y)` with gamma variates.
pub fn beta_sample<R: Rng + ?Sized>(shape: BetaShape, rng: &mut R) -> f64 {
    let x = sample_gamma(shape.alpha, rng);
    let y = sample_gamma(shape.beta, rng);
    let sum = x + y;
    if sum > 0.0 {
        (x / sum).clamp(0.0, 1.0)
    } else {
        // both underflowed; only reachable for tiny shapes
        if shape.alpha >= shape.beta { 1.0 } else { 0.0 }
    }
}
