use rand::Rng;
use serde::{Deserialize, Serialize};

use super::beta::{beta_sample, BetaShape};
use super::TraceError;
use crate::model::ContentId;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampPhase {
    Up,
    Down,
}

/// Exponential ramp between `t0` and `t1`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub t0: usize,
    pub t1: usize,
    pub gamma: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sustained {
    pub t_start: usize,
    pub t_end: usize,
}

/// Access-shape schedule of one content during a flash crowd.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub content_id: ContentId,
    /// Shape outside the flash crowd; keep `alpha << beta`.
    pub base: BetaShape,
    pub ramp_up: Ramp,
    pub sustained: Sustained,
    pub ramp_down: Ramp,
    /// Largest access count per time step.
    pub scale_u: u32,
}

impl PhasePlan {
    pub fn validate(&self) -> Result<(), TraceError> {
        self.base.validate()?;
        let bad = |msg: &str| Err(TraceError::InvalidPlan(format!("content {}: {msg}", self.content_id)));
        if self.scale_u == 0 {
            return bad("scale_u must be positive");
        }
        for ramp in [&self.ramp_up, &self.ramp_down] {
            if ramp.t0 >= ramp.t1 {
                return bad("ramp needs t0 < t1");
            }
            if !(ramp.gamma > 0.0 && ramp.gamma.is_finite()) {
                return bad("ramp gamma must be positive");
            }
        }
        if !(self.ramp_up.t1 <= self.sustained.t_start
            && self.sustained.t_start <= self.sustained.t_end
            && self.sustained.t_end <= self.ramp_down.t0)
        {
            return bad("phases must be ordered and non-overlapping");
        }
        Ok(())
    }

    /// First time step after the flash crowd.
    pub fn end(&self) -> usize {
        self.ramp_down.t1
    }
}

/// Interpolation weight `y_t` of the base shape inside a ramp.
///
/// Ramp-up falls from 1 to 0 with `1 - y_t` growing exponentially; ramp-down
/// rises from 0 to 1 exponentially.
pub fn ramp_weight(phase: RampPhase, t0: f64, t1: f64, gamma: f64, t: f64) -> Result<f64, TraceError> {
    if !(t0 <= t && t <= t1) || !(t0 < t1) || !(gamma > 0.0) {
        return Err(TraceError::Domain { t, t0, t1 });
    }
    let span = (gamma * (t1 - t0)).exp_m1();
    let here = (gamma * (t - t0)).exp_m1();
    Ok(match phase {
        RampPhase::Up => (span - here) / span,
        RampPhase::Down => here / span,
    })
}

fn mix(base: BetaShape, y: f64) -> BetaShape {
    if y == 1.0 {
        return base;
    }
    if y == 0.0 {
        return base.swapped();
    }
    let alpha = y * base.alpha + (1.0 - y) * base.beta;
    BetaShape { alpha, beta: base.alpha + base.beta - alpha }
}

/// Beta shape governing accesses at time step `t`.
///
/// Base shape outside the flash crowd, the mirrored shape between the end of
/// ramp-up and the start of ramp-down, and a convex mix inside the ramps.
pub fn shape_at(plan: &PhasePlan, t: usize) -> BetaShape {
    let (up, down) = (plan.ramp_up, plan.ramp_down);
    let weight = |phase, ramp: Ramp| {
        ramp_weight(phase, ramp.t0 as f64, ramp.t1 as f64, ramp.gamma, t as f64)
            .expect("t lies inside the ramp")
    };
    if t <= up.t0 || t >= down.t1 {
        plan.base
    } else if t < up.t1 {
        mix(plan.base, weight(RampPhase::Up, up))
    } else if t <= down.t0 {
        plan.base.swapped()
    } else {
        mix(plan.base, weight(RampPhase::Down, down))
    }
}

/// Expected accesses `U * alpha_t / (alpha_t + beta_t)` before rounding.
pub fn mean_accesses(plan: &PhasePlan, t: usize) -> f64 {
    let s = shape_at(plan, t);
    plan.scale_u as f64 * s.alpha / (s.alpha + s.beta)
}

/// `round(U * x)` with halves rounded up, clamped to `[0, U]`.
pub fn scale_sample(sample: f64, scale_u: u32) -> u32 {
    let u = scale_u as f64;
    (u * sample + 0.5).floor().clamp(0.0, u) as u32
}

pub fn accesses_at<R: Rng + ?Sized>(plan: &PhasePlan, t: usize, rng: &mut R) -> u32 {
    scale_sample(beta_sample(shape_at(plan, t), rng), plan.scale_u)
}
