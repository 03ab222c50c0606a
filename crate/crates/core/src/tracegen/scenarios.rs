//! The two flash-crowd scenarios used for the autoscaling comparison.
//!
//! Phase bounds are given in seconds and converted to time steps of
//! `step_seconds`, so the same scenario can be sampled per second (for the
//! access-curve plots) or per minute (for planner instances).

use serde::{Deserialize, Serialize};

use super::beta::BetaShape;
use super::plan::{PhasePlan, Ramp, Sustained};
use super::trace::{BackgroundPlan, TraceConfig};
use crate::model::ContentId;

/// Length of both scenarios in seconds.
pub const SCENARIO_SECONDS: usize = 3600;

/// Steepness of both ramps, as `gamma * (t1 - t0)`.
pub const RAMP_STEEPNESS: f64 = 5.0;

pub const BASE_SHAPE: BetaShape = BetaShape { alpha: 2.0, beta: 20.0 };

/// Flash-crowd bounds in seconds: ramp-up, sustained, ramp-down.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlashWindow {
    pub ramp_up: (usize, usize),
    pub sustained: (usize, usize),
    pub ramp_down: (usize, usize),
}

pub const SCENARIO_ONE_FLASH: FlashWindow = FlashWindow {
    ramp_up: (1140, 1740),
    sustained: (1800, 1860),
    ramp_down: (1920, 2460),
};

pub const SCENARIO_TWO_FLASHES: [FlashWindow; 2] = [
    FlashWindow { ramp_up: (540, 1140), sustained: (1200, 1320), ramp_down: (1380, 1860) },
    FlashWindow { ramp_up: (1500, 2100), sustained: (2160, 2220), ramp_down: (2280, 2820) },
];

/// Content sizes in MB; the flash contents are listed in [`ScenarioSpec::flash`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub sizes_mb: Vec<f64>,
    pub flash: Vec<(ContentId, FlashWindow)>,
    pub flash_u: u32,
    pub background_u: u32,
}

pub fn scenario_one_spec() -> ScenarioSpec {
    ScenarioSpec {
        sizes_mb: vec![1900.0, 1500.0, 900.0],
        flash: vec![(ContentId(2), SCENARIO_ONE_FLASH)],
        flash_u: 6,
        background_u: 3,
    }
}

pub fn scenario_two_spec() -> ScenarioSpec {
    ScenarioSpec {
        sizes_mb: vec![800.0, 1000.0, 1500.0, 2000.0],
        flash: vec![
            (ContentId(0), SCENARIO_TWO_FLASHES[0]),
            (ContentId(1), SCENARIO_TWO_FLASHES[1]),
        ],
        flash_u: 6,
        background_u: 2,
    }
}

fn steps(seconds: usize, step_seconds: f64) -> usize {
    (seconds as f64 / step_seconds).round() as usize
}

fn ramp(bounds: (usize, usize), step_seconds: f64) -> Ramp {
    let (t0, t1) = (steps(bounds.0, step_seconds), steps(bounds.1, step_seconds));
    Ramp { t0, t1, gamma: RAMP_STEEPNESS / (t1 - t0) as f64 }
}

pub fn flash_plan(content_id: ContentId, window: FlashWindow, scale_u: u32, step_seconds: f64) -> PhasePlan {
    PhasePlan {
        content_id,
        base: BASE_SHAPE,
        ramp_up: ramp(window.ramp_up, step_seconds),
        sustained: Sustained {
            t_start: steps(window.sustained.0, step_seconds),
            t_end: steps(window.sustained.1, step_seconds),
        },
        ramp_down: ramp(window.ramp_down, step_seconds),
        scale_u,
    }
}

impl ScenarioSpec {
    pub fn trace_config(&self, step_seconds: f64, seed: u64) -> TraceConfig {
        let plans = self
            .flash
            .iter()
            .map(|&(id, window)| flash_plan(id, window, self.flash_u, step_seconds))
            .collect();
        let background = (0..self.sizes_mb.len() as u32)
            .map(ContentId)
            .filter(|id| self.flash.iter().all(|(f, _)| f != id))
            .map(|content_id| BackgroundPlan { content_id, shape: BASE_SHAPE, scale_u: self.background_u })
            .collect();
        TraceConfig {
            plans,
            background,
            horizon_units: steps(SCENARIO_SECONDS, step_seconds),
            seed,
            step_seconds,
        }
    }

    pub fn is_flash(&self, content: ContentId) -> bool {
        self.flash.iter().any(|(id, _)| *id == content)
    }
}
