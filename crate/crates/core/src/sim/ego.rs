//! Rule-based reactive ego controller.
//!
//! The ego tracks its recorded trajectory with pure pursuit and a speed-matching
//! acceleration. A vehicle inside the frontal trigger cone overrides tracking
//! with hard braking and a fixed evasive steer away from the nearest threat.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CadreError, Result};
use crate::scenario::{Action, VehicleState, MAX_STEER};

/// Tracking acceleration limits (m/s²).
pub const TRACKING_ACCEL_MIN: f64 = -7.0;
pub const TRACKING_ACCEL_MAX: f64 = 2.0;

const MIN_LOOKAHEAD: f64 = 3.0;
const LOOKAHEAD_GAIN: f64 = 0.5;
// Window of reference indices searched for the closest point.
const SEARCH_BEHIND: usize = 50;
const SEARCH_AHEAD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EgoPolicyConfig {
    pub trigger_distance: f64,
    pub trigger_half_angle: f64,
    pub brake_decel: f64,
    pub evade_steer_mag: f64,
}

impl Default for EgoPolicyConfig {
    fn default() -> Self {
        Self {
            trigger_distance: 5.0,
            trigger_half_angle: PI / 4.0,
            brake_decel: -7.0,
            evade_steer_mag: PI / 8.0,
        }
    }
}

impl EgoPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.trigger_distance > 0.0
            && self.trigger_half_angle > 0.0
            && self.trigger_half_angle <= PI
            && self.brake_decel < 0.0;
        if ok {
            Ok(())
        } else {
            Err(CadreError::InvalidConfig(format!(
                "invalid ego policy {self:?}"
            )))
        }
    }
}

/// The ego's recorded trajectory plus what the controller needs to follow it.
#[derive(Debug, Clone, Copy)]
pub struct ReferencePath<'a> {
    pub states: &'a [VehicleState],
    pub wheelbase: f64,
    pub dt: f64,
}

/// Nearest vehicle inside the trigger cone, returned with its body-frame bearing.
fn nearest_threat<'a>(
    ego: &VehicleState,
    others: impl IntoIterator<Item = &'a VehicleState>,
    cfg: &EgoPolicyConfig,
) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for other in others {
        let d = ego.distance_to(other);
        if d > cfg.trigger_distance {
            continue;
        }
        let bearing = ego.bearing_to(other);
        if bearing.abs() > cfg.trigger_half_angle {
            continue;
        }
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, bearing));
        }
    }
    best.map(|(_, bearing)| bearing)
}

fn pure_pursuit(ego: &VehicleState, reference: &ReferencePath<'_>, t: usize) -> f64 {
    let path = reference.states;
    let last = path.len() - 1;
    let lo = t.saturating_sub(SEARCH_BEHIND);
    let hi = (t + SEARCH_AHEAD).min(last);
    let mut closest = lo;
    let mut closest_d = f64::INFINITY;
    for (k, s) in path[lo..=hi].iter().enumerate() {
        let d = ego.distance_to(s);
        if d < closest_d {
            closest_d = d;
            closest = lo + k;
        }
    }

    let lookahead = MIN_LOOKAHEAD.max(LOOKAHEAD_GAIN * ego.v);
    let mut goal = closest;
    while goal < last && ego.distance_to(&path[goal]) < lookahead {
        goal += 1;
    }
    let (bx, by) = ego.to_body_frame(&path[goal]);
    let ld_sq = bx * bx + by * by;
    if ld_sq < 1e-12 {
        return 0.0;
    }
    // Curvature of the arc through the goal point: 2·y / ld².
    let curvature = 2.0 * by / ld_sq;
    (reference.wheelbase * curvature)
        .atan()
        .clamp(-MAX_STEER, MAX_STEER)
}

/// Control for the ego at step `t`.
///
/// `others` holds every non-ego vehicle's current state.
pub fn ego_policy_step<'a>(
    ego: &VehicleState,
    reference: &ReferencePath<'_>,
    t: usize,
    others: impl IntoIterator<Item = &'a VehicleState>,
    cfg: &EgoPolicyConfig,
) -> Action {
    if let Some(bearing) = nearest_threat(ego, others, cfg) {
        let steer = if bearing > 0.0 {
            -cfg.evade_steer_mag
        } else {
            cfg.evade_steer_mag
        };
        return Action::new(cfg.brake_decel, steer);
    }

    let t = t.min(reference.states.len() - 1);
    let next = (t + 1).min(reference.states.len() - 1);
    let accel = ((reference.states[next].v - ego.v) / reference.dt)
        .clamp(TRACKING_ACCEL_MIN, TRACKING_ACCEL_MAX);
    Action::new(accel, pure_pursuit(ego, reference, t))
}
