//! Scenario representation and the kinematic bicycle model.
//!
//! A scenario is a time-indexed table of vehicle states (vehicle 0 is the ego)
//! together with per-vehicle footprints. Recorded trajectories are inverted into
//! action sequences, perturbed within bounds, and rolled forward again.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CadreError, Result};

/// Below this speed steering cannot be recovered from heading changes.
pub const RECOVERY_MIN_SPEED: f64 = 0.1;

/// Physical limit on the summed steering command.
pub const MAX_STEER: f64 = PI / 3.0;

/// Wrap an angle into `[-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if (-PI..=PI).contains(&angle) {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if wrapped < -PI {
        -PI
    } else {
        wrapped
    }
}

/// Planar pose and speed of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, kept in `[-π, π]`.
    pub psi: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, psi: f64, v: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
            v,
        }
    }

    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Position of `other` expressed in this vehicle's body frame
    /// (x forward, y to the left).
    pub fn to_body_frame(&self, other: &VehicleState) -> (f64, f64) {
        let (dx, dy) = (other.x - self.x, other.y - self.y);
        let (s, c) = self.psi.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Angle of `other` in this vehicle's body frame: 0 dead ahead, +π/2 due left.
    pub fn bearing_to(&self, other: &VehicleState) -> f64 {
        let (bx, by) = self.to_body_frame(other);
        by.atan2(bx)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.psi.is_finite() && self.v.is_finite()
    }
}

impl From<[f64; 4]> for VehicleState {
    fn from([x, y, psi, v]: [f64; 4]) -> Self {
        VehicleState::new(x, y, psi, v)
    }
}

impl From<VehicleState> for [f64; 4] {
    fn from(s: VehicleState) -> Self {
        [s.x, s.y, s.psi, s.v]
    }
}

/// Rectangular footprint and wheelbase of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleGeometry {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
}

impl Default for VehicleGeometry {
    /// A mid-size sedan.
    fn default() -> Self {
        Self {
            length: 4.7,
            width: 2.0,
            wheelbase: 2.8,
        }
    }
}

impl VehicleGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0.0
            && self.wheelbase > 0.0
            && self.wheelbase <= self.length
            && self.length.is_finite()
            && self.width.is_finite();
        if ok {
            Ok(())
        } else {
            Err(CadreError::InvalidScenario(format!(
                "geometry {self:?} violates 0 < wheelbase <= length, width > 0"
            )))
        }
    }
}

/// Acceleration (m/s²) and front-wheel steering angle (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub accel: f64,
    pub steer: f64,
}

impl Action {
    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }
    }
}

/// Per-step magnitude limits on perturbation deltas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationBounds {
    pub accel_bound: f64,
    pub steer_bound: f64,
}

impl Default for PerturbationBounds {
    fn default() -> Self {
        Self {
            accel_bound: 2.0,
            steer_bound: PI / 8.0,
        }
    }
}

impl PerturbationBounds {
    pub fn validate(&self) -> Result<()> {
        if self.accel_bound > 0.0 && self.steer_bound > 0.0 {
            Ok(())
        } else {
            Err(CadreError::InvalidConfig(format!(
                "perturbation bounds must be positive, got {self:?}"
            )))
        }
    }

    pub fn clamp(&self, delta: Action) -> Action {
        Action {
            accel: delta.accel.clamp(-self.accel_bound, self.accel_bound),
            steer: delta.steer.clamp(-self.steer_bound, self.steer_bound),
        }
    }

    /// Bound of flat coordinate `k` in the interleaved `[Δa₀, Δδ₀, Δa₁, Δδ₁, …]` layout.
    pub fn coordinate_bound(&self, k: usize) -> f64 {
        if k.is_multiple_of(2) {
            self.accel_bound
        } else {
            self.steer_bound
        }
    }

    /// Clamp a flat decision vector in place.
    pub fn clamp_flat(&self, theta: &mut [f64]) {
        for (k, value) in theta.iter_mut().enumerate() {
            let b = self.coordinate_bound(k);
            *value = value.clamp(-b, b);
        }
    }
}

/// Bounded per-step action deltas applied to one background vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub deltas: Vec<Action>,
    pub target: usize,
}

impl Perturbation {
    pub fn zeros(steps: usize, target: usize) -> Self {
        Self {
            deltas: vec![Action::default(); steps],
            target,
        }
    }

    /// Build from the interleaved flat layout used by the optimizers.
    pub fn from_flat(theta: &[f64], target: usize) -> Self {
        let deltas = theta
            .chunks_exact(2)
            .map(|pair| Action::new(pair[0], pair[1]))
            .collect();
        Self { deltas, target }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.deltas
            .iter()
            .flat_map(|a| [a.accel, a.steer])
            .collect()
    }

    pub fn uniform(steps: usize, target: usize, delta: Action) -> Self {
        Self {
            deltas: vec![delta; steps],
            target,
        }
    }
}

/// Recorded traffic: `states[t][i]` is vehicle `i` at step `t`; vehicle 0 is the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub dt: f64,
    #[serde(rename = "vehicles", default)]
    pub geometries: Vec<VehicleGeometry>,
    pub states: Vec<Vec<VehicleState>>,
}

impl Scenario {
    /// Build and validate. Missing geometries are filled with the default sedan.
    pub fn new(
        id: impl Into<String>,
        dt: f64,
        geometries: Vec<VehicleGeometry>,
        states: Vec<Vec<VehicleState>>,
    ) -> Result<Self> {
        let mut scenario = Self {
            id: id.into(),
            dt,
            geometries,
            states,
        };
        scenario.fill_default_geometry();
        scenario.validate()?;
        Ok(scenario)
    }

    pub(crate) fn fill_default_geometry(&mut self) {
        let n = self.states.first().map_or(0, Vec::len);
        if self.geometries.len() < n {
            self.geometries.resize(n, VehicleGeometry::default());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CadreError::InvalidScenario(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.states.len() < 2 {
            return bad(format!(
                "need at least 2 timesteps, got {}",
                self.states.len()
            ));
        }
        let n = self.states[0].len();
        if n < 2 {
            return bad("need an ego and at least one background vehicle".into());
        }
        if self.geometries.len() != n {
            return bad(format!(
                "{} geometries for {} vehicles",
                self.geometries.len(),
                n
            ));
        }
        for (t, row) in self.states.iter().enumerate() {
            if row.len() != n {
                return bad(format!(
                    "timestep {t} has {} vehicles, expected {n}",
                    row.len()
                ));
            }
            if let Some(i) = row.iter().position(|s| !s.is_finite()) {
                return bad(format!("non-finite state for vehicle {i} at timestep {t}"));
            }
        }
        self.geometries
            .iter()
            .try_for_each(VehicleGeometry::validate)
    }

    /// Number of simulation steps (one fewer than recorded timesteps).
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.horizon() as f64 * self.dt
    }

    pub fn vehicle_count(&self) -> usize {
        self.geometries.len()
    }

    pub fn background_count(&self) -> usize {
        self.vehicle_count() - 1
    }

    pub fn trajectory(&self, vehicle: usize) -> Vec<VehicleState> {
        self.states.iter().map(|row| row[vehicle]).collect()
    }

    pub fn check_target(&self, target: usize) -> Result<()> {
        if target == 0 || target >= self.vehicle_count() {
            Err(CadreError::InvalidTarget {
                index: target,
                vehicles: self.vehicle_count(),
            })
        } else {
            Ok(())
        }
    }
}

/// One forward-Euler step of the kinematic bicycle model.
///
/// Position advances with the pre-step heading and speed.
pub fn bicycle_step(state: VehicleState, action: Action, wheelbase: f64, dt: f64) -> VehicleState {
    let (sin, cos) = state.psi.sin_cos();
    VehicleState {
        x: state.x + state.v * cos * dt,
        y: state.y + state.v * sin * dt,
        psi: wrap_angle(state.psi + state.v * action.steer.tan() / wheelbase * dt),
        v: state.v + action.accel * dt,
    }
}

/// Roll the bicycle model forward; the result has `actions.len() + 1` states.
pub fn rollout(
    initial: VehicleState,
    actions: &[Action],
    wheelbase: f64,
    dt: f64,
) -> Vec<VehicleState> {
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(initial);
    let mut current = initial;
    for &action in actions {
        current = bicycle_step(current, action, wheelbase, dt);
        states.push(current);
    }
    states
}

/// Invert [`bicycle_step`] over consecutive pairs of a trajectory.
pub fn recover_actions(traj: &[VehicleState], wheelbase: f64, dt: f64) -> Result<Vec<Action>> {
    if traj.len() < 2 {
        return Err(CadreError::TrajectoryTooShort(traj.len()));
    }
    Ok(traj
        .windows(2)
        .map(|pair| {
            let (cur, next) = (pair[0], pair[1]);
            let accel = (next.v - cur.v) / dt;
            let steer = if cur.v.abs() < RECOVERY_MIN_SPEED {
                0.0
            } else {
                let dpsi = wrap_angle(next.psi - cur.psi);
                (dpsi * wheelbase / (cur.v * dt)).atan()
            };
            Action { accel, steer }
        })
        .collect())
}

/// Add clamped perturbation deltas to recorded actions.
///
/// Extra trailing deltas are ignored. The summed steering is capped at [`MAX_STEER`].
pub fn apply_perturbation(
    actions: &[Action],
    perturbation: &Perturbation,
    bounds: &PerturbationBounds,
) -> Result<Vec<Action>> {
    if perturbation.deltas.len() < actions.len() {
        return Err(CadreError::PerturbationLength {
            got: perturbation.deltas.len(),
            need: actions.len(),
        });
    }
    Ok(actions
        .iter()
        .zip(&perturbation.deltas)
        .map(|(base, &delta)| {
            let delta = bounds.clamp(delta);
            Action {
                accel: base.accel + delta.accel,
                steer: (base.steer + delta.steer).clamp(-MAX_STEER, MAX_STEER),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const L: f64 = 3.0;
    const DT: f64 = 0.1;

    #[test]
    fn straight_step() {
        let s = bicycle_step(
            VehicleState::new(0.0, 0.0, 0.0, 10.0),
            Action::default(),
            L,
            DT,
        );
        assert_eq!(s, VehicleState::new(1.0, 0.0, 0.0, 10.0));
    }

    #[test]
    fn accelerating_step_uses_pre_update_speed() {
        let s = bicycle_step(
            VehicleState::new(0.0, 0.0, 0.0, 10.0),
            Action::new(2.0, 0.0),
            L,
            DT,
        );
        assert_abs_diff_eq!(s.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v, 10.2, epsilon = 1e-12);
        assert_eq!(s.psi, 0.0);
    }

    #[test]
    fn steering_step_heading_rate() {
        let s = bicycle_step(
            VehicleState::new(0.0, 0.0, 0.0, 10.0),
            Action::new(0.0, PI / 8.0),
            L,
            DT,
        );
        // 10 * tan(π/8) / 3 * 0.1
        assert_abs_diff_eq!(s.psi, 0.138_071_187_457_698, epsilon = 1e-6);
    }

    #[test]
    fn wrap_angle_range() {
        for k in -50..50 {
            let a = wrap_angle(k as f64 * 0.77);
            assert!((-PI..=PI).contains(&a));
        }
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert!(wrap_angle(-1e-18 - PI) >= -PI);
    }

    #[test]
    fn recover_straight_line() {
        let traj: Vec<_> = (0..5)
            .map(|i| VehicleState::new(i as f64, 0.0, 0.0, 10.0))
            .collect();
        let actions = recover_actions(&traj, L, DT).unwrap();
        assert_eq!(actions.len(), 4);
        assert!(actions.iter().all(|a| *a == Action::default()));
    }

    #[test]
    fn recover_constant_arc() {
        // ψ̇ = 0.2 rad/s at 10 m/s.
        let traj: Vec<_> = (0..20)
            .map(|i| VehicleState::new(0.0, 0.0, 0.2 * DT * i as f64, 10.0))
            .collect();
        for a in recover_actions(&traj, L, DT).unwrap() {
            assert_abs_diff_eq!(a.steer, 0.059_928_155_248_683, epsilon = 1e-9);
            assert_abs_diff_eq!(a.accel, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn recover_rejects_single_state() {
        let err = recover_actions(&[VehicleState::new(0.0, 0.0, 0.0, 1.0)], L, DT).unwrap_err();
        assert!(matches!(err, CadreError::TrajectoryTooShort(1)));
    }

    #[test]
    fn recover_at_standstill_gives_zero_steer() {
        let traj = [
            VehicleState::new(0.0, 0.0, 0.0, 0.05),
            VehicleState::new(0.005, 0.0, 0.3, 0.05),
        ];
        assert_eq!(recover_actions(&traj, L, DT).unwrap()[0].steer, 0.0);
    }

    #[test]
    fn rollout_examples() {
        let straight = rollout(
            VehicleState::new(0.0, 0.0, 0.0, 10.0),
            &[Action::default(); 10],
            L,
            DT,
        );
        assert_eq!(straight.len(), 11);
        let last = straight.last().unwrap();
        assert_abs_diff_eq!(last.x, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(last.y, 0.0, epsilon = 1e-12);
        assert_eq!(last.v, 10.0);

        let accel = rollout(
            VehicleState::new(0.0, 0.0, 0.0, 0.0),
            &[Action::new(2.0, 0.0); 10],
            L,
            DT,
        );
        assert_abs_diff_eq!(accel.last().unwrap().v, 2.0, epsilon = 1e-12);

        // Heading after 100 steps of constant steering, accumulated without wrapping.
        let arc = rollout(
            VehicleState::new(0.0, 0.0, 0.0, 10.0),
            &[Action::new(0.0, 0.05991); 100],
            L,
            DT,
        );
        let unwrapped: f64 = arc
            .windows(2)
            .map(|w| wrap_angle(w[1].psi - w[0].psi))
            .sum();
        assert_abs_diff_eq!(unwrapped, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn perturbation_identity_and_bounds() {
        let bounds = PerturbationBounds::default();
        let actions = vec![Action::new(0.3, -0.1); 6];
        let same = apply_perturbation(&actions, &Perturbation::zeros(6, 1), &bounds).unwrap();
        assert_eq!(same, actions);

        let zeros = vec![Action::default(); 6];
        let at_bound = Perturbation::uniform(6, 1, Action::new(2.0, PI / 8.0));
        for a in apply_perturbation(&zeros, &at_bound, &bounds).unwrap() {
            assert_eq!(a, Action::new(2.0, PI / 8.0));
        }
        let over = Perturbation::uniform(6, 1, Action::new(5.0, 1.0));
        for a in apply_perturbation(&zeros, &over, &bounds).unwrap() {
            assert_eq!(a, Action::new(2.0, PI / 8.0));
        }
    }

    #[test]
    fn perturbation_physical_steer_cap() {
        let bounds = PerturbationBounds::default();
        let actions = vec![Action::new(0.0, 1.0); 3];
        let p = Perturbation::uniform(3, 1, Action::new(0.0, PI / 8.0));
        for a in apply_perturbation(&actions, &p, &bounds).unwrap() {
            assert_eq!(a.steer, MAX_STEER);
        }
    }

    #[test]
    fn perturbation_length_rules() {
        let bounds = PerturbationBounds::default();
        let actions = vec![Action::default(); 4];
        let longer = Perturbation::zeros(7, 1);
        assert_eq!(
            apply_perturbation(&actions, &longer, &bounds)
                .unwrap()
                .len(),
            4
        );
        let shorter = Perturbation::zeros(3, 1);
        assert!(matches!(
            apply_perturbation(&actions, &shorter, &bounds),
            Err(CadreError::PerturbationLength { got: 3, need: 4 })
        ));
    }

    #[test]
    fn flat_layout_interleaves() {
        let p = Perturbation::from_flat(&[1.0, 0.1, 2.0, 0.2], 3);
        assert_eq!(p.deltas, vec![Action::new(1.0, 0.1), Action::new(2.0, 0.2)]);
        assert_eq!(p.to_flat(), vec![1.0, 0.1, 2.0, 0.2]);
        let b = PerturbationBounds::default();
        assert_eq!(b.coordinate_bound(0), 2.0);
        assert_eq!(b.coordinate_bound(1), PI / 8.0);
    }

    #[test]
    fn scenario_validation() {
        let row = vec![
            VehicleState::new(0.0, 0.0, 0.0, 1.0),
            VehicleState::new(10.0, 0.0, 0.0, 1.0),
        ];
        let ok = Scenario::new("s", 0.1, vec![], vec![row.clone(), row.clone()]).unwrap();
        assert_eq!(ok.geometries.len(), 2);
        assert_eq!(ok.horizon(), 1);
        assert!(Scenario::new("s", 0.1, vec![], vec![row.clone()]).is_err());
        assert!(Scenario::new("s", 0.0, vec![], vec![row.clone(), row.clone()]).is_err());
        assert!(Scenario::new("s", 0.1, vec![], vec![row.clone(), row[..1].to_vec()]).is_err());
        let bad_geom = VehicleGeometry {
            length: 2.0,
            width: 2.0,
            wheelbase: 3.0,
        };
        assert!(Scenario::new("s", 0.1, vec![bad_geom; 2], vec![row.clone(), row]).is_err());
        assert!(ok.check_target(0).is_err());
        assert!(ok.check_target(2).is_err());
        assert!(ok.check_target(1).is_ok());
    }

    #[test]
    fn body_frame_bearing() {
        let ego = VehicleState::new(0.0, 0.0, PI / 2.0, 0.0);
        let ahead = VehicleState::new(0.0, 5.0, 0.0, 0.0);
        let (bx, by) = ego.to_body_frame(&ahead);
        assert_abs_diff_eq!(bx, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(by, 0.0, epsilon = 1e-12);
        let left = VehicleState::new(-3.0, 0.0, 0.0, 0.0);
        assert_abs_diff_eq!(ego.bearing_to(&left), PI / 2.0, epsilon = 1e-12);
    }
}
