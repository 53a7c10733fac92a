//! Procedural seed scenes: an unprotected left turn across oncoming traffic, a
//! highway lane change, and a U-turn through bidirectional traffic.
//!
//! Every vehicle is produced by rolling out a planned action sequence through
//! the bicycle model, so action recovery on the recorded states is exact up to
//! rounding. Background vehicles are placed by seeded rejection sampling; a
//! finished scene is accepted only if the recorded states keep clear of each
//! other and the unperturbed closed-loop simulation is collision-free for every
//! choice of target.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CadreError, Result};
use crate::scenario::{
    bicycle_step, rollout, Action, Perturbation, PerturbationBounds, Scenario, VehicleGeometry,
    VehicleState,
};
use crate::sim::collision::check_collision;
use crate::sim::{EgoPolicyConfig, OutcomeKind, Simulator};

pub const SCENE_DT: f64 = 0.1;
/// 15 s at 0.1 s.
pub const SCENE_STEPS: usize = 150;
pub const MAX_SCENE_ATTEMPTS: u32 = 100;
const MAX_PLACEMENT_TRIES: usize = 40;
const LANE: f64 = 3.7;
const HALF_LANE: f64 = LANE / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    CrossTurn,
    LaneChange,
    UTurn,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [
        SceneKind::CrossTurn,
        SceneKind::LaneChange,
        SceneKind::UTurn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::CrossTurn => "cross-turn",
            SceneKind::LaneChange => "lane-change",
            SceneKind::UTurn => "u-turn",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = CadreError;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| {
                CadreError::InvalidConfig(format!(
                    "unknown scene kind {s:?}; expected cross-turn, lane-change or u-turn"
                ))
            })
    }
}

/// Build a deterministic scene of `kind` from `seed`.
pub fn make_synthetic_scene(kind: SceneKind, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind as u64);
    for _ in 0..MAX_SCENE_ATTEMPTS {
        if let Some(scenario) = try_build(kind, seed, &mut rng) {
            return Ok(scenario);
        }
    }
    Err(CadreError::SceneConstruction(MAX_SCENE_ATTEMPTS))
}

fn try_build(kind: SceneKind, seed: u64, rng: &mut ChaCha8Rng) -> Option<Scenario> {
    let (ego, slots): (Vec<VehicleState>, Vec<Slot>) = match kind {
        SceneKind::CrossTurn => cross_turn(rng),
        SceneKind::LaneChange => lane_change(rng),
        SceneKind::UTurn => u_turn(rng),
    };
    let count = rng.random_range(5..=8).min(slots.len());
    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, slots.len(), count).into_vec();
    chosen.sort_unstable();

    let mut vehicles = vec![ego];
    for i in chosen {
        let placed = (0..MAX_PLACEMENT_TRIES)
            .map(|_| slots[i](rng))
            .find(|candidate| keeps_clear(candidate, &vehicles))?;
        vehicles.push(placed);
    }

    let states: Vec<Vec<VehicleState>> = (0..=SCENE_STEPS)
        .map(|t| vehicles.iter().map(|v| v[t]).collect())
        .collect();
    let scenario = Scenario::new(format!("{kind}-{seed}"), SCENE_DT, vec![], states).ok()?;
    unperturbed_is_safe(&scenario).then_some(scenario)
}

/// Recorded clearance: no overlap with padded footprints, and never inside a
/// slightly widened version of the ego's reaction cone.
fn keeps_clear(candidate: &[VehicleState], placed: &[Vec<VehicleState>]) -> bool {
    let padded = VehicleGeometry {
        length: VehicleGeometry::default().length + 2.0,
        width: VehicleGeometry::default().width + 1.0,
        ..VehicleGeometry::default()
    };
    let cone = EgoPolicyConfig::default();
    placed.iter().enumerate().all(|(j, other)| {
        candidate.iter().zip(other).all(|(c, o)| {
            if check_collision(c, &padded, o, &padded) {
                return false;
            }
            j != 0
                || !(o.distance_to(c) < cone.trigger_distance + 1.5
                    && o.bearing_to(c).abs() < cone.trigger_half_angle + 0.15)
        })
    })
}

fn unperturbed_is_safe(scenario: &Scenario) -> bool {
    (1..scenario.vehicle_count()).all(|target| {
        Simulator::new(
            scenario,
            target,
            EgoPolicyConfig::default(),
            PerturbationBounds::default(),
        )
        .and_then(|sim| sim.run(&Perturbation::zeros(SCENE_STEPS, target)))
        .is_ok_and(|r| r.outcome.kind == OutcomeKind::NoCollision)
    })
}

/// Generates one background vehicle's recorded trajectory.
type Slot = Box<dyn Fn(&mut ChaCha8Rng) -> Vec<VehicleState>>;

/// Plans an action sequence segment by segment and records the rollout.
struct Driver {
    start: VehicleState,
    state: VehicleState,
    wheelbase: f64,
    actions: Vec<Action>,
}

impl Driver {
    fn new(x: f64, y: f64, psi: f64, v: f64) -> Self {
        let start = VehicleState::new(x, y, psi, v);
        Self {
            start,
            state: start,
            wheelbase: VehicleGeometry::default().wheelbase,
            actions: Vec::new(),
        }
    }

    fn full(&self) -> bool {
        self.actions.len() >= SCENE_STEPS
    }

    fn push(&mut self, action: Action) {
        self.state = bicycle_step(self.state, action, self.wheelbase, SCENE_DT);
        self.actions.push(action);
    }

    fn accel_toward(&self, speed: f64, max_accel: f64) -> f64 {
        ((speed - self.state.v) / SCENE_DT).clamp(-max_accel, max_accel)
    }

    /// Straight ahead while `keep_going` holds, adjusting speed.
    fn drive_while(
        mut self,
        keep_going: impl Fn(&VehicleState) -> bool,
        speed: f64,
        max_accel: f64,
    ) -> Self {
        while !self.full() && keep_going(&self.state) {
            let a = self.accel_toward(speed, max_accel);
            self.push(Action::new(a, 0.0));
        }
        self
    }

    fn drive(self, steps: usize, speed: f64, max_accel: f64) -> Self {
        let end = self.actions.len() + steps;
        let mut d = self;
        while !d.full() && d.actions.len() < end {
            let a = d.accel_toward(speed, max_accel);
            d.push(Action::new(a, 0.0));
        }
        d
    }

    /// Change heading by exactly `angle` along an arc of roughly `radius`.
    fn turn_by(mut self, angle: f64, radius: f64, speed: f64, max_accel: f64) -> Self {
        let mut left = angle;
        while !self.full() && left.abs() > 1e-12 {
            let v = self.state.v;
            let step = (v / radius * SCENE_DT).min(left.abs()).copysign(left);
            let steer = (step * self.wheelbase / (v * SCENE_DT)).atan();
            let a = self.accel_toward(speed, max_accel);
            self.push(Action::new(a, steer));
            left -= step;
        }
        self
    }

    fn finish(self) -> Vec<VehicleState> {
        let v = self.state.v;
        let mut d = self.drive(SCENE_STEPS, v, 0.0);
        d.actions.truncate(SCENE_STEPS);
        rollout(d.start, &d.actions, d.wheelbase, SCENE_DT)
    }
}

fn cruise(x: f64, y: f64, psi: f64, v: f64) -> Vec<VehicleState> {
    Driver::new(x, y, psi, v).finish()
}

/// Left turn from the northbound inner lane into the westbound lane.
fn cross_turn(rng: &mut ChaCha8Rng) -> (Vec<VehicleState>, Vec<Slot>) {
    const RADIUS: f64 = 9.0;
    let turn_start = HALF_LANE - RADIUS;
    let approach = rng.random_range(8.0..10.0);
    let turn_speed = rng.random_range(5.5..6.5);
    let plan = move |y0: f64| {
        Driver::new(HALF_LANE, y0, FRAC_PI_2, approach)
            .drive_while(|s| s.y < turn_start, turn_speed, 1.5)
            .turn_by(FRAC_PI_2, RADIUS, turn_speed, 1.5)
            .drive(SCENE_STEPS, 10.0, 1.5)
            .finish()
    };
    let ego = plan(rng.random_range(-42.0..-34.0));

    // Southbound vehicle reaching y = 0 at `t_cross` seconds.
    let oncoming = |x: f64, lo: f64, hi: f64| -> Slot {
        Box::new(move |rng| {
            let v = rng.random_range(8.0..12.0);
            let t = rng.random_range(lo..hi);
            cruise(x, v * t, -FRAC_PI_2, v)
        })
    };
    let slots: Vec<Slot> = vec![
        oncoming(-HALF_LANE, 0.5, 3.0),
        oncoming(-HALF_LANE, 9.0, 13.0),
        oncoming(-HALF_LANE - LANE, 0.5, 3.0),
        oncoming(-HALF_LANE - LANE, 10.0, 14.0),
        // Follower taking the same turn.
        Box::new(move |rng| plan(rng.random_range(-70.0..-58.0))),
        // Northbound through traffic in the outer lane.
        Box::new(|rng| {
            let v = rng.random_range(8.0..12.0);
            cruise(
                HALF_LANE + LANE,
                rng.random_range(-60.0..-15.0),
                FRAC_PI_2,
                v,
            )
        }),
        // Westbound cross traffic clearing the junction before the ego turns.
        Box::new(|rng| {
            let v = rng.random_range(8.0..12.0);
            let t = rng.random_range(0.5..2.0);
            cruise(v * t, HALF_LANE, PI, v)
        }),
        // Eastbound cross traffic arriving after the ego has left.
        Box::new(|rng| {
            let v = rng.random_range(8.0..12.0);
            let t = rng.random_range(9.0..13.0);
            cruise(-v * t, -HALF_LANE, 0.0, v)
        }),
    ];
    (ego, slots)
}

/// Highway lane change to the left at 20-30 m/s.
fn lane_change(rng: &mut ChaCha8Rng) -> (Vec<VehicleState>, Vec<Slot>) {
    const HEADING: f64 = 0.08;
    const RADIUS: f64 = 150.0;
    let speed = rng.random_range(22.0..28.0);
    let hold = rng.random_range(15..35);
    // Lateral distance covered by the discrete return arc.
    let arc_offset = Driver::new(0.0, 0.0, HEADING, speed)
        .turn_by(-HEADING, RADIUS, speed, 0.0)
        .state
        .y;
    let ego = Driver::new(0.0, 0.0, 0.0, speed)
        .drive(hold, speed, 0.0)
        .turn_by(HEADING, RADIUS, speed, 0.0)
        .drive_while(
            |s| s.y + s.v * s.psi.sin() * SCENE_DT / 2.0 < LANE - arc_offset,
            speed,
            0.0,
        )
        .turn_by(-HEADING, RADIUS, speed, 0.0)
        .finish();

    let lane_vehicle = move |y: f64, x_lo: f64, x_hi: f64, dv_lo: f64, dv_hi: f64| -> Slot {
        Box::new(move |rng| {
            let v = (speed + rng.random_range(dv_lo..dv_hi)).clamp(20.0, 30.0);
            cruise(rng.random_range(x_lo..x_hi), y, 0.0, v)
        })
    };
    let slots: Vec<Slot> = vec![
        lane_vehicle(LANE, 28.0, 50.0, 0.0, 3.0),
        lane_vehicle(LANE, -45.0, -28.0, -3.0, 0.0),
        lane_vehicle(0.0, 30.0, 50.0, 0.0, 3.0),
        lane_vehicle(0.0, -40.0, -25.0, -2.0, 0.0),
        lane_vehicle(-LANE, -25.0, 25.0, -4.0, 4.0),
        lane_vehicle(-LANE, 30.0, 60.0, -2.0, 2.0),
        lane_vehicle(LANE, 65.0, 95.0, -1.0, 2.0),
        lane_vehicle(LANE, -90.0, -55.0, -2.0, 2.0),
    ];
    (ego, slots)
}

/// U-turn from the eastbound inner lane into the westbound outer lane.
fn u_turn(rng: &mut ChaCha8Rng) -> (Vec<VehicleState>, Vec<Slot>) {
    const RADIUS: f64 = LANE;
    let approach = rng.random_range(8.0..11.0);
    let turn_speed = rng.random_range(3.5..4.5);
    let ego = Driver::new(rng.random_range(-40.0..-30.0), -HALF_LANE, 0.0, approach)
        .drive_while(|s| s.x < 0.0, turn_speed, 2.0)
        .turn_by(PI, RADIUS, turn_speed, 2.0)
        .drive(SCENE_STEPS, 10.0, 1.5)
        .finish();

    // Westbound vehicle reaching x = 0 at `t_cross` seconds.
    let westbound = |y: f64, lo: f64, hi: f64| -> Slot {
        Box::new(move |rng| {
            let v = rng.random_range(8.0..12.0);
            let t = rng.random_range(lo..hi);
            cruise(v * t, y, PI, v)
        })
    };
    let slots: Vec<Slot> = vec![
        westbound(HALF_LANE, 0.5, 3.0),
        westbound(HALF_LANE, 11.0, 14.0),
        westbound(HALF_LANE + LANE, 0.5, 3.0),
        westbound(HALF_LANE + LANE, 13.0, 16.0),
        Box::new(|rng| {
            let v = rng.random_range(8.0..12.0);
            cruise(rng.random_range(-50.0..-10.0), -HALF_LANE - LANE, 0.0, v)
        }),
        // Follower that slows behind the ego, then continues straight.
        Box::new(move |rng| {
            Driver::new(rng.random_range(-75.0..-60.0), -HALF_LANE, 0.0, approach)
                .drive_while(|s| s.x < -12.0, turn_speed, 2.0)
                .drive(SCENE_STEPS, 8.0, 1.0)
                .finish()
        }),
        Box::new(|rng| {
            let v = rng.random_range(8.0..11.0);
            cruise(rng.random_range(15.0..35.0), -HALF_LANE, 0.0, v)
        }),
        Box::new(|rng| {
            let v = rng.random_range(8.0..12.0);
            cruise(rng.random_range(10.0..40.0), -HALF_LANE - LANE, 0.0, v)
        }),
    ];
    (ego, slots)
}
