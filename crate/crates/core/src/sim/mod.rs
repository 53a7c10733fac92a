//! Closed-loop traffic simulation of one perturbed background vehicle.
//!
//! Non-target background vehicles replay their recorded states verbatim, the
//! target follows its recovered actions plus the perturbation, and the ego runs
//! the reactive policy in [`ego`]. The run stops at the first collision.

pub mod collision;
pub mod ego;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::{
    apply_perturbation, bicycle_step, recover_actions, Action, Perturbation, PerturbationBounds,
    Scenario, VehicleState,
};

pub use collision::check_collision;
pub use ego::{ego_policy_step, EgoPolicyConfig, ReferencePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    EgoCollision,
    BackgroundCollision,
    NoCollision,
}

/// Ego and target states at one simulated step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub ego: VehicleState,
    pub target: VehicleState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub kind: OutcomeKind,
    /// First colliding step, or the step of minimum ego distance without collision.
    pub t_impact: usize,
    pub min_ego_distance: f64,
    /// Horizon of the scenario the outcome was produced from.
    pub horizon: usize,
    pub trace: Vec<TraceStep>,
    /// Target actions after clamping and summation.
    pub applied_actions: Vec<Action>,
}

impl SimOutcome {
    /// Collision at the very first step: m1 falls back to the first delta.
    pub fn is_degenerate(&self) -> bool {
        self.t_impact == 0
    }
}

/// Behaviour descriptors of one simulated scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValues {
    /// Mean steering-perturbation magnitude before impact (rad).
    pub m1: f64,
    /// Impact time normalised by the horizon.
    pub m2: f64,
    /// Bearing of the target in the ego body frame at impact (rad).
    pub m3: f64,
}

impl MeasureValues {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Self {
        Self { m1, m2, m3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }
}

/// Which steering signal m1 averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteeringMeasure {
    /// Clamped perturbation deltas |Δδ|; range `[0, steer_bound]`.
    #[default]
    Perturbation,
    /// Total applied steering |δ|; range `[0, π/3]`, clipped by the archive.
    Total,
}

/// Safety-criticality of an outcome in `[0, 1]`.
pub fn objective(outcome: &SimOutcome) -> f64 {
    match outcome.kind {
        OutcomeKind::EgoCollision => 1.0,
        OutcomeKind::BackgroundCollision => 0.0,
        OutcomeKind::NoCollision => (-outcome.min_ego_distance).exp(),
    }
}

/// Measures using the perturbation-magnitude reading of m1.
pub fn measures(
    outcome: &SimOutcome,
    perturbation: &Perturbation,
    bounds: &PerturbationBounds,
) -> MeasureValues {
    measures_with(outcome, perturbation, bounds, SteeringMeasure::Perturbation)
}

pub fn measures_with(
    outcome: &SimOutcome,
    perturbation: &Perturbation,
    bounds: &PerturbationBounds,
    mode: SteeringMeasure,
) -> MeasureValues {
    let steer_at = |t: usize| -> f64 {
        match mode {
            SteeringMeasure::Perturbation => perturbation
                .deltas
                .get(t)
                .map_or(0.0, |d| bounds.clamp(*d).steer.abs()),
            SteeringMeasure::Total => outcome
                .applied_actions
                .get(t)
                .map_or(0.0, |a| a.steer.abs()),
        }
    };
    let t_impact = outcome.t_impact;
    let m1 = if t_impact == 0 {
        steer_at(0)
    } else {
        (0..t_impact).map(steer_at).sum::<f64>() / t_impact as f64
    };
    let m2 = t_impact as f64 / outcome.horizon as f64;
    let m3 = outcome
        .trace
        .get(t_impact)
        .map_or(0.0, |step| step.ego.bearing_to(&step.target));
    MeasureValues { m1, m2, m3 }
}

/// Result of one simulation: objective, measures and the raw outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub objective: f64,
    pub measures: MeasureValues,
    pub outcome: SimOutcome,
}

/// A scenario prepared for repeated evaluation against one target vehicle.
///
/// Recovers the target's actions once; every call to [`Simulator::run`] is pure.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    target: usize,
    recovered: Vec<Action>,
    ego_reference: Vec<VehicleState>,
    pub ego_policy: EgoPolicyConfig,
    pub bounds: PerturbationBounds,
    pub steering_measure: SteeringMeasure,
}

impl<'a> Simulator<'a> {
    pub fn new(
        scenario: &'a Scenario,
        target: usize,
        ego_policy: EgoPolicyConfig,
        bounds: PerturbationBounds,
    ) -> Result<Self> {
        scenario.validate()?;
        scenario.check_target(target)?;
        ego_policy.validate()?;
        bounds.validate()?;
        let recovered = recover_actions(
            &scenario.trajectory(target),
            scenario.geometries[target].wheelbase,
            scenario.dt,
        )?;
        Ok(Self {
            scenario,
            target,
            recovered,
            ego_reference: scenario.trajectory(0),
            ego_policy,
            bounds,
            steering_measure: SteeringMeasure::default(),
        })
    }

    pub fn with_steering_measure(mut self, mode: SteeringMeasure) -> Self {
        self.steering_measure = mode;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn recovered_actions(&self) -> &[Action] {
        &self.recovered
    }

    /// Length of the flat decision vector (two coordinates per step).
    pub fn dimension(&self) -> usize {
        2 * self.recovered.len()
    }

    pub fn run(&self, perturbation: &Perturbation) -> Result<SimResult> {
        self.scenario.check_target(perturbation.target)?;
        let actions = apply_perturbation(&self.recovered, perturbation, &self.bounds)?;
        let outcome = self.rollout_closed_loop(actions);
        Ok(SimResult {
            objective: objective(&outcome),
            measures: measures_with(&outcome, perturbation, &self.bounds, self.steering_measure),
            outcome,
        })
    }

    // The step index addresses the recorded states and the target actions alike.
    #[allow(clippy::needless_range_loop)]
    fn rollout_closed_loop(&self, actions: Vec<Action>) -> SimOutcome {
        let sc = self.scenario;
        let target = self.target;
        let horizon = sc.horizon();
        let geo = &sc.geometries;
        let reference = ReferencePath {
            states: &self.ego_reference,
            wheelbase: geo[0].wheelbase,
            dt: sc.dt,
        };

        let mut ego = sc.states[0][0];
        let mut tgt = sc.states[0][target];
        let mut trace = Vec::with_capacity(horizon + 1);
        let mut min_d = f64::INFINITY;
        let mut argmin = 0;
        let mut collision = None;

        for t in 0..=horizon {
            trace.push(TraceStep { ego, target: tgt });
            let d = ego.distance_to(&tgt);
            if d < min_d {
                min_d = d;
                argmin = t;
            }
            let row = &sc.states[t];
            if check_collision(&ego, &geo[0], &tgt, &geo[target]) {
                collision = Some((OutcomeKind::EgoCollision, t));
                break;
            }
            let hits_background = row.iter().enumerate().any(|(j, other)| {
                j != 0 && j != target && check_collision(&tgt, &geo[target], other, &geo[j])
            });
            if hits_background {
                collision = Some((OutcomeKind::BackgroundCollision, t));
                break;
            }
            if t == horizon {
                break;
            }

            let others = row
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, s)| if j == target { &tgt } else { s });
            let ego_action = ego_policy_step(&ego, &reference, t, others, &self.ego_policy);
            ego = bicycle_step(ego, ego_action, geo[0].wheelbase, sc.dt);
            ego.v = ego.v.max(0.0);
            tgt = bicycle_step(tgt, actions[t], geo[target].wheelbase, sc.dt);
        }

        let (kind, t_impact) = collision.unwrap_or((OutcomeKind::NoCollision, argmin));
        SimOutcome {
            kind,
            t_impact,
            min_ego_distance: min_d,
            horizon,
            trace,
            applied_actions: actions,
        }
    }

    /// Full state table of a simulated run: ego and target from the trace, the
    /// rest replayed. Truncated at the collision step.
    pub fn replay_states(&self, outcome: &SimOutcome) -> Vec<Vec<VehicleState>> {
        outcome
            .trace
            .iter()
            .enumerate()
            .map(|(t, step)| {
                let mut row = self.scenario.states[t].clone();
                row[0] = step.ego;
                row[self.target] = step.target;
                row
            })
            .collect()
    }
}

/// Evaluate one perturbation from scratch.
pub fn simulate(
    scenario: &Scenario,
    perturbation: &Perturbation,
    ego_policy: &EgoPolicyConfig,
    bounds: &PerturbationBounds,
) -> Result<SimResult> {
    Simulator::new(scenario, perturbation.target, *ego_policy, *bounds)?.run(perturbation)
}

/// One evaluated decision vector as consumed by the optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub measures: MeasureValues,
    pub kind: OutcomeKind,
}

/// Black-box evaluation of flat decision vectors.
///
/// Every optimizer in the crate goes through this trait, so wrapping it (for
/// example to count calls) observes all of them identically.
pub trait Evaluate: Sync {
    fn dimension(&self) -> usize;

    fn bounds(&self) -> PerturbationBounds;

    fn evaluate(&self, theta: &[f64]) -> Evaluation;

    /// Evaluate in parallel; results come back in input order.
    fn evaluate_batch(&self, thetas: &[Vec<f64>]) -> Vec<Evaluation> {
        thetas
            .par_iter()
            .map(|theta| self.evaluate(theta))
            .collect()
    }
}

impl Evaluate for Simulator<'_> {
    fn dimension(&self) -> usize {
        Simulator::dimension(self)
    }

    fn bounds(&self) -> PerturbationBounds {
        self.bounds
    }

    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let mut theta = theta.to_vec();
        self.bounds.clamp_flat(&mut theta);
        let perturbation = Perturbation::from_flat(&theta, self.target);
        let result = self
            .run(&perturbation)
            .expect("simulator validated its target and decision length at construction");
        Evaluation {
            theta,
            objective: result.objective,
            measures: result.measures,
            kind: result.outcome.kind,
        }
    }
}
