//! Quality-diversity generation of safety-critical driving scenarios.
//!
//! A recorded scene is turned into a black-box problem: the decision variable is
//! a bounded sequence of (acceleration, steering) deltas applied to one
//! background vehicle, the simulator scores how critical the resulting scenario
//! is, and three behaviour measures place it in a grid archive. The
//! [`qd`] module fills that archive with a CMA-ME style search and
//! occupancy-aware restarts; [`baselines`] provides random search and CMA-ES
//! under the same evaluation and archive code paths.

pub mod baselines;
pub mod cma;
pub mod config;
pub mod error;
pub mod metrics;
pub mod persist;
pub mod qd;
pub mod scenario;
pub mod scenes;
pub mod sim;

pub use baselines::{run_cmaes, run_random, BaselineConfig, BaselineMethod};
pub use config::{Method, RunConfig, TargetSelection};
pub use error::{CadreError, Result};
pub use metrics::{
    coverage, mean_objective, qd_score, retrieve, select_targets, MetricRow, RetrieveMode,
};
pub use persist::{
    load_archive, load_scenario, save_archive, save_scenario, write_archive_export,
    write_metrics_csv, write_trajectory_export, ArchiveMeta,
};
pub use qd::archive::{archive_index, Elite, GridArchive, InsertResult, MeasureSpec};
pub use qd::{run_cadre, run_cadre_with, CadreConfig, OarConfig, RunOutput};
pub use scenario::{
    apply_perturbation, bicycle_step, recover_actions, rollout, Action, Perturbation,
    PerturbationBounds, Scenario, VehicleGeometry, VehicleState,
};
pub use scenes::{make_synthetic_scene, SceneKind};
pub use sim::{
    objective, simulate, EgoPolicyConfig, Evaluate, Evaluation, MeasureValues, OutcomeKind,
    SimOutcome, SimResult, Simulator, SteeringMeasure,
};
