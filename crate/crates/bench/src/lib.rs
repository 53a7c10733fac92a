//! Shared fixtures for the criterion benchmarks.

use cadre_core::{make_synthetic_scene, select_targets, Scenario, SceneKind};

/// The cross-turn scene with seed 0 and its nearest background vehicle.
pub fn cross_turn_fixture() -> (Scenario, usize) {
    let scene = make_synthetic_scene(SceneKind::CrossTurn, 0).expect("bundled scene builds");
    let target = select_targets(&scene, 1)[0];
    (scene, target)
}
