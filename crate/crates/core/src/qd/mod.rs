//! Quality-diversity search: grid archive, CMA-ME emitter, occupancy-aware
//! restarts, and the loop tying them to the simulator.

pub mod archive;
pub mod emitter;
pub mod oar;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CadreError, Result};
use crate::metrics::MetricRow;
use crate::scenario::{PerturbationBounds, Scenario};
use crate::sim::{EgoPolicyConfig, Evaluate, Simulator, SteeringMeasure};

pub use archive::{archive_index, Elite, GridArchive, InsertResult, MeasureAxis, MeasureSpec};
pub use emitter::{rank_parents, CmaEmitter, EmitterConfig, Parent};
pub use oar::{
    neighbor_empty_rates, oar_restart, restart_probabilities, sample_restart, OarConfig,
};

/// Default candidates per iteration.
pub const DEFAULT_BATCH_SIZE: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CadreConfig {
    /// Total number of simulations.
    pub budget: usize,
    pub batch_size: usize,
    pub measures: MeasureSpec,
    pub oar: OarConfig,
    pub bounds: PerturbationBounds,
    pub seed: u64,
    pub emitter: EmitterConfig,
    pub ego: EgoPolicyConfig,
    pub steering_measure: SteeringMeasure,
}

impl Default for CadreConfig {
    fn default() -> Self {
        Self {
            budget: 20_000,
            batch_size: DEFAULT_BATCH_SIZE,
            measures: MeasureSpec::default(),
            oar: OarConfig::default(),
            bounds: PerturbationBounds::default(),
            seed: 0,
            emitter: EmitterConfig::default(),
            ego: EgoPolicyConfig::default(),
            steering_measure: SteeringMeasure::default(),
        }
    }
}

impl CadreConfig {
    pub fn validate(&self) -> Result<()> {
        validate_budget(self.budget, self.batch_size)?;
        self.measures.validate()?;
        self.oar.validate()?;
        self.bounds.validate()?;
        if !(self.emitter.sigma0 > 0.0 && self.emitter.init_spread > 0.0) {
            return Err(CadreError::InvalidConfig(format!(
                "emitter step size and spread must be positive, got {:?}",
                self.emitter
            )));
        }
        Ok(())
    }
}

pub(crate) fn validate_budget(budget: usize, batch_size: usize) -> Result<()> {
    if batch_size == 0 || budget < batch_size {
        Err(CadreError::InvalidConfig(format!(
            "need budget >= batch size >= 1, got budget {budget}, batch size {batch_size}"
        )))
    } else {
        Ok(())
    }
}

/// Final archive and one metric row per iteration.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub archive: GridArchive,
    pub log: Vec<MetricRow>,
    pub restarts: usize,
}

/// Fill an archive for `target` in `scenario`.
pub fn run_cadre(scenario: &Scenario, target: usize, config: &CadreConfig) -> Result<RunOutput> {
    config.validate()?;
    let sim = Simulator::new(scenario, target, config.ego, config.bounds)?
        .with_steering_measure(config.steering_measure);
    run_cadre_with(&sim, config)
}

/// The search loop against any evaluator.
pub fn run_cadre_with<E: Evaluate + ?Sized>(
    evaluator: &E,
    config: &CadreConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let mut archive = GridArchive::new(config.measures)?;
    let mut emitter = CmaEmitter::new(
        evaluator.dimension(),
        evaluator.bounds(),
        config.emitter,
        config.seed,
    );
    let mut restart_rng = ChaCha8Rng::seed_from_u64(config.seed);
    restart_rng.set_stream(1);

    let mut log = Vec::new();
    let mut spent = 0;
    while spent < config.budget {
        let count = config.batch_size.min(config.budget - spent);
        let thetas = match emitter.ask(config.batch_size) {
            Ok(batch) => batch,
            Err(_) => {
                restart(&mut emitter, &archive, &config.oar, &mut restart_rng);
                emitter
                    .ask(config.batch_size)
                    .expect("freshly restarted emitter has a valid covariance")
            }
        };
        let thetas = &thetas[..count];
        let evaluations = evaluator.evaluate_batch(thetas);
        let results: Vec<InsertResult> = evaluations
            .iter()
            .map(|e| archive.insert(&e.theta, e.objective, e.measures))
            .collect();
        let evaluated: Vec<Vec<f64>> = evaluations.into_iter().map(|e| e.theta).collect();
        if emitter.tell(&evaluated, &results) {
            restart(&mut emitter, &archive, &config.oar, &mut restart_rng);
        }
        spent += count;
        log.push(MetricRow::from_archive(&archive));
    }

    Ok(RunOutput {
        archive,
        log,
        restarts: emitter.restarts(),
    })
}

fn restart(emitter: &mut CmaEmitter, archive: &GridArchive, oar: &OarConfig, rng: &mut ChaCha8Rng) {
    match oar_restart(archive, oar, rng) {
        Some(elite) => emitter.restart_from(&elite.theta),
        None => emitter.restart_fresh(),
    }
}
