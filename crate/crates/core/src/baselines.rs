//! Baseline optimizers run under the same archive and metric protocol as CaDRE:
//! uniform random search and an objective-only CMA-ES.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cma::CmaState;
use crate::error::Result;
use crate::metrics::MetricRow;
use crate::qd::archive::{GridArchive, MeasureSpec};
use crate::qd::emitter::DEFAULT_INIT_SPREAD;
use crate::qd::{validate_budget, RunOutput, DEFAULT_BATCH_SIZE};
use crate::scenario::{PerturbationBounds, Scenario};
use crate::sim::{EgoPolicyConfig, Evaluate, Simulator, SteeringMeasure};

/// Iterations without a new best objective before CMA-ES restarts.
pub const STAGNATION_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Random,
    CmaEs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub budget: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub bounds: PerturbationBounds,
    pub measures: MeasureSpec,
    pub ego: EgoPolicyConfig,
    pub steering_measure: SteeringMeasure,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            budget: 20_000,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            bounds: PerturbationBounds::default(),
            measures: MeasureSpec::default(),
            ego: EgoPolicyConfig::default(),
            steering_measure: SteeringMeasure::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_budget(self.budget, self.batch_size)?;
        self.measures.validate()?;
        self.bounds.validate()
    }
}

/// Run whichever baseline `config.method` names.
pub fn run_baseline(
    scenario: &Scenario,
    target: usize,
    config: &BaselineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let sim = Simulator::new(scenario, target, config.ego, config.bounds)?
        .with_steering_measure(config.steering_measure);
    run_baseline_with(&sim, config)
}

pub fn run_baseline_with<E: Evaluate + ?Sized>(
    evaluator: &E,
    config: &BaselineConfig,
) -> Result<RunOutput> {
    match config.method {
        BaselineMethod::Random => run_random_with(evaluator, config),
        BaselineMethod::CmaEs => run_cmaes_with(evaluator, config),
    }
}

pub fn run_random(
    scenario: &Scenario,
    target: usize,
    config: &BaselineConfig,
) -> Result<RunOutput> {
    run_baseline(
        scenario,
        target,
        &BaselineConfig {
            method: BaselineMethod::Random,
            ..*config
        },
    )
}

pub fn run_cmaes(scenario: &Scenario, target: usize, config: &BaselineConfig) -> Result<RunOutput> {
    run_baseline(
        scenario,
        target,
        &BaselineConfig {
            method: BaselineMethod::CmaEs,
            ..*config
        },
    )
}

/// Coordinatewise uniform theta over the bound intervals.
pub fn sample_uniform<R: Rng + ?Sized>(
    dim: usize,
    bounds: &PerturbationBounds,
    rng: &mut R,
) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let b = bounds.coordinate_bound(k);
            rng.random_range(-b..=b)
        })
        .collect()
}

/// Evaluate a batch, insert every result, and log one metric row.
fn evaluate_into<E: Evaluate + ?Sized>(
    evaluator: &E,
    thetas: &[Vec<f64>],
    archive: &mut GridArchive,
    log: &mut Vec<MetricRow>,
) -> Vec<f64> {
    let evaluations = evaluator.evaluate_batch(thetas);
    for e in &evaluations {
        archive.insert(&e.theta, e.objective, e.measures);
    }
    log.push(MetricRow::from_archive(archive));
    evaluations.into_iter().map(|e| e.objective).collect()
}

pub fn run_random_with<E: Evaluate + ?Sized>(
    evaluator: &E,
    config: &BaselineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let mut archive = GridArchive::new(config.measures)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = evaluator.dimension();
    let bounds = evaluator.bounds();
    let mut log = Vec::new();
    let mut spent = 0;
    while spent < config.budget {
        let count = config.batch_size.min(config.budget - spent);
        let thetas: Vec<Vec<f64>> = (0..count)
            .map(|_| sample_uniform(dim, &bounds, &mut rng))
            .collect();
        evaluate_into(evaluator, &thetas, &mut archive, &mut log);
        spent += count;
    }
    Ok(RunOutput {
        archive,
        log,
        restarts: 0,
    })
}

/// CMA-ES maximising the objective alone, in the same normalised coordinates
/// as the CaDRE emitter. The archive is filled passively.
pub fn run_cmaes_with<E: Evaluate + ?Sized>(
    evaluator: &E,
    config: &BaselineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let mut archive = GridArchive::new(config.measures)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = evaluator.dimension();
    let bounds = evaluator.bounds();
    let scale: Vec<f64> = (0..dim)
        .map(|k| DEFAULT_INIT_SPREAD * 2.0 * bounds.coordinate_bound(k))
        .collect();
    let normalize =
        |theta: &[f64]| DVector::from_iterator(dim, theta.iter().zip(&scale).map(|(v, s)| v / s));

    let mut cma = CmaState::new(DVector::zeros(dim), 1.0);
    let mut best = f64::NEG_INFINITY;
    let mut stagnant = 0;
    let mut restarts = 0;
    let mut log = Vec::new();
    let mut spent = 0;
    while spent < config.budget {
        if cma.is_degenerate() || stagnant >= STAGNATION_LIMIT {
            let mean = normalize(&sample_uniform(dim, &bounds, &mut rng));
            cma.reset(mean, 1.0);
            best = f64::NEG_INFINITY;
            stagnant = 0;
            restarts += 1;
        }
        let count = config.batch_size.min(config.budget - spent);
        let thetas: Vec<Vec<f64>> = cma
            .sample(&mut rng, count)
            .iter()
            .map(|x| {
                let mut theta: Vec<f64> = x.iter().zip(&scale).map(|(v, s)| v * s).collect();
                bounds.clamp_flat(&mut theta);
                theta
            })
            .collect();
        let objectives = evaluate_into(evaluator, &thetas, &mut archive, &mut log);
        spent += count;

        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| objectives[b].total_cmp(&objectives[a]));
        let batch_best = objectives[order[0]];
        if batch_best > best {
            best = batch_best;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        let selected: Vec<DVector<f64>> = order[..count.div_ceil(2)]
            .iter()
            .map(|&i| normalize(&thetas[i]))
            .collect();
        cma.update(&selected, count);
    }
    Ok(RunOutput {
        archive,
        log,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Evaluation, MeasureValues, OutcomeKind};
    use std::f64::consts::PI;

    /// Objective peaks at theta = 0.3 per coordinate; measures spread over the grid.
    struct Bowl;

    impl Evaluate for Bowl {
        fn dimension(&self) -> usize {
            6
        }
        fn bounds(&self) -> PerturbationBounds {
            PerturbationBounds::default()
        }
        fn evaluate(&self, theta: &[f64]) -> Evaluation {
            let d: f64 = theta.iter().map(|v| (v - 0.3).powi(2)).sum();
            Evaluation {
                theta: theta.to_vec(),
                objective: (-d).exp(),
                measures: MeasureValues::new(
                    theta[1].abs(),
                    (theta[0] + 2.0) / 4.0,
                    theta[2] * 1.5,
                ),
                kind: OutcomeKind::NoCollision,
            }
        }
    }

    fn config(method: BaselineMethod, budget: usize) -> BaselineConfig {
        BaselineConfig {
            budget,
            seed: 4,
            ..BaselineConfig::new(method)
        }
    }

    #[test]
    fn budget_one_gives_one_elite() {
        let out = run_random_with(
            &Bowl,
            &BaselineConfig {
                batch_size: 1,
                ..config(BaselineMethod::Random, 1)
            },
        )
        .unwrap();
        assert_eq!(out.archive.len(), 1);
        assert_eq!(out.archive.evaluations(), 1);
    }

    #[test]
    fn budgets_are_spent_exactly() {
        for method in [BaselineMethod::Random, BaselineMethod::CmaEs] {
            let out = run_baseline_with(&Bowl, &config(method, 100)).unwrap();
            assert_eq!(out.archive.evaluations(), 100);
            assert_eq!(out.log.last().unwrap().evaluations, 100);
            assert_eq!(out.log.len(), 3);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        for method in [BaselineMethod::Random, BaselineMethod::CmaEs] {
            let a = run_baseline_with(&Bowl, &config(method, 360)).unwrap();
            let b = run_baseline_with(&Bowl, &config(method, 360)).unwrap();
            assert_eq!(a.archive, b.archive);
        }
    }

    #[test]
    fn cmaes_climbs_the_objective() {
        let out = run_cmaes_with(&Bowl, &config(BaselineMethod::CmaEs, 3600)).unwrap();
        let best = out
            .archive
            .elites()
            .map(|e| e.objective)
            .fold(0.0, f64::max);
        assert!(best > 0.99, "best {best}");
    }

    #[test]
    fn uniform_samples_cover_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bounds = PerturbationBounds::default();
        for _ in 0..100 {
            let theta = sample_uniform(300, &bounds, &mut rng);
            for (k, v) in theta.iter().enumerate() {
                let b = if k % 2 == 0 { 2.0 } else { PI / 8.0 };
                assert!(v.abs() <= b);
            }
        }
    }

    #[test]
    fn rejects_budget_below_batch() {
        assert!(run_random_with(&Bowl, &config(BaselineMethod::Random, 10)).is_err());
    }
}
