//! CMA-ME emitter with improvement ranking.
//!
//! Search happens in a normalised space where coordinate `k` is
//! `theta_k / scale_k`, with `scale_k` a fixed fraction of the bound interval.
//! An identity covariance there gives every coordinate the same relative spread.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cma::CmaState;
use crate::qd::archive::InsertResult;
use crate::scenario::PerturbationBounds;

/// One standard deviation as a fraction of each coordinate's bound interval.
pub const DEFAULT_INIT_SPREAD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitterConfig {
    pub sigma0: f64,
    pub init_spread: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            init_spread: DEFAULT_INIT_SPREAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EmitterError {
    #[error("emitter covariance is no longer positive definite")]
    Degenerate,
}

/// A solution that entered the archive during the last batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Parent {
    /// Position in the batch.
    pub index: usize,
    pub new_cell: bool,
    pub delta: f64,
}

/// Keep accepted results and order them: every new-cell discovery first, then
/// improvements, each group by descending Δ. Equal keys keep batch order.
pub fn rank_parents(results: &[InsertResult]) -> Vec<Parent> {
    let mut parents: Vec<Parent> = results
        .iter()
        .enumerate()
        .filter_map(|(index, r)| match *r {
            InsertResult::NewCell { delta } => Some(Parent {
                index,
                new_cell: true,
                delta,
            }),
            InsertResult::Improved { delta } => Some(Parent {
                index,
                new_cell: false,
                delta,
            }),
            InsertResult::Rejected => None,
        })
        .collect();
    parents.sort_by(|a, b| {
        b.new_cell
            .cmp(&a.new_cell)
            .then(b.delta.total_cmp(&a.delta))
    });
    parents
}

#[derive(Debug, Clone)]
pub struct CmaEmitter {
    cma: CmaState,
    scale: Vec<f64>,
    bounds: PerturbationBounds,
    config: EmitterConfig,
    rng: ChaCha8Rng,
    restarts: usize,
}

impl CmaEmitter {
    /// Zero-mean emitter over `dim` interleaved (accel, steer) coordinates.
    pub fn new(dim: usize, bounds: PerturbationBounds, config: EmitterConfig, seed: u64) -> Self {
        let scale = (0..dim)
            .map(|k| config.init_spread * 2.0 * bounds.coordinate_bound(k))
            .collect();
        Self {
            cma: CmaState::new(DVector::zeros(dim), config.sigma0),
            scale,
            bounds,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            restarts: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn cma(&self) -> &CmaState {
        &self.cma
    }

    /// Current sampling mean in decision-space coordinates.
    pub fn mean_theta(&self) -> Vec<f64> {
        self.to_theta(self.cma.mean())
    }

    fn to_theta(&self, x: &DVector<f64>) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    fn to_normalized(&self, theta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            theta.len(),
            theta.iter().zip(&self.scale).map(|(v, s)| v / s),
        )
    }

    /// Draw `count` decision vectors, clamped into the perturbation bounds.
    pub fn ask(&mut self, count: usize) -> Result<Vec<Vec<f64>>, EmitterError> {
        if self.cma.is_degenerate() {
            return Err(EmitterError::Degenerate);
        }
        let samples = self.cma.sample(&mut self.rng, count);
        Ok(samples
            .iter()
            .map(|x| {
                let mut theta = self.to_theta(x);
                self.bounds.clamp_flat(&mut theta);
                theta
            })
            .collect())
    }

    /// Adapt from the archive's verdict on each evaluated theta.
    ///
    /// Returns `true` when nothing entered the archive; the distribution is left
    /// untouched and the caller is expected to restart the emitter.
    pub fn tell(&mut self, thetas: &[Vec<f64>], results: &[InsertResult]) -> bool {
        let ranked = rank_parents(results);
        if ranked.is_empty() {
            return true;
        }
        let keep = ranked.len().div_ceil(2);
        let selected: Vec<DVector<f64>> = ranked[..keep]
            .iter()
            .map(|p| self.to_normalized(&thetas[p.index]))
            .collect();
        self.cma.update(&selected, results.len());
        false
    }

    /// Recentre on `theta` with a fresh covariance and step size.
    pub fn restart_from(&mut self, theta: &[f64]) {
        let mean = self.to_normalized(theta);
        self.cma.reset(mean, self.config.sigma0);
        self.restarts += 1;
    }

    /// Recentre on the recorded scene (zero perturbation).
    pub fn restart_fresh(&mut self) {
        self.cma
            .reset(DVector::zeros(self.dim()), self.config.sigma0);
        self.restarts += 1;
    }
}
