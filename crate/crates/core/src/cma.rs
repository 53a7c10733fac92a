//! Covariance matrix adaptation core shared by the CMA-ME emitter and the
//! CMA-ES baseline.
//!
//! The state knows nothing about objectives or archives: callers sample, rank
//! the samples their own way, and hand back the selected ones best-first.
//! Strategy parameters follow Hansen's default settings and are recomputed on
//! every update from the number of selected samples, because the emitter's
//! parent count varies per iteration. The eigendecomposition is refreshed lazily.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest tolerated covariance condition number.
const MAX_CONDITION: f64 = 1e14;

/// Strategy parameters for one update with `mu` selected samples in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
}

/// Log-linear recombination weights for `mu` samples, summing to one.
pub fn recombination_weights(mu: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

impl StrategyParams {
    pub fn new(n: usize, weights: &[f64]) -> Self {
        let n = n as f64;
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        Self {
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CmaState {
    dim: usize,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    /// Eigenvectors of `cov` as columns.
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of `cov`.
    axis_scales: DVector<f64>,
    generation: usize,
    evals_since_eigen: usize,
    degenerate: bool,
    expected_norm: f64,
}

impl CmaState {
    /// Identity covariance around `mean` with step size `sigma`.
    pub fn new(mean: DVector<f64>, sigma: f64) -> Self {
        let n = mean.len();
        let nf = n as f64;
        Self {
            dim: n,
            sigma,
            cov: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            axis_scales: DVector::from_element(n, 1.0),
            generation: 0,
            evals_since_eigen: 0,
            degenerate: !(sigma > 0.0 && sigma.is_finite()),
            expected_norm: nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf)),
            mean,
        }
    }

    /// Discard all adaptation and start over from `mean`.
    pub fn reset(&mut self, mean: DVector<f64>, sigma: f64) {
        *self = Self::new(mean, sigma);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// True once the distribution can no longer be sampled meaningfully:
    /// non-finite values, a non-positive eigenvalue, or extreme conditioning.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Draw `count` points from N(mean, σ² C).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<DVector<f64>> {
        (0..count)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |i, _| {
                    let draw: f64 = rng.sample(StandardNormal);
                    draw * self.axis_scales[i]
                });
                &self.mean + (&self.basis * z) * self.sigma
            })
            .collect()
    }

    /// Adapt towards `selected`, ordered best first. `population` is the number
    /// of samples the selection was drawn from (it only sets the eigen refresh cadence).
    pub fn update(&mut self, selected: &[DVector<f64>], population: usize) {
        if selected.is_empty() {
            return;
        }
        let n = self.dim;
        let weights = recombination_weights(selected.len());
        let p = StrategyParams::new(n, &weights);

        let steps: Vec<DVector<f64>> = selected
            .iter()
            .map(|x| (x - &self.mean) / self.sigma)
            .collect();
        let mut step_w = DVector::zeros(n);
        for (w, y) in weights.iter().zip(&steps) {
            step_w.axpy(*w, y, 1.0);
        }
        self.mean.axpy(self.sigma, &step_w, 1.0);

        // C^{-1/2} y_w through the (possibly stale) eigenbasis.
        let mut whitened = self.basis.tr_mul(&step_w);
        whitened.component_div_assign(&self.axis_scales);
        let whitened = &self.basis * whitened;

        self.path_sigma *= 1.0 - p.c_sigma;
        self.path_sigma.axpy(
            (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt(),
            &whitened,
            1.0,
        );

        self.generation += 1;
        let ps_norm = self.path_sigma.norm();
        let correction = (1.0 - (1.0 - p.c_sigma).powi(2 * self.generation as i32)).sqrt();
        let stalled = ps_norm / correction / self.expected_norm < 1.4 + 2.0 / (n as f64 + 1.0);
        let h_sigma = if stalled { 1.0 } else { 0.0 };

        self.path_c *= 1.0 - p.c_c;
        self.path_c.axpy(
            h_sigma * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt(),
            &step_w,
            1.0,
        );

        let decay = 1.0 - p.c_1 - p.c_mu + (1.0 - h_sigma) * p.c_1 * p.c_c * (2.0 - p.c_c);
        let weighted_steps =
            DMatrix::from_fn(n, steps.len(), |i, k| weights[k].sqrt() * steps[k][i]);
        self.cov
            .gemm(p.c_mu, &weighted_steps, &weighted_steps.transpose(), decay);
        self.cov.ger(p.c_1, &self.path_c, &self.path_c, 1.0);

        let exponent = (p.c_sigma / p.d_sigma) * (ps_norm / self.expected_norm - 1.0);
        self.sigma *= exponent.min(1.0).exp();

        self.evals_since_eigen += population;
        let lazy_gap = 0.5 * population as f64 / ((p.c_1 + p.c_mu) * n as f64);
        if self.evals_since_eigen as f64 >= lazy_gap {
            self.refresh_eigen();
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) || !self.mean.iter().all(|v| v.is_finite())
        {
            self.degenerate = true;
        }
    }

    fn refresh_eigen(&mut self) {
        self.evals_since_eigen = 0;
        let symmetric = (&self.cov + self.cov.transpose()) * 0.5;
        if !symmetric.iter().all(|v| v.is_finite()) {
            self.degenerate = true;
            return;
        }
        let eig = SymmetricEigen::new(symmetric.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        // NaN eigenvalues count as degenerate.
        if min.is_nan() || min <= 0.0 || max / min > MAX_CONDITION {
            self.degenerate = true;
            return;
        }
        self.cov = symmetric;
        self.basis = eig.eigenvectors;
        self.axis_scales = eig.eigenvalues.map(f64::sqrt);
    }
}
