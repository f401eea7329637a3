//! CMA-ES for bounded minimization on the unit hypercube.
//!
//! Candidates are sampled from N(m, σ²C), clamped to [0, 1] for evaluation,
//! and the unclamped samples drive the update. Strategy constants are the
//! usual defaults (log-rank weights over the best ⌊λ/2⌋, cumulative
//! step-size adaptation, rank-one plus rank-μ covariance update).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Largest eigenvalue ratio tolerated before C is repaired.
const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMode {
    /// Stop after `patience` consecutive generations that each improve the
    /// running best by less than `min_improvement`.
    Consecutive,
    /// Stop once the running best improved by less than `min_improvement`
    /// over the last `patience` generations combined.
    Window,
    Disabled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaConfig {
    pub dim: usize,
    pub population: usize,
    pub sigma0: f64,
    /// Initial mean; all 0.5 when `None`.
    pub mean0: Option<Vec<f64>>,
    pub max_generations: usize,
    pub patience: usize,
    pub min_improvement: f64,
    pub stop_mode: StopMode,
    pub seed: u64,
}

impl CmaConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            population: 64,
            sigma0: 0.3,
            mean0: None,
            max_generations: 25,
            patience: 10,
            min_improvement: 0.1,
            stop_mode: StopMode::Consecutive,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be positive");
        }
        if !(self.min_improvement > 0.0) {
            return bad("min_improvement must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if let Some(m) = &self.mean0 {
            if m.len() != self.dim {
                return Err(Error::DimensionMismatch(m.len(), self.dim));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CmaState {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    /// Eigenvectors of C (columns).
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of C.
    scales: DVector<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: usize,
    /// Raw (unclamped) samples from the last `ask`.
    pending: Vec<DVector<f64>>,
}

impl CmaState {
    pub fn new(mean: &[f64], sigma: f64, lambda: usize) -> Self {
        let n = mean.len();
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Self {
            dim: n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_column_slice(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            pending: Vec::new(),
        }
    }

    /// Replace C (symmetrized) and refresh its eigendecomposition.
    pub fn set_covariance(&mut self, cov: &DMatrix<f64>) -> Result<()> {
        if cov.nrows() != self.dim || cov.ncols() != self.dim {
            return Err(Error::DimensionMismatch(cov.nrows(), self.dim));
        }
        self.cov = (cov + cov.transpose()) * 0.5;
        self.refresh_eigen();
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
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

    pub fn population(&self) -> usize {
        self.lambda
    }

    pub fn parents(&self) -> usize {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Unclamped samples from the most recent [`ask`](Self::ask).
    pub fn raw_candidates(&self) -> Vec<Vec<f64>> {
        self.pending.iter().map(|v| v.as_slice().to_vec()).collect()
    }

    fn refresh_eigen(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let max = eig.eigenvalues.max();
        let floor = if max > 0.0 { max / MAX_CONDITION } else { 1e-300 };
        let needs_repair = eig.eigenvalues.iter().any(|&e| !(e >= floor));
        let values = eig.eigenvalues.map(|e| if e >= floor { e } else { floor });
        self.basis = eig.eigenvectors;
        if needs_repair {
            let d = DMatrix::from_diagonal(&values);
            let c = &self.basis * d * self.basis.transpose();
            self.cov = (&c + c.transpose()) * 0.5;
        }
        self.scales = values.map(f64::sqrt);
    }

    /// Draw λ candidates. Returned vectors are clamped to [0, 1].
    pub fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        self.pending = (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| rng.normal());
                let y = &self.basis * z.component_mul(&self.scales);
                &self.mean + y * self.sigma
            })
            .collect();
        self.pending
            .iter()
            .map(|x| x.iter().map(|v| v.clamp(0.0, 1.0)).collect())
            .collect()
    }

    /// Update from the fitnesses of the last `ask`, in candidate order.
    pub fn tell(&mut self, fitnesses: &[f64]) -> Result<()> {
        if fitnesses.len() != self.pending.len() {
            return Err(Error::DimensionMismatch(fitnesses.len(), self.pending.len()));
        }
        if let Some(i) = fitnesses.iter().position(|f| !f.is_finite()) {
            return Err(Error::NonFiniteFitness(i));
        }
        let n = self.dim as f64;
        let mut order: Vec<usize> = (0..fitnesses.len()).collect();
        order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]));

        let steps: Vec<DVector<f64>> = order[..self.mu]
            .iter()
            .map(|&i| (&self.pending[i] - &self.mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(self.dim);
        for (w, y) in self.weights.iter().zip(&steps) {
            y_w += y * *w;
        }
        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w = B D⁻¹ Bᵀ y_w
        let whitened = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.scales);
        self.p_sigma = &self.p_sigma * (1.0 - self.c_sigma)
            + whitened * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();

        self.generation += 1;
        let ps_norm = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - self.c_sigma).powi(2 * self.generation as i32);
        let h_sigma = ps_norm / decay.sqrt() < (1.4 + 2.0 / (n + 1.0)) * self.chi_n;

        self.p_c = &self.p_c * (1.0 - self.c_c);
        if h_sigma {
            self.p_c += &y_w * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt();
        }
        let delta = if h_sigma { 0.0 } else { self.c_c * (2.0 - self.c_c) };

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, y) in self.weights.iter().zip(&steps) {
            rank_mu.ger(*w, y, y, 1.0);
        }
        let keep = 1.0 + self.c_1 * delta - self.c_1 - self.c_mu;
        let mut cov = &self.cov * keep + rank_mu * self.c_mu;
        cov.ger(self.c_1, &self.p_c, &self.p_c, 1.0);
        self.cov = (&cov + cov.transpose()) * 0.5;

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.refresh_eigen();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Running best after this generation.
    pub best: f64,
    /// Mean fitness of this generation's population.
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxGenerations,
    EarlyStop,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxGenerations => "max_generations",
            StopReason::EarlyStop => "early_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Objective at the (clamped) initial mean, evaluated before generation 1.
    pub initial_value: f64,
    pub history: Vec<GenerationStats>,
    pub stop_reason: StopReason,
    /// Population evaluations (λ × generations); excludes the initial-mean probe.
    pub evaluations: usize,
}

impl OptResult {
    pub fn generations(&self) -> usize {
        self.history.len()
    }

    /// Tab-separated convergence table with a header row.
    pub fn history_tsv(&self) -> String {
        let mut out = String::from("generation\tbest\tmean\tsigma\n");
        for h in &self.history {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", h.generation, h.best, h.mean, h.sigma);
        }
        out
    }
}

fn should_stop(cfg: &CmaConfig, bests: &[f64], stale: usize) -> bool {
    match cfg.stop_mode {
        StopMode::Disabled => false,
        StopMode::Consecutive => stale >= cfg.patience,
        StopMode::Window => {
            // bests[0] is the initial value, bests[g] the running best after generation g
            let g = bests.len() - 1;
            g >= cfg.patience && bests[g - cfg.patience] - bests[g] < cfg.min_improvement
        }
    }
}

/// Minimize `objective` over [0, 1]^dim.
///
/// Evaluations within a generation run on the rayon pool; results are
/// gathered in candidate order, so the outcome does not depend on thread
/// count.
pub fn optimize<F>(objective: F, cfg: &CmaConfig) -> Result<OptResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mean0 = cfg.mean0.clone().unwrap_or_else(|| vec![0.5; cfg.dim]);
    let mut state = CmaState::new(&mean0, cfg.sigma0, cfg.population);
    let mut rng = Rng::new(cfg.seed);

    let start: Vec<f64> = mean0.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let initial_value = objective(&start)?;
    if !initial_value.is_finite() {
        return Err(Error::NonFiniteFitness(0));
    }
    let mut best_params = start;
    let mut best_value = initial_value;
    let mut bests = vec![initial_value];
    let mut history = Vec::new();
    let mut stale = 0;
    let mut stop_reason = StopReason::MaxGenerations;

    for generation in 1..=cfg.max_generations {
        let candidates = state.ask(&mut rng);
        let fitnesses = candidates
            .par_iter()
            .map(|c| objective(c))
            .collect::<Result<Vec<f64>>>()?;
        state.tell(&fitnesses)?;

        let previous = best_value;
        for (c, &f) in candidates.iter().zip(&fitnesses) {
            if f < best_value {
                best_value = f;
                best_params = c.clone();
            }
        }
        if previous - best_value < cfg.min_improvement {
            stale += 1;
        } else {
            stale = 0;
        }
        bests.push(best_value);
        history.push(GenerationStats {
            generation,
            best: best_value,
            mean: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
            sigma: state.sigma(),
        });
        if should_stop(cfg, &bests, stale) {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    Ok(OptResult {
        best_params,
        best_value,
        initial_value,
        evaluations: history.len() * cfg.population,
        history,
        stop_reason,
    })
}
