//! Adaptive with Weighted Exploration (AWE) ε-greedy.
//!
//! Plain ε-greedy over an ordered arm set, with three additions driven by the
//! Q-history of the arm played greedily:
//!
//! * the relative change `|(r - mean) / mean|` of its latest reward becomes both
//!   the new exploration rate ε and the new learning rate α (each clamped to
//!   its own bounds);
//! * exploratory pulls are drawn from a discretized normal pdf over arm indices,
//!   centered on the current argmax arm;
//! * the width of that pdf is the sample std of the greedy arm's Q-history.
//!
//! Adaptation only happens after greedy pulls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, check_bounds, check_update, initial_q, quantify_change, AgentDiagnostics, BanditPolicy,
    PolicyError, QHistory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AweParams {
    /// Q-history length per arm.
    pub memory: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Lower bound on the exploration pdf width, in arm-index units.
    pub sigma_floor: f64,
    /// Upper bound on the pdf width; defaults to the arm count.
    pub sigma_cap: Option<f64>,
    /// Means closer to zero than this are treated as maximal change.
    pub mu_floor: f64,
}

impl Default for AweParams {
    fn default() -> Self {
        Self {
            memory: 10,
            eps_min: 0.05,
            eps_max: 0.3,
            alpha_min: 0.01,
            alpha_max: 0.3,
            sigma_floor: 0.5,
            sigma_cap: None,
            mu_floor: 1e-9,
        }
    }
}

impl AweParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.memory < 2 {
            return Err(PolicyError::InvalidParams("memory must be >= 2".into()));
        }
        check_bounds("eps_min", self.eps_min, "eps_max", self.eps_max)?;
        check_bounds("alpha_min", self.alpha_min, "alpha_max", self.alpha_max)?;
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(PolicyError::InvalidParams("sigma_floor must be positive".into()));
        }
        if let Some(cap) = self.sigma_cap {
            if !(cap >= self.sigma_floor) {
                return Err(PolicyError::InvalidParams("sigma_cap must be >= sigma_floor".into()));
            }
        }
        if !(self.mu_floor >= 0.0) {
            return Err(PolicyError::InvalidParams("mu_floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Change statistics computed after a greedy pull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeStats {
    /// Mean of the greedy arm's Q-history.
    pub mu_bar: f64,
    /// Argmax arm after the update; center of the exploration pdf.
    pub mu_hat: usize,
    /// Floored and capped sample std of the greedy arm's Q-history.
    pub sigma_hat: f64,
    pub new_rate: f64,
}

/// Normal-pdf weights over arm indices `0..arms`, normalized to sum to 1.
/// Falls back to uniform when every density underflows.
pub fn normal_weights(center: usize, sigma: f64, arms: usize) -> Vec<f64> {
    let c = center as f64;
    let mut w: Vec<f64> = (0..arms)
        .map(|k| {
            let z = (k as f64 - c) / sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        w.fill(1.0 / arms as f64);
    }
    w
}

/// Exploration weights from the Q-values and the greedy arm's history.
///
/// Returns `None` (weights unchanged) while the history has fewer than two
/// entries; otherwise the weights and the pdf width used.
pub fn recompute_weights(
    q: &[f64],
    history: &QHistory,
    sigma_floor: f64,
    sigma_cap: f64,
) -> Option<(Vec<f64>, f64)> {
    let sigma = history.sample_std()?.max(sigma_floor).min(sigma_cap);
    Some((normal_weights(argmax(q), sigma, q.len()), sigma))
}

#[derive(Debug, Clone)]
pub struct AweEpsGreedy {
    params: AweParams,
    q: Vec<f64>,
    weights: Vec<f64>,
    history: Vec<QHistory>,
    epsilon: f64,
    alpha: f64,
    greedy: bool,
    last_stats: Option<ChangeStats>,
}

impl AweEpsGreedy {
    pub fn new<R: Rng + ?Sized>(arms: usize, params: AweParams, rng: &mut R) -> Self {
        let q = initial_q(arms, rng);
        Self::with_q_values(q, params)
    }

    /// Starts from the given Q-values instead of random ones. Initial weights
    /// are the Q-values normalized (uniform if they are not all positive).
    pub fn with_q_values(q: Vec<f64>, params: AweParams) -> Self {
        let arms = q.len();
        let total: f64 = q.iter().sum();
        let weights = if q.iter().all(|&x| x > 0.0) && total.is_finite() {
            q.iter().map(|x| x / total).collect()
        } else {
            vec![1.0 / arms as f64; arms]
        };
        Self {
            history: vec![QHistory::new(params.memory); arms],
            epsilon: params.eps_max,
            alpha: params.alpha_max,
            params,
            q,
            weights,
            greedy: false,
            last_stats: None,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn history(&self, arm: usize) -> &QHistory {
        &self.history[arm]
    }

    pub fn last_stats(&self) -> Option<ChangeStats> {
        self.last_stats
    }

    pub fn params(&self) -> &AweParams {
        &self.params
    }

    /// Whether the last selection was the greedy branch.
    pub fn last_pull_greedy(&self) -> bool {
        self.greedy
    }

    /// Overrides the current rates, clamped to their bounds.
    pub fn set_rates(&mut self, epsilon: f64, alpha: f64) {
        self.epsilon = epsilon.clamp(self.params.eps_min, self.params.eps_max);
        self.alpha = alpha.clamp(self.params.alpha_min, self.params.alpha_max);
    }

    /// Replaces the exploration weights (normalized here).
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.q.len(), "one weight per arm");
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0 && weights.iter().all(|&w| w >= 0.0), "weights must be a distribution");
        self.weights = weights.iter().map(|w| w / total).collect();
    }

    fn sample_weighted<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut target = rng.random::<f64>();
        for (k, &w) in self.weights.iter().enumerate() {
            if target < w {
                return k;
            }
            target -= w;
        }
        // Rounding left the target past the last nonzero weight.
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(self.weights.len() - 1)
    }

    fn sigma_cap(&self) -> f64 {
        self.params.sigma_cap.unwrap_or(self.q.len() as f64)
    }

    fn adapt(&mut self, arm: usize, reward: f64) {
        let history = &self.history[arm];
        let Some(mu_bar) = history.mean() else { return };
        let Some((weights, sigma_hat)) =
            recompute_weights(&self.q, history, self.params.sigma_floor, self.sigma_cap())
        else {
            return;
        };
        let new_rate = quantify_change(reward, mu_bar, self.params.mu_floor, self.params.eps_max);
        self.weights = weights;
        self.set_rates(new_rate, new_rate);
        self.last_stats = Some(ChangeStats { mu_bar, mu_hat: argmax(&self.q), sigma_hat, new_rate });
    }
}

impl BanditPolicy for AweEpsGreedy {
    fn arms(&self) -> usize {
        self.q.len()
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon {
            self.greedy = false;
            self.sample_weighted(rng)
        } else {
            self.greedy = true;
            argmax(&self.q)
        }
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_update(arm, self.q.len(), reward)?;
        self.q[arm] = self.alpha * reward + (1.0 - self.alpha) * self.q[arm];
        self.history[arm].push(self.q[arm]);
        if self.greedy {
            self.adapt(arm, reward);
            self.greedy = false;
        }
        Ok(())
    }

    fn q_values(&self) -> &[f64] {
        &self.q
    }

    fn diagnostics(&self) -> AgentDiagnostics {
        AgentDiagnostics {
            epsilon: self.epsilon,
            alpha: self.alpha,
            sigma_hat: self.last_stats.map(|s| s.sigma_hat),
        }
    }
}
