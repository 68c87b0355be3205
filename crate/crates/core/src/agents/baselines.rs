//! Baseline policies: fixed-rate ε-greedy and an adaptive-ε variant with
//! uniform exploration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, check_bounds, check_update, initial_q, quantify_change, AgentDiagnostics, BanditPolicy,
    PolicyError, QHistory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VanillaParams {
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for VanillaParams {
    fn default() -> Self {
        Self { epsilon: 0.1, alpha: 0.1 }
    }
}

impl VanillaParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(PolicyError::InvalidParams(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(PolicyError::InvalidParams(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// ε-greedy with uniform exploration and a constant learning rate.
#[derive(Debug, Clone)]
pub struct VanillaEpsGreedy {
    params: VanillaParams,
    q: Vec<f64>,
}

impl VanillaEpsGreedy {
    pub fn new<R: Rng + ?Sized>(arms: usize, params: VanillaParams, rng: &mut R) -> Self {
        Self { q: initial_q(arms, rng), params }
    }

    pub fn with_q_values(q: Vec<f64>, params: VanillaParams) -> Self {
        Self { params, q }
    }
}

impl BanditPolicy for VanillaEpsGreedy {
    fn arms(&self) -> usize {
        self.q.len()
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.params.epsilon {
            rng.random_range(0..self.q.len())
        } else {
            argmax(&self.q)
        }
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_update(arm, self.q.len(), reward)?;
        let a = self.params.alpha;
        self.q[arm] = a * reward + (1.0 - a) * self.q[arm];
        Ok(())
    }

    fn q_values(&self) -> &[f64] {
        &self.q
    }

    fn diagnostics(&self) -> AgentDiagnostics {
        AgentDiagnostics { epsilon: self.params.epsilon, alpha: self.params.alpha, sigma_hat: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveParams {
    pub memory: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    /// Constant learning rate.
    pub alpha: f64,
    pub mu_floor: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self { memory: 10, eps_min: 0.05, eps_max: 0.3, alpha: 0.1, mu_floor: 1e-9 }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.memory < 2 {
            return Err(PolicyError::InvalidParams("memory must be >= 2".into()));
        }
        check_bounds("eps_min", self.eps_min, "eps_max", self.eps_max)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(PolicyError::InvalidParams(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// ε-greedy whose exploration rate follows the relative change of greedy
/// rewards, with uniform exploration and a fixed learning rate.
#[derive(Debug, Clone)]
pub struct AdaptiveEpsGreedy {
    params: AdaptiveParams,
    q: Vec<f64>,
    history: Vec<QHistory>,
    epsilon: f64,
    greedy: bool,
}

impl AdaptiveEpsGreedy {
    pub fn new<R: Rng + ?Sized>(arms: usize, params: AdaptiveParams, rng: &mut R) -> Self {
        Self::with_q_values(initial_q(arms, rng), params)
    }

    pub fn with_q_values(q: Vec<f64>, params: AdaptiveParams) -> Self {
        Self {
            history: vec![QHistory::new(params.memory); q.len()],
            epsilon: params.eps_max,
            params,
            q,
            greedy: false,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn history_mut(&mut self, arm: usize) -> &mut QHistory {
        &mut self.history[arm]
    }

    pub fn force_greedy_flag(&mut self) {
        self.greedy = true;
    }
}

impl BanditPolicy for AdaptiveEpsGreedy {
    fn arms(&self) -> usize {
        self.q.len()
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon {
            self.greedy = false;
            rng.random_range(0..self.q.len())
        } else {
            self.greedy = true;
            argmax(&self.q)
        }
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_update(arm, self.q.len(), reward)?;
        let a = self.params.alpha;
        self.q[arm] = a * reward + (1.0 - a) * self.q[arm];
        self.history[arm].push(self.q[arm]);
        if self.greedy {
            if self.history[arm].len() >= 2 {
                let mu_bar = self.history[arm].mean().expect("non-empty history");
                let rate = quantify_change(reward, mu_bar, self.params.mu_floor, self.params.eps_max);
                self.epsilon = rate.clamp(self.params.eps_min, self.params.eps_max);
            }
            self.greedy = false;
        }
        Ok(())
    }

    fn q_values(&self) -> &[f64] {
        &self.q
    }

    fn diagnostics(&self) -> AgentDiagnostics {
        AgentDiagnostics { epsilon: self.epsilon, alpha: self.params.alpha, sigma_hat: None }
    }
}
