//! Bandit policies for independent firms.
//!
//! A policy sees nothing but its own arm choices and the rewards they earned:
//! [`BanditPolicy::update`] takes exactly `(arm, reward)`. Each agent owns its
//! RNG stream, passed in on selection.

mod awe;
mod baselines;
mod history;

pub use awe::{normal_weights, recompute_weights, AweEpsGreedy, AweParams, ChangeStats};
pub use baselines::{AdaptiveEpsGreedy, AdaptiveParams, VanillaEpsGreedy, VanillaParams};
pub use history::QHistory;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("reward must be finite, got {0}")]
    NonFiniteReward(f64),
    #[error("invalid policy parameters: {0}")]
    InvalidParams(String),
}

/// Snapshot of the adaptive internals of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentDiagnostics {
    pub epsilon: f64,
    pub alpha: f64,
    pub sigma_hat: Option<f64>,
}

pub trait BanditPolicy {
    fn arms(&self) -> usize;

    /// Picks the arm to play this step.
    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize;

    /// Feeds back the reward earned by `arm`, the arm returned by the last `select`.
    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError>;

    fn q_values(&self) -> &[f64];

    fn diagnostics(&self) -> AgentDiagnostics;
}

/// Policy choice plus hyperparameters, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyKind {
    Awe(AweParams),
    Vanilla(VanillaParams),
    Adaptive(AdaptiveParams),
}

impl Default for PolicyKind {
    fn default() -> Self {
        Self::Awe(AweParams::default())
    }
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Awe(_) => "awe",
            Self::Vanilla(_) => "vanilla",
            Self::Adaptive(_) => "adaptive",
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            Self::Awe(p) => p.validate(),
            Self::Vanilla(p) => p.validate(),
            Self::Adaptive(p) => p.validate(),
        }
    }

    /// Instantiates the policy, drawing initial Q-values from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, arms: usize, rng: &mut R) -> Result<Policy, PolicyError> {
        self.validate()?;
        if arms < 2 {
            return Err(PolicyError::InvalidParams("at least 2 arms are required".into()));
        }
        Ok(match self {
            Self::Awe(p) => Policy::Awe(AweEpsGreedy::new(arms, p.clone(), rng)),
            Self::Vanilla(p) => Policy::Vanilla(VanillaEpsGreedy::new(arms, p.clone(), rng)),
            Self::Adaptive(p) => Policy::Adaptive(AdaptiveEpsGreedy::new(arms, p.clone(), rng)),
        })
    }
}

/// Any of the supported policies.
#[derive(Debug, Clone)]
pub enum Policy {
    Awe(AweEpsGreedy),
    Vanilla(VanillaEpsGreedy),
    Adaptive(AdaptiveEpsGreedy),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Policy::Awe($p) => $e,
            Policy::Vanilla($p) => $e,
            Policy::Adaptive($p) => $e,
        }
    };
}

impl BanditPolicy for Policy {
    fn arms(&self) -> usize {
        dispatch!(self, p => p.arms())
    }

    fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        dispatch!(self, p => p.select(rng))
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        dispatch!(self, p => p.update(arm, reward))
    }

    fn q_values(&self) -> &[f64] {
        dispatch!(self, p => p.q_values())
    }

    fn diagnostics(&self) -> AgentDiagnostics {
        dispatch!(self, p => p.diagnostics())
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Relative deviation `|(reward - mu_bar) / mu_bar|` of a reward from its
/// recent mean. A mean within `mu_floor` of zero counts as maximal change and
/// yields `fallback`.
pub fn quantify_change(reward: f64, mu_bar: f64, mu_floor: f64, fallback: f64) -> f64 {
    if mu_bar.abs() < mu_floor {
        fallback
    } else {
        ((reward - mu_bar) / mu_bar).abs()
    }
}

/// Initial Q-values, independent draws in the open interval (0, 1).
pub(crate) fn initial_q<R: Rng + ?Sized>(arms: usize, rng: &mut R) -> Vec<f64> {
    (0..arms).map(|_| rng.sample::<f64, _>(Open01)).collect()
}

pub(crate) fn check_update(arm: usize, arms: usize, reward: f64) -> Result<(), PolicyError> {
    if arm >= arms {
        return Err(PolicyError::ArmOutOfRange { arm, arms });
    }
    if !reward.is_finite() {
        return Err(PolicyError::NonFiniteReward(reward));
    }
    Ok(())
}

pub(crate) fn check_unit(name: &str, x: f64) -> Result<(), PolicyError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(PolicyError::InvalidParams(format!("{name} must lie in (0, 1), got {x}")))
    }
}

pub(crate) fn check_bounds(lo_name: &str, lo: f64, hi_name: &str, hi: f64) -> Result<(), PolicyError> {
    check_unit(lo_name, lo)?;
    check_unit(hi_name, hi)?;
    if lo > hi {
        return Err(PolicyError::InvalidParams(format!("{lo_name} ({lo}) exceeds {hi_name} ({hi})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.5, 0.9, 0.9]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[-3.0, -1.0, -2.0]), 1);
    }

    #[test]
    fn change_quantification() {
        assert!((quantify_change(90.0, 100.0, 1e-9, 0.3) - 0.1).abs() < 1e-12);
        assert!((quantify_change(110.0, 100.0, 1e-9, 0.3) - 0.1).abs() < 1e-12);
        assert_eq!(quantify_change(100.0, 100.0, 1e-9, 0.3), 0.0);
        assert_eq!(quantify_change(55.0, 0.0, 1e-9, 0.3), 0.3);
        assert!((quantify_change(-12.0, -10.0, 1e-9, 0.3) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn initial_q_in_open_unit_interval() {
        let mut rng = crate::rng::agent_stream(1, 0);
        let q = initial_q(1000, &mut rng);
        assert!(q.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn policy_kind_parses_from_toml() {
        let k: PolicyKind = toml::from_str("kind = \"awe\"\nmemory = 12\n").unwrap();
        match k {
            PolicyKind::Awe(p) => {
                assert_eq!(p.memory, 12);
                assert_eq!(p.eps_max, 0.3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let k: PolicyKind = toml::from_str("kind = \"vanilla\"\nepsilon = 0.2\n").unwrap();
        assert_eq!(k.name(), "vanilla");
        assert!(toml::from_str::<PolicyKind>("kind = \"ucb\"\n").is_err());
        assert!(toml::from_str::<PolicyKind>("kind = \"awe\"\nmemroy = 3\n").is_err());
    }

    #[test]
    fn build_rejects_bad_params() {
        let mut rng = crate::rng::agent_stream(1, 0);
        let p = AweParams { eps_min: 0.5, ..Default::default() };
        assert!(PolicyKind::Awe(p).build(10, &mut rng).is_err());
        assert!(PolicyKind::default().build(1, &mut rng).is_err());
        let v = VanillaParams { epsilon: 1.5, alpha: 0.1 };
        assert!(PolicyKind::Vanilla(v).build(10, &mut rng).is_err());
    }
}
