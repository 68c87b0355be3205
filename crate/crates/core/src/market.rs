//! Cournot market mechanics.
//!
//! Linear inverse demand `p = max(u - v * Q, 0)` over the joint quantity `Q`,
//! constant marginal costs, and the three joint-output references used to
//! judge learned behaviour: collusive (cartel), Nash (Cournot) and
//! Walrasian (price-taking).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("quantity list is empty")]
    EmptyQuantities,
    #[error("invalid market config: {0}")]
    InvalidConfig(String),
    #[error("closed-form references need symmetric costs, got {0:?}")]
    AsymmetricCosts(Vec<f64>),
    #[error("interior Nash equilibrium does not exist at u={u}: firm {firm} would produce {quantity}")]
    CornerEquilibrium { u: f64, firm: usize, quantity: f64 },
}

/// Static market description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Marginal cost per firm; the firm count is `costs.len()`.
    pub costs: Vec<f64>,
    /// Slope of the inverse demand.
    pub v: f64,
    /// Baseline demand intercept.
    pub u_s: f64,
    /// Number of arms; arm `k` produces quantity `k`.
    pub arms: usize,
}

impl MarketConfig {
    pub fn symmetric(n: usize, cost: f64, v: f64, u_s: f64, arms: usize) -> Self {
        Self { costs: vec![cost; n], v, u_s, arms }
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.costs.windows(2).all(|w| w[0] == w[1])
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: &str| Err(MarketError::InvalidConfig(m.to_owned()));
        if self.costs.is_empty() {
            return bad("at least one firm is required");
        }
        if self.arms < 2 {
            return bad("arms must be >= 2");
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad("v must be positive");
        }
        if !(self.u_s > 0.0 && self.u_s.is_finite()) {
            return bad("u_s must be positive");
        }
        if self.costs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return bad("costs must be non-negative");
        }
        Ok(())
    }

    /// Quantities available to every firm.
    pub fn actions(&self) -> std::ops::Range<u32> {
        0..self.arms as u32
    }
}

/// Joint-output references at a given demand intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EquilibriumRefs {
    pub collusive_joint_q: f64,
    pub nash_joint_q: f64,
    pub walrasian_joint_q: f64,
    pub collusive_joint_profit: f64,
    pub nash_joint_profit: f64,
    pub walrasian_joint_profit: f64,
    pub per_firm_nash_q: Vec<f64>,
}

/// Market-clearing price for the given production profile.
pub fn price(quantities: &[u32], u_t: f64, v: f64) -> Result<f64, MarketError> {
    if quantities.is_empty() {
        return Err(MarketError::EmptyQuantities);
    }
    let total: u64 = quantities.iter().map(|&q| u64::from(q)).sum();
    Ok(price_of_total(total as f64, u_t, v))
}

#[inline]
pub(crate) fn price_of_total(total: f64, u_t: f64, v: f64) -> f64 {
    (u_t - v * total).max(0.0)
}

/// Profit of one firm; negative when price is below marginal cost.
#[inline]
pub fn profit(q_i: u32, p: f64, c_i: f64) -> f64 {
    let q = f64::from(q_i);
    p * q - c_i * q
}

/// Joint profit when every firm has marginal cost `c` and total output is `q`.
fn symmetric_joint_profit(q: f64, u_t: f64, v: f64, c: f64) -> f64 {
    (price_of_total(q, u_t, v) - c) * q
}

/// Closed-form collusive / Nash / Walrasian references for symmetric firms.
pub fn equilibrium_refs(u_t: f64, cfg: &MarketConfig) -> Result<EquilibriumRefs, MarketError> {
    if cfg.costs.is_empty() {
        return Err(MarketError::InvalidConfig("at least one firm is required".into()));
    }
    if !cfg.is_symmetric() {
        return Err(MarketError::AsymmetricCosts(cfg.costs.clone()));
    }
    let n = cfg.n() as f64;
    let c = cfg.costs[0];
    let v = cfg.v;
    if u_t <= c {
        return Ok(EquilibriumRefs { per_firm_nash_q: vec![0.0; cfg.n()], ..Default::default() });
    }
    let surplus = u_t - c;
    let nash = surplus * n / (v * (n + 1.0));
    let walras = surplus / v;
    let collusive = surplus / (2.0 * v);
    Ok(EquilibriumRefs {
        collusive_joint_q: collusive,
        nash_joint_q: nash,
        walrasian_joint_q: walras,
        collusive_joint_profit: symmetric_joint_profit(collusive, u_t, v, c),
        nash_joint_profit: symmetric_joint_profit(nash, u_t, v, c),
        walrasian_joint_profit: symmetric_joint_profit(walras, u_t, v, c),
        per_firm_nash_q: vec![nash / n; cfg.n()],
    })
}

/// Interior Cournot-Nash quantities for firms with heterogeneous costs:
/// `q_i = (u - (n+1) c_i + sum_j c_j) / (v (n+1))`.
pub fn asymmetric_nash(u_t: f64, cfg: &MarketConfig) -> Result<Vec<f64>, MarketError> {
    let n = cfg.n();
    if n == 0 {
        return Err(MarketError::InvalidConfig("at least one firm is required".into()));
    }
    if cfg.costs.iter().all(|&c| u_t <= c) {
        return Ok(vec![0.0; n]);
    }
    let n1 = n as f64 + 1.0;
    let cost_sum: f64 = cfg.costs.iter().sum();
    cfg.costs
        .iter()
        .enumerate()
        .map(|(firm, &c)| {
            let q = (u_t - n1 * c + cost_sum) / (cfg.v * n1);
            if q < 0.0 {
                Err(MarketError::CornerEquilibrium { u: u_t, firm, quantity: q })
            } else {
                Ok(q)
            }
        })
        .collect()
}

/// Reference equilibria for any cost profile.
///
/// Symmetric markets use [`equilibrium_refs`]. With heterogeneous costs the
/// cartel and price-taking references are driven by the cheapest firm and the
/// Nash reference sums the per-firm interior quantities, falling back to the
/// discrete best-response fixed point when the interior solution does not exist.
pub fn market_refs(u_t: f64, cfg: &MarketConfig) -> EquilibriumRefs {
    if let Ok(refs) = equilibrium_refs(u_t, cfg) {
        return refs;
    }
    let v = cfg.v;
    let c_min = cfg.costs.iter().copied().fold(f64::INFINITY, f64::min);
    if u_t <= c_min {
        return EquilibriumRefs { per_firm_nash_q: vec![0.0; cfg.n()], ..Default::default() };
    }
    let per_firm = asymmetric_nash(u_t, cfg).unwrap_or_else(|_| {
        let outcome = nash_via_best_response(u_t, cfg, 1_000);
        outcome.profile().iter().map(|&q| f64::from(q)).collect()
    });
    let nash_q: f64 = per_firm.iter().sum();
    let p_nash = price_of_total(nash_q, u_t, v);
    let nash_profit = per_firm.iter().zip(&cfg.costs).map(|(q, c)| (p_nash - c) * q).sum();
    let collusive = (u_t - c_min) / (2.0 * v);
    let walras = (u_t - c_min) / v;
    EquilibriumRefs {
        collusive_joint_q: collusive,
        nash_joint_q: nash_q,
        walrasian_joint_q: walras,
        collusive_joint_profit: symmetric_joint_profit(collusive, u_t, v, c_min),
        nash_joint_profit: nash_profit,
        walrasian_joint_profit: symmetric_joint_profit(walras, u_t, v, c_min),
        per_firm_nash_q: per_firm,
    }
}

/// Profit-maximizing quantity against a fixed rival total, by exhaustive
/// enumeration. Ties go to the smaller quantity.
pub fn discrete_best_response(
    u_t: f64,
    v: f64,
    c_i: f64,
    others_total: u64,
    actions: std::ops::Range<u32>,
) -> u32 {
    let mut best = actions.start;
    let mut best_profit = f64::NEG_INFINITY;
    for q in actions {
        let p = price_of_total((others_total + u64::from(q)) as f64, u_t, v);
        let pi = profit(q, p, c_i);
        if pi > best_profit {
            best = q;
            best_profit = pi;
        }
    }
    best
}

/// Result of best-response iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BestResponseOutcome {
    Converged { profile: Vec<u32>, iterations: usize },
    NotConverged { last_profile: Vec<u32> },
}

impl BestResponseOutcome {
    pub fn profile(&self) -> &[u32] {
        match self {
            Self::Converged { profile, .. } => profile,
            Self::NotConverged { last_profile } => last_profile,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged { .. })
    }
}

/// Round-robin discrete best responses from the all-zero profile until no
/// firm wants to move.
pub fn nash_via_best_response(u_t: f64, cfg: &MarketConfig, max_iters: usize) -> BestResponseOutcome {
    let n = cfg.n();
    let mut profile = vec![0u32; n];
    let mut total: u64 = 0;
    for iteration in 1..=max_iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let others = total - u64::from(profile[i]);
            let br = discrete_best_response(u_t, cfg.v, cfg.costs[i], others, cfg.actions());
            if br != profile[i] {
                total = others + u64::from(br);
                profile[i] = br;
                changed = true;
            }
        }
        if !changed {
            return BestResponseOutcome::Converged { profile, iterations: iteration };
        }
    }
    BestResponseOutcome::NotConverged { last_profile: profile }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn duopoly() -> MarketConfig {
        MarketConfig::symmetric(2, 4.0, 1.0, 40.0, 41)
    }

    fn rel_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn price_examples() {
        assert_eq!(price(&[18, 18], 40.0, 1.0).unwrap(), 4.0);
        assert_eq!(price(&[40, 40], 40.0, 1.0).unwrap(), 0.0);
        assert_eq!(price(&[0], 40.0, 1.0).unwrap(), 40.0);
        assert_eq!(price(&[], 40.0, 1.0), Err(MarketError::EmptyQuantities));
    }

    #[test]
    fn profit_examples() {
        assert_eq!(profit(12, 16.0, 4.0), 144.0);
        assert_eq!(profit(0, 7.5, 3.0), 0.0);
        assert_eq!(profit(10, 2.0, 4.0), -20.0);
    }

    #[test]
    fn duopoly_references() {
        let r = equilibrium_refs(40.0, &duopoly()).unwrap();
        assert!(rel_eq(r.nash_joint_q, 24.0));
        assert!(rel_eq(r.walrasian_joint_q, 36.0));
        assert!(rel_eq(r.collusive_joint_q, 18.0));
        assert!(rel_eq(r.collusive_joint_profit, 324.0));
        assert!(rel_eq(r.nash_joint_profit, 288.0));
        assert_eq!(r.walrasian_joint_profit, 0.0);
        assert_eq!(r.per_firm_nash_q, vec![12.0, 12.0]);
    }

    #[test]
    fn zero_surplus_gives_zero_refs() {
        let r = equilibrium_refs(4.0, &duopoly()).unwrap();
        assert_eq!(r.nash_joint_q, 0.0);
        assert_eq!(r.collusive_joint_q, 0.0);
        assert_eq!(r.walrasian_joint_q, 0.0);
    }

    #[test]
    fn asymmetric_costs_rejected_by_closed_form() {
        let cfg = MarketConfig { costs: vec![1.0, 3.0], v: 1.0, u_s: 40.0, arms: 41 };
        assert!(matches!(equilibrium_refs(40.0, &cfg), Err(MarketError::AsymmetricCosts(_))));
    }

    #[test]
    fn asymmetric_nash_orders_firms_by_cost() {
        let cfg = MarketConfig { costs: vec![1.0, 3.0], v: 1.0, u_s: 40.0, arms: 41 };
        let q = asymmetric_nash(40.0, &cfg).unwrap();
        let sym = equilibrium_refs(40.0, &MarketConfig::symmetric(2, 3.0, 1.0, 40.0, 41)).unwrap();
        assert!(q[0] > q[1]);
        assert!(q[0] + q[1] > sym.nash_joint_q);
    }

    #[test]
    fn asymmetric_nash_symmetric_and_degenerate_cases() {
        let q = asymmetric_nash(40.0, &duopoly()).unwrap();
        assert!(rel_eq(q[0], 12.0) && rel_eq(q[1], 12.0));
        let cfg = MarketConfig { costs: vec![5.0, 5.0, 5.0], v: 1.0, u_s: 40.0, arms: 41 };
        assert_eq!(asymmetric_nash(5.0, &cfg).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn asymmetric_nash_flags_corner() {
        let cfg = MarketConfig { costs: vec![1.0, 30.0], v: 1.0, u_s: 40.0, arms: 41 };
        assert!(matches!(
            asymmetric_nash(40.0, &cfg),
            Err(MarketError::CornerEquilibrium { firm: 1, .. })
        ));
        // The general reference path still produces an answer via the oracle.
        let refs = market_refs(40.0, &cfg);
        assert_eq!(refs.per_firm_nash_q.len(), 2);
        assert!(refs.nash_joint_q > 0.0);
    }

    #[test]
    fn best_response_examples() {
        assert_eq!(discrete_best_response(40.0, 1.0, 4.0, 12, 0..41), 12);
        assert_eq!(discrete_best_response(40.0, 1.0, 4.0, 0, 0..41), 18);
        assert_eq!(discrete_best_response(40.0, 1.0, 4.0, 40, 0..41), 0);
        assert_eq!(discrete_best_response(40.0, 1.0, 4.0, 55, 0..41), 0);
    }

    #[test]
    fn best_response_breaks_ties_low() {
        // (27 - q) q is maximized at 13.5: 13 and 14 tie.
        assert_eq!(discrete_best_response(40.0, 1.0, 1.0, 12, 0..41), 13);
    }

    #[test]
    fn best_response_iteration() {
        let out = nash_via_best_response(40.0, &duopoly(), 100);
        assert!(out.is_converged());
        assert_eq!(out.profile(), &[12, 12]);

        let mono = MarketConfig::symmetric(1, 4.0, 1.0, 40.0, 41);
        assert_eq!(nash_via_best_response(40.0, &mono, 100).profile(), &[18]);

        assert_eq!(nash_via_best_response(3.0, &duopoly(), 100).profile(), &[0, 0]);
    }

    #[test]
    fn best_response_reports_non_convergence() {
        let out = nash_via_best_response(40.0, &duopoly(), 1);
        assert!(!out.is_converged());
        assert_eq!(out.profile().len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(duopoly().validate().is_ok());
        let mut c = duopoly();
        c.arms = 1;
        assert!(c.validate().is_err());
        let mut c = duopoly();
        c.v = 0.0;
        assert!(c.validate().is_err());
        let mut c = duopoly();
        c.costs = vec![];
        assert!(c.validate().is_err());
        let mut c = duopoly();
        c.costs[1] = -1.0;
        assert!(c.validate().is_err());
    }
}
