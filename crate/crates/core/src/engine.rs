//! Repeated Cournot game driver.
//!
//! Each step every agent picks an arm (its quantity) before anyone learns
//! anything; the market then clears and each agent is told only its own profit.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::agents::AgentDiagnostics;
use crate::agents::{BanditPolicy, Policy, PolicyError, PolicyKind};
use crate::demand::{build_schedule_with_rng, DemandError, DemandPattern, DemandSchedule, DEFAULT_GAMMA};
use crate::market::{market_refs, price_of_total, profit, EquilibriumRefs, MarketConfig, MarketError};
use crate::metrics::{summarize, Recovery, SimSummary};
use crate::rng::{agent_stream_id, demand_stream, stream, SimRng};

pub const DEFAULT_STEPS: usize = 100_000;
pub const DEFAULT_LOG_WINDOW: usize = 100;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error("agent {agent}: {source}")]
    Policy { agent: usize, source: PolicyError },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandConfig {
    pub pattern: DemandPattern,
    pub gamma: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self { pattern: DemandPattern::Stationary, gamma: DEFAULT_GAMMA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub market: MarketConfig,
    pub demand: DemandConfig,
    pub steps: usize,
    /// One policy per firm.
    pub policies: Vec<PolicyKind>,
    pub seed: u64,
    pub log_window: usize,
    /// Keep every step, not only window aggregates.
    pub full_log: bool,
    /// Record agent 0's ε, α and σ̂ each step.
    pub diagnostics: bool,
    /// RNG stream id per agent; defaults to `1 + agent index`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_streams: Option<Vec<u64>>,
}

impl SimConfig {
    pub fn new(market: MarketConfig, pattern: DemandPattern, policy: PolicyKind) -> Self {
        let n = market.n();
        Self {
            market,
            demand: DemandConfig { pattern, ..Default::default() },
            steps: DEFAULT_STEPS,
            policies: vec![policy; n],
            seed: 0,
            log_window: DEFAULT_LOG_WINDOW,
            full_log: false,
            diagnostics: false,
            agent_streams: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.market.validate()?;
        if self.steps == 0 {
            return Err(SimError::InvalidConfig("steps must be >= 1".into()));
        }
        if self.log_window == 0 {
            return Err(SimError::InvalidConfig("log_window must be >= 1".into()));
        }
        if self.policies.len() != self.market.n() {
            return Err(SimError::InvalidConfig(format!(
                "{} policies configured for {} firms",
                self.policies.len(),
                self.market.n()
            )));
        }
        for (agent, p) in self.policies.iter().enumerate() {
            p.validate().map_err(|source| SimError::Policy { agent, source })?;
        }
        if !(0.0..=1.0).contains(&self.demand.gamma) {
            return Err(SimError::InvalidConfig("gamma must lie in [0, 1]".into()));
        }
        if let Some(streams) = &self.agent_streams {
            if streams.len() != self.market.n() {
                return Err(SimError::InvalidConfig("one agent stream per firm is required".into()));
            }
        }
        Ok(())
    }

    pub fn agent_stream_ids(&self) -> Vec<u64> {
        self.agent_streams
            .clone()
            .unwrap_or_else(|| (0..self.market.n()).map(agent_stream_id).collect())
    }
}

/// Everything that happened in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub u: f64,
    pub quantities: Vec<u32>,
    pub price: f64,
    pub profits: Vec<f64>,
    pub joint_q: u64,
    pub joint_profit: f64,
    pub refs: EquilibriumRefs,
}

/// Means over a block of consecutive steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub start: usize,
    pub steps: usize,
    pub u_mean: f64,
    pub joint_q: f64,
    pub joint_profit: f64,
    pub price: f64,
    pub collusive_q: f64,
    pub nash_q: f64,
    pub walras_q: f64,
    pub collusive_profit: f64,
    pub nash_profit: f64,
    pub walras_profit: f64,
    pub firm_q: Vec<f64>,
    pub firm_profit: Vec<f64>,
}

impl WindowRecord {
    pub fn end(&self) -> usize {
        self.start + self.steps
    }
}

#[derive(Debug, Clone)]
struct WindowAccumulator {
    start: usize,
    steps: usize,
    sums: [f64; 10],
    firm_q: Vec<f64>,
    firm_profit: Vec<f64>,
}

impl WindowAccumulator {
    fn new(start: usize, n: usize) -> Self {
        Self { start, steps: 0, sums: [0.0; 10], firm_q: vec![0.0; n], firm_profit: vec![0.0; n] }
    }

    fn add(&mut self, s: &StepRecord) {
        let r = &s.refs;
        let vals = [
            s.u,
            s.joint_q as f64,
            s.joint_profit,
            s.price,
            r.collusive_joint_q,
            r.nash_joint_q,
            r.walrasian_joint_q,
            r.collusive_joint_profit,
            r.nash_joint_profit,
            r.walrasian_joint_profit,
        ];
        for (acc, v) in self.sums.iter_mut().zip(vals) {
            *acc += v;
        }
        for (acc, &q) in self.firm_q.iter_mut().zip(&s.quantities) {
            *acc += f64::from(q);
        }
        for (acc, &p) in self.firm_profit.iter_mut().zip(&s.profits) {
            *acc += p;
        }
        self.steps += 1;
    }

    fn finish(self) -> WindowRecord {
        let k = self.steps as f64;
        let m = self.sums.map(|x| x / k);
        WindowRecord {
            start: self.start,
            steps: self.steps,
            u_mean: m[0],
            joint_q: m[1],
            joint_profit: m[2],
            price: m[3],
            collusive_q: m[4],
            nash_q: m[5],
            walras_q: m[6],
            collusive_profit: m[7],
            nash_profit: m[8],
            walras_profit: m[9],
            firm_q: self.firm_q.into_iter().map(|x| x / k).collect(),
            firm_profit: self.firm_profit.into_iter().map(|x| x / k).collect(),
        }
    }
}

/// Complete log of one simulation.
#[derive(Debug, Clone)]
pub struct Trace {
    pub config: SimConfig,
    pub seed: u64,
    pub windows: Vec<WindowRecord>,
    /// Present when `full_log` is set.
    pub steps: Option<Vec<StepRecord>>,
    /// Agent 0's adaptive state after each step, when `diagnostics` is set.
    pub diagnostics: Vec<AgentDiagnostics>,
    pub demand_change_events: usize,
    pub wall_time_secs: f64,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.config.steps
    }
}

/// A configured game ready to run.
pub struct Simulation {
    config: SimConfig,
    schedule: DemandSchedule,
    agents: Vec<(Policy, SimRng)>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut demand_rng = demand_stream(config.seed);
        let schedule = build_schedule_with_rng(
            config.demand.pattern,
            config.steps,
            config.market.u_s,
            config.demand.gamma,
            config.seed,
            &mut demand_rng,
        )?;
        let agents = config
            .policies
            .iter()
            .zip(config.agent_stream_ids())
            .enumerate()
            .map(|(agent, (kind, stream_id))| {
                let mut rng = stream(config.seed, stream_id);
                kind.build(config.market.arms, &mut rng)
                    .map(|p| (p, rng))
                    .map_err(|source| SimError::Policy { agent, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { config, schedule, agents })
    }

    /// Replaces the freshly built policies, e.g. with pre-seeded Q-values.
    pub fn with_policies(mut self, policies: Vec<Policy>) -> Result<Self, SimError> {
        if policies.len() != self.agents.len() {
            return Err(SimError::InvalidConfig("one policy per firm is required".into()));
        }
        if let Some(p) = policies.iter().find(|p| p.arms() != self.config.market.arms) {
            return Err(SimError::InvalidConfig(format!(
                "policy has {} arms, market has {}",
                p.arms(),
                self.config.market.arms
            )));
        }
        for ((slot, _), p) in self.agents.iter_mut().zip(policies) {
            *slot = p;
        }
        Ok(self)
    }

    pub fn schedule(&self) -> &DemandSchedule {
        &self.schedule
    }

    pub fn run(mut self) -> Result<Trace, SimError> {
        let started = Instant::now();
        let cfg = &self.config;
        let n = cfg.market.n();
        let mut windows = Vec::with_capacity(cfg.steps.div_ceil(cfg.log_window));
        let mut full = cfg.full_log.then(|| Vec::with_capacity(cfg.steps));
        let mut diagnostics = Vec::new();
        let mut acc = WindowAccumulator::new(0, n);
        let mut cached: Option<(f64, EquilibriumRefs)> = None;
        let mut arms = vec![0usize; n];

        for t in 0..cfg.steps {
            let u = self.schedule.u(t);
            // All selections happen before any feedback.
            for (slot, (policy, rng)) in arms.iter_mut().zip(self.agents.iter_mut()) {
                *slot = policy.select(rng);
            }
            let quantities: Vec<u32> = arms.iter().map(|&a| a as u32).collect();
            let joint_q: u64 = quantities.iter().map(|&q| u64::from(q)).sum();
            let price = price_of_total(joint_q as f64, u, cfg.market.v);
            let profits: Vec<f64> =
                quantities.iter().zip(&cfg.market.costs).map(|(&q, &c)| profit(q, price, c)).collect();
            for (agent, ((policy, _), (&arm, &reward))) in
                self.agents.iter_mut().zip(arms.iter().zip(&profits)).enumerate()
            {
                policy.update(arm, reward).map_err(|source| SimError::Policy { agent, source })?;
            }
            if cfg.diagnostics {
                diagnostics.push(self.agents[0].0.diagnostics());
            }

            let refs = match &cached {
                Some((cu, r)) if *cu == u => r.clone(),
                _ => {
                    let r = market_refs(u, &cfg.market);
                    cached = Some((u, r.clone()));
                    r
                }
            };
            let joint_profit = profits.iter().sum();
            let record = StepRecord { t, u, quantities, price, profits, joint_q, joint_profit, refs };
            acc.add(&record);
            if acc.steps == cfg.log_window {
                windows.push(std::mem::replace(&mut acc, WindowAccumulator::new(t + 1, n)).finish());
            }
            if let Some(full) = full.as_mut() {
                full.push(record);
            }
        }
        if acc.steps > 0 {
            windows.push(acc.finish());
        }

        Ok(Trace {
            seed: cfg.seed,
            config: self.config.clone(),
            windows,
            steps: full,
            diagnostics,
            demand_change_events: self.schedule.change_events,
            wall_time_secs: started.elapsed().as_secs_f64(),
        })
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<Trace, SimError> {
    Simulation::new(cfg.clone())?.run()
}

/// Outcome of one seed in a sweep.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub result: Result<(Trace, SimSummary), String>,
}

/// Cross-seed medians of the headline metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMedians {
    pub band_occupancy: Option<f64>,
    pub final_collusive_regret: Option<f64>,
    pub fairness_spread: Option<f64>,
    pub recovery_times: Vec<Recovery>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<SeedRun>,
    pub medians: SweepMedians,
}

impl SweepResult {
    pub fn succeeded(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_ok()).count()
    }
}

/// Runs `template` once per seed on `jobs` worker threads. Results are in
/// seed order and do not depend on `jobs`.
pub fn run_sweep(template: &SimConfig, seeds: &[u64], jobs: usize) -> Result<SweepResult, SimError> {
    if seeds.is_empty() {
        return Err(SimError::InvalidConfig("sweep needs at least one seed".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<SeedRun> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = template.clone().with_seed(seed);
                let result = run_simulation(&cfg)
                    .map(|trace| {
                        let summary = summarize(&trace);
                        (trace, summary)
                    })
                    .map_err(|e| e.to_string());
                SeedRun { seed, result }
            })
            .collect()
    });
    let medians = sweep_medians(runs.iter().filter_map(|r| r.result.as_ref().ok().map(|(_, s)| s)));
    Ok(SweepResult { runs, medians })
}

pub fn sweep_medians<'a>(summaries: impl Iterator<Item = &'a SimSummary>) -> SweepMedians {
    let summaries: Vec<&SimSummary> = summaries.collect();
    let pick = |f: &dyn Fn(&SimSummary) -> f64| median(summaries.iter().map(|s| f(s)).collect());
    let breakpoints = summaries.first().map_or(0, |s| s.recovery_times.len());
    let recovery_times = (0..breakpoints)
        .map(|b| {
            let mut v: Vec<Recovery> =
                summaries.iter().filter_map(|s| s.recovery_times.get(b).copied()).collect();
            v.sort();
            median_recovery(&v)
        })
        .collect();
    SweepMedians {
        band_occupancy: pick(&|s| s.band_occupancy),
        final_collusive_regret: pick(&|s| s.final_collusive_regret),
        fairness_spread: pick(&|s| s.fairness_spread),
        recovery_times,
    }
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

/// Median of sorted recovery times, taking the upper middle for even counts
/// so a `Never` is never averaged away.
fn median_recovery(sorted: &[Recovery]) -> Recovery {
    if sorted.is_empty() {
        return Recovery::Never;
    }
    sorted[sorted.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{VanillaEpsGreedy, VanillaParams};

    fn duopoly(pattern: DemandPattern) -> SimConfig {
        SimConfig::new(MarketConfig::symmetric(2, 4.0, 1.0, 40.0, 41), pattern, PolicyKind::default())
    }

    #[test]
    fn step_accounting_holds() {
        let mut cfg = duopoly(DemandPattern::Pattern1).with_steps(3_000).with_seed(4);
        cfg.full_log = true;
        let trace = run_simulation(&cfg).unwrap();
        let steps = trace.steps.as_ref().unwrap();
        assert_eq!(steps.len(), 3_000);
        for s in steps {
            assert_eq!(s.joint_q, s.quantities.iter().map(|&q| u64::from(q)).sum::<u64>());
            assert_eq!(s.price, (s.u - s.joint_q as f64).max(0.0));
            let sum: f64 = s.profits.iter().sum();
            assert!((s.joint_profit - sum).abs() < 1e-9);
            let direct = s.price * s.joint_q as f64 - 4.0 * s.joint_q as f64;
            assert!((s.joint_profit - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn windows_cover_horizon() {
        let mut cfg = duopoly(DemandPattern::Stationary).with_steps(1_050);
        cfg.log_window = 100;
        let trace = run_simulation(&cfg).unwrap();
        assert_eq!(trace.windows.len(), 11);
        assert_eq!(trace.windows.last().unwrap().steps, 50);
        assert_eq!(trace.windows[3].start, 300);
    }

    #[test]
    fn forced_greedy_collusion() {
        let mut cfg = duopoly(DemandPattern::Stationary).with_steps(500);
        cfg.full_log = true;
        let forced = |_| {
            let mut q = vec![0.0; 41];
            q[9] = 1.0;
            Policy::Vanilla(VanillaEpsGreedy::with_q_values(q, VanillaParams { epsilon: 0.0, alpha: 0.3 }))
        };
        let sim = Simulation::new(cfg).unwrap().with_policies((0..2).map(forced).collect()).unwrap();
        let trace = sim.run().unwrap();
        let steps = trace.steps.unwrap();
        assert!(steps.iter().all(|s| s.joint_q == 18 && s.quantities == [9, 9]));
        let regret = crate::metrics::joint_cumulative_regret(&steps);
        assert!(regret.iter().all(|&r| r.abs() < 1e-9));
    }

    #[test]
    fn identical_configs_identical_traces() {
        let cfg = duopoly(DemandPattern::Pattern3).with_steps(5_000).with_seed(11);
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a.windows, b.windows);
    }

    #[test]
    fn relabeling_agents_permutes_series() {
        let mut cfg = duopoly(DemandPattern::Pattern1).with_steps(4_000).with_seed(21);
        cfg.agent_streams = Some(vec![1, 2]);
        let a = run_simulation(&cfg).unwrap();
        cfg.agent_streams = Some(vec![2, 1]);
        let b = run_simulation(&cfg).unwrap();
        for (wa, wb) in a.windows.iter().zip(&b.windows) {
            assert_eq!(wa.firm_q[0], wb.firm_q[1]);
            assert_eq!(wa.firm_q[1], wb.firm_q[0]);
            assert_eq!(wa.firm_profit[0], wb.firm_profit[1]);
            assert_eq!(wa.joint_q, wb.joint_q);
        }
    }

    #[test]
    fn config_validation_errors() {
        let mut cfg = duopoly(DemandPattern::Stationary);
        cfg.policies.pop();
        assert!(matches!(run_simulation(&cfg), Err(SimError::InvalidConfig(_))));
        let cfg = duopoly(DemandPattern::Stationary).with_steps(0);
        assert!(run_simulation(&cfg).is_err());
        let mut cfg = duopoly(DemandPattern::Stationary);
        cfg.log_window = 0;
        assert!(run_simulation(&cfg).is_err());
    }

    #[test]
    fn sweep_structure() {
        let cfg = duopoly(DemandPattern::Pattern1).with_steps(2_000);
        let res = run_sweep(&cfg, &[1, 2, 3, 4, 5], 2).unwrap();
        assert_eq!(res.runs.len(), 5);
        assert_eq!(res.succeeded(), 5);
        assert!(res.medians.final_collusive_regret.is_some());
        assert_eq!(res.medians.recovery_times.len(), 3);
        assert!(matches!(run_sweep(&cfg, &[], 2), Err(SimError::InvalidConfig(_))));

        let twin = run_sweep(&cfg, &[1, 1], 2).unwrap();
        let (a, _) = twin.runs[0].result.as_ref().unwrap();
        let (b, _) = twin.runs[1].result.as_ref().unwrap();
        assert_eq!(a.windows, b.windows);
    }

    #[test]
    fn sweep_reports_failures_per_seed() {
        let mut cfg = duopoly(DemandPattern::Pattern1).with_steps(100);
        cfg.policies.pop();
        let res = run_sweep(&cfg, &[1, 2], 1).unwrap();
        assert_eq!(res.succeeded(), 0);
        assert!(res.runs.iter().all(|r| r.result.is_err()));
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
        let v = [Recovery::Steps(100), Recovery::Steps(300), Recovery::Never];
        assert_eq!(median_recovery(&v), Recovery::Steps(300));
    }
}
