//! Repeated Cournot oligopoly games with non-stationary demand, played by
//! independent ε-greedy bandit agents.
//!
//! * [`market`]: price, profit and the collusive / Nash / Walrasian references.
//! * [`demand`]: the demand-intercept schedules.
//! * [`agents`]: AWE ε-greedy and the baseline policies.
//! * [`engine`]: the simultaneous-move game loop and seed sweeps.
//! * [`metrics`]: regret, band occupancy, recovery and fairness.
//! * [`config`], [`presets`], [`output`]: run configuration and artifacts.

pub mod agents;
pub mod config;
pub mod demand;
pub mod engine;
pub mod market;
pub mod metrics;
pub mod output;
pub mod presets;
pub mod rng;

pub use agents::{AweEpsGreedy, AweParams, BanditPolicy, Policy, PolicyKind};
pub use demand::{DemandPattern, DemandSchedule};
pub use engine::{run_simulation, run_sweep, SimConfig, SimError, Simulation, Trace};
pub use market::{EquilibriumRefs, MarketConfig};
pub use metrics::{summarize, Recovery, SimSummary};
