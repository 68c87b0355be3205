//! Post-processing of traces.
//!
//! Regret here is collusive regret: the cumulative shortfall of realized joint
//! profit below the cartel profit at the same demand level. It is not the
//! best-fixed-arm regret of the bandit literature and can decrease locally.

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::demand::{pattern1_breakpoints, DemandPattern};
use crate::engine::{SimConfig, StepRecord, Trace, WindowRecord};

/// Fraction of the horizon, at the end, used for fairness and tail statistics.
pub const TAIL_FRACTION_DENOM: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Steps until re-entering the equilibrium band, or `Never`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(untagged)]
pub enum Recovery {
    Steps(u64),
    #[serde(deserialize_with = "never")]
    Never,
}

fn never<'de, D: serde::Deserializer<'de>>(d: D) -> Result<(), D::Error> {
    let s = String::deserialize(d)?;
    if s == "never" {
        Ok(())
    } else {
        Err(serde::de::Error::custom(format!("expected \"never\", got {s:?}")))
    }
}

impl Serialize for Recovery {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Steps(n) => s.serialize_u64(*n),
            Self::Never => s.serialize_str("never"),
        }
    }
}

impl Recovery {
    pub fn steps(self) -> Option<u64> {
        match self {
            Self::Steps(n) => Some(n),
            Self::Never => None,
        }
    }
}

/// Non-overlapping window means; the trailing partial window is averaged over
/// its own length.
pub fn rolling_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    series.chunks(window).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Per-step cumulative collusive regret.
pub fn joint_cumulative_regret(steps: &[StepRecord]) -> Vec<f64> {
    steps
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.refs.collusive_joint_profit - s.joint_profit;
            Some(*acc)
        })
        .collect()
}

/// Cumulative collusive regret at the end of each window.
pub fn windowed_collusive_regret(windows: &[WindowRecord]) -> Vec<f64> {
    windows
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w.steps as f64 * (w.collusive_profit - w.joint_profit);
            Some(*acc)
        })
        .collect()
}

fn in_band(q: f64, lo: f64, hi: f64) -> bool {
    lo <= q && q <= hi
}

/// Fraction of windows whose joint quantity lies in `[collusive, walrasian]`.
pub fn band_occupancy(joint_q: &[f64], collusive_q: &[f64], walras_q: &[f64]) -> Result<f64, MetricsError> {
    if joint_q.len() != collusive_q.len() {
        return Err(MetricsError::LengthMismatch(joint_q.len(), collusive_q.len()));
    }
    if joint_q.len() != walras_q.len() {
        return Err(MetricsError::LengthMismatch(joint_q.len(), walras_q.len()));
    }
    if joint_q.is_empty() {
        return Ok(0.0);
    }
    let inside = joint_q
        .iter()
        .zip(collusive_q.iter().zip(walras_q))
        .filter(|(&q, (&lo, &hi))| in_band(q, lo, hi))
        .count();
    Ok(inside as f64 / joint_q.len() as f64)
}

pub fn window_band_occupancy(windows: &[WindowRecord]) -> f64 {
    let (q, lo, hi): (Vec<f64>, Vec<f64>, Vec<f64>) =
        windows.iter().map(|w| (w.joint_q, w.collusive_q, w.walras_q)).fold(
            (Vec::new(), Vec::new(), Vec::new()),
            |(mut a, mut b, mut c), (x, y, z)| {
                a.push(x);
                b.push(y);
                c.push(z);
                (a, b, c)
            },
        );
    band_occupancy(&q, &lo, &hi).expect("columns of the same windows")
}

/// For each breakpoint, steps from the first window starting at or after it
/// until the first window (from there on) whose joint quantity is inside the band.
pub fn recovery_time(windows: &[WindowRecord], breakpoints: &[usize]) -> Vec<Recovery> {
    breakpoints
        .iter()
        .map(|&bp| {
            let Some(first) = windows.iter().position(|w| w.start >= bp) else {
                return Recovery::Never;
            };
            windows[first..]
                .iter()
                .find(|w| in_band(w.joint_q, w.collusive_q, w.walras_q))
                .map_or(Recovery::Never, |w| Recovery::Steps((w.start - windows[first].start) as u64))
        })
        .collect()
}

/// Spread between the largest and smallest per-firm mean quantity.
pub fn fairness_spread(per_firm_means: &[f64]) -> f64 {
    let max = per_firm_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_firm_means.iter().copied().fold(f64::INFINITY, f64::min);
    if per_firm_means.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// First step of the evaluation tail (last tenth of the horizon).
pub fn tail_start(horizon: usize) -> usize {
    horizon - horizon / TAIL_FRACTION_DENOM
}

/// Step-weighted per-firm mean quantity over windows starting at or after `from`.
pub fn firm_mean_q_since(windows: &[WindowRecord], from: usize) -> Vec<f64> {
    let tail: Vec<&WindowRecord> = windows.iter().filter(|w| w.start >= from).collect();
    let n = windows.first().map_or(0, |w| w.firm_q.len());
    let steps: usize = tail.iter().map(|w| w.steps).sum();
    (0..n)
        .map(|i| tail.iter().map(|w| w.firm_q[i] * w.steps as f64).sum::<f64>() / steps.max(1) as f64)
        .collect()
}

pub fn joint_mean_q_since(windows: &[WindowRecord], from: usize) -> f64 {
    let (sum, steps) = windows
        .iter()
        .filter(|w| w.start >= from)
        .fold((0.0, 0usize), |(s, k), w| (s + w.joint_q * w.steps as f64, k + w.steps));
    sum / steps.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub seed: u64,
    pub pattern: DemandPattern,
    pub policies: Vec<String>,
    pub steps: usize,
    pub log_window: usize,
    pub windows: usize,
    pub band_occupancy: f64,
    pub final_collusive_regret: f64,
    pub breakpoints: Vec<usize>,
    pub recovery_times: Vec<Recovery>,
    pub fairness_spread: f64,
    pub tail_start: usize,
    pub tail_firm_mean_q: Vec<f64>,
    pub tail_joint_mean_q: f64,
    pub mean_joint_profit: f64,
    /// Fraction of windows with joint profit above the Walrasian level.
    pub above_walrasian_fraction: f64,
    pub min_window_joint_profit: f64,
    pub demand_change_events: usize,
    pub config: SimConfig,
}

pub fn summarize(trace: &Trace) -> SimSummary {
    let cfg = &trace.config;
    let windows = &trace.windows;
    let breakpoints = match cfg.demand.pattern {
        DemandPattern::Pattern1 => pattern1_breakpoints(cfg.steps).to_vec(),
        _ => Vec::new(),
    };
    let tail = tail_start(cfg.steps);
    let tail_firm_mean_q = firm_mean_q_since(windows, tail);
    let total_steps: usize = windows.iter().map(|w| w.steps).sum();
    let mean_joint_profit =
        windows.iter().map(|w| w.joint_profit * w.steps as f64).sum::<f64>() / total_steps.max(1) as f64;
    let above = windows.iter().filter(|w| w.joint_profit > w.walras_profit).count();
    SimSummary {
        seed: trace.seed,
        pattern: cfg.demand.pattern,
        policies: cfg.policies.iter().map(|p| p.name().to_owned()).collect(),
        steps: cfg.steps,
        log_window: cfg.log_window,
        windows: windows.len(),
        band_occupancy: window_band_occupancy(windows),
        final_collusive_regret: windowed_collusive_regret(windows).last().copied().unwrap_or(0.0),
        recovery_times: recovery_time(windows, &breakpoints),
        breakpoints,
        fairness_spread: fairness_spread(&tail_firm_mean_q),
        tail_start: tail,
        tail_joint_mean_q: joint_mean_q_since(windows, tail),
        tail_firm_mean_q,
        mean_joint_profit,
        above_walrasian_fraction: above as f64 / windows.len().max(1) as f64,
        min_window_joint_profit: windows.iter().map(|w| w.joint_profit).fold(f64::INFINITY, f64::min),
        demand_change_events: trace.demand_change_events,
        config: cfg.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::EquilibriumRefs;

    fn window(start: usize, joint_q: f64, lo: f64, hi: f64) -> WindowRecord {
        WindowRecord {
            start,
            steps: 100,
            u_mean: 40.0,
            joint_q,
            joint_profit: 0.0,
            price: 0.0,
            collusive_q: lo,
            nash_q: 0.5 * (lo + hi),
            walras_q: hi,
            collusive_profit: 0.0,
            nash_profit: 0.0,
            walras_profit: 0.0,
            firm_q: vec![joint_q / 2.0; 2],
            firm_profit: vec![0.0; 2],
        }
    }

    fn step(collusive_profit: f64, joint_profit: f64) -> StepRecord {
        StepRecord {
            t: 0,
            u: 40.0,
            quantities: vec![],
            price: 0.0,
            profits: vec![],
            joint_q: 0,
            joint_profit,
            refs: EquilibriumRefs { collusive_joint_profit: collusive_profit, ..Default::default() },
        }
    }

    #[test]
    fn rolling_average_examples() {
        assert_eq!(rolling_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 3.5]);
        assert_eq!(rolling_average(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
        assert_eq!(rolling_average(&[1.0, 2.0, 3.0], 2), vec![1.5, 3.0]);
        assert!(rolling_average(&[], 5).is_empty());
    }

    #[test]
    fn regret_examples() {
        assert_eq!(joint_cumulative_regret(&[step(324.0, 288.0)]), vec![36.0]);
        let flat: Vec<StepRecord> = (0..4).map(|_| step(324.0, 324.0)).collect();
        assert_eq!(joint_cumulative_regret(&flat), vec![0.0; 4]);
        let walras = joint_cumulative_regret(&[step(324.0, 0.0), step(81.0, 0.0), step(324.0, 0.0)]);
        assert_eq!(walras, vec![324.0, 405.0, 729.0]);
    }

    #[test]
    fn windowed_regret_weights_by_steps() {
        let mut w = window(0, 24.0, 18.0, 36.0);
        w.collusive_profit = 324.0;
        w.joint_profit = 288.0;
        let mut tail = w.clone();
        tail.steps = 50;
        assert_eq!(windowed_collusive_regret(&[w, tail]), vec![3600.0, 5400.0]);
    }

    #[test]
    fn band_occupancy_examples() {
        let lo = [18.0; 4];
        let hi = [36.0; 4];
        assert_eq!(band_occupancy(&[24.0; 4], &lo, &hi).unwrap(), 1.0);
        assert_eq!(band_occupancy(&[72.0; 4], &lo, &hi).unwrap(), 0.0);
        assert_eq!(band_occupancy(&[24.0, 72.0, 20.0, 5.0], &lo, &hi).unwrap(), 0.5);
        assert_eq!(band_occupancy(&[24.0], &lo, &hi), Err(MetricsError::LengthMismatch(1, 4)));
    }

    #[test]
    fn recovery_examples() {
        let ws: Vec<WindowRecord> = (0..10)
            .map(|i| {
                let q = if (5..8).contains(&i) { 40.0 } else { 24.0 };
                window(i * 100, q, 18.0, 36.0)
            })
            .collect();
        assert_eq!(recovery_time(&ws, &[200]), vec![Recovery::Steps(0)]);
        assert_eq!(recovery_time(&ws, &[500]), vec![Recovery::Steps(300)]);
        // Unaligned breakpoint: counted from the first window starting after it.
        assert_eq!(recovery_time(&ws, &[450]), vec![Recovery::Steps(300)]);
        let out: Vec<WindowRecord> = (0..10).map(|i| window(i * 100, 50.0, 18.0, 36.0)).collect();
        assert_eq!(recovery_time(&out, &[300]), vec![Recovery::Never]);
        assert_eq!(recovery_time(&out, &[5000]), vec![Recovery::Never]);
    }

    #[test]
    fn recovery_serializes_with_sentinel() {
        let v = vec![Recovery::Steps(300), Recovery::Never];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[300,\"never\"]");
        let back: Vec<Recovery> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(Recovery::Steps(u64::MAX) < Recovery::Never);
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(fairness_spread(&[11.0, 11.0, 11.0]), 0.0);
        assert_eq!(fairness_spread(&[10.0, 12.0]), 2.0);
        assert_eq!(fairness_spread(&[7.0]), 0.0);
    }

    #[test]
    fn tail_means() {
        let ws: Vec<WindowRecord> = (0..10).map(|i| window(i * 100, i as f64 * 2.0, 0.0, 1.0)).collect();
        assert_eq!(tail_start(1000), 900);
        assert_eq!(firm_mean_q_since(&ws, 900), vec![9.0, 9.0]);
        assert_eq!(joint_mean_q_since(&ws, 800), 17.0);
    }
}
