//! Non-stationary demand-intercept schedules.
//!
//! Only the intercept `u_t` of the inverse demand moves. Three shapes are
//! supported besides a constant baseline:
//!
//! * `Pattern1`: sudden recurring shocks. `u_s` halves at `T/3`, recovers at
//!   `T/2` and halves again at `3T/4` (integer floor breakpoints, each level held
//!   from its breakpoint onward).
//! * `Pattern2`: a smooth bell, `u_s * exp(-((t - m) / m)^2 / 2)` with `m = T/2`,
//!   i.e. the normal pdf with mean and std `m` rescaled to peak at `u_s`.
//! * `Pattern3`: erratic multiplicative jumps. Each step draws `z ~ U(0,1)`; if
//!   `z < gamma` the level is multiplied by `|X|`, `X ~ N(1, 0.2^2)`.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_GAMMA: f64 = 0.01;
pub const SHOCK_MU: f64 = 1.0;
pub const SHOCK_SIGMA: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("unknown demand pattern `{0}` (expected pattern1, pattern2, pattern3 or stationary)")]
    UnknownPattern(String),
    #[error("invalid demand parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandPattern {
    Pattern1,
    Pattern2,
    Pattern3,
    Stationary,
}

impl DemandPattern {
    pub const ALL: [DemandPattern; 4] =
        [Self::Pattern1, Self::Pattern2, Self::Pattern3, Self::Stationary];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pattern1 => "pattern1",
            Self::Pattern2 => "pattern2",
            Self::Pattern3 => "pattern3",
            Self::Stationary => "stationary",
        }
    }
}

impl fmt::Display for DemandPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DemandPattern {
    type Err = DemandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| DemandError::UnknownPattern(s.to_owned()))
    }
}

/// The three step indices at which `Pattern1` switches level.
pub fn pattern1_breakpoints(horizon: usize) -> [usize; 3] {
    [horizon / 3, horizon / 2, 3 * horizon / 4]
}

pub fn pattern1_u(t: usize, horizon: usize, u_s: f64) -> f64 {
    let [third, half, three_quarters] = pattern1_breakpoints(horizon);
    if t < third || (half..three_quarters).contains(&t) {
        u_s
    } else {
        u_s / 2.0
    }
}

pub fn pattern2_u(t: usize, horizon: usize, u_s: f64) -> f64 {
    let mid = (horizon / 2).max(1) as f64;
    let z = (t as f64 - mid) / mid;
    u_s * (-0.5 * z * z).exp()
}

/// One `Pattern3` transition with the uniform draw `z` and the shock `x` given.
pub fn pattern3_step(u_prev: f64, gamma: f64, z: f64, x: f64) -> f64 {
    if z < gamma {
        let next = u_prev * x.abs();
        // |X| == 0 has probability zero, but a zero intercept would break positivity.
        if next > 0.0 {
            next
        } else {
            u_prev
        }
    } else {
        u_prev
    }
}

/// One `Pattern3` transition drawing from `rng`. Returns the new level and
/// whether a change event fired.
pub fn pattern3_next<R: Rng + ?Sized>(u_prev: f64, gamma: f64, rng: &mut R) -> (f64, bool) {
    let z: f64 = rng.random();
    if z < gamma {
        let x = shock_distribution().sample(rng);
        (pattern3_step(u_prev, gamma, z, x), true)
    } else {
        (u_prev, false)
    }
}

fn shock_distribution() -> Normal<f64> {
    Normal::new(SHOCK_MU, SHOCK_SIGMA).expect("constant normal parameters are valid")
}

/// Fully materialized demand series together with its generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSchedule {
    pub pattern: DemandPattern,
    pub u_s: f64,
    pub horizon: usize,
    pub gamma: f64,
    pub seed: u64,
    pub values: Vec<f64>,
    /// Number of `Pattern3` change events (0 for the other patterns).
    pub change_events: usize,
}

impl DemandSchedule {
    pub fn u(&self, t: usize) -> f64 {
        self.values[t]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Two-column `t,u_t` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,u_t")?;
        for (t, u) in self.values.iter().enumerate() {
            writeln!(out, "{t},{}", crate::output::fmt_f64(*u))?;
        }
        Ok(())
    }
}

/// Builds the schedule for `pattern`. `Pattern3` consumes `rng`, which should
/// be a stream reserved for demand.
pub fn build_schedule_with_rng<R: Rng + ?Sized>(
    pattern: DemandPattern,
    horizon: usize,
    u_s: f64,
    gamma: f64,
    seed: u64,
    rng: &mut R,
) -> Result<DemandSchedule, DemandError> {
    if horizon == 0 {
        return Err(DemandError::InvalidParams("horizon must be >= 1".into()));
    }
    if !(u_s > 0.0 && u_s.is_finite()) {
        return Err(DemandError::InvalidParams("u_s must be positive".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(DemandError::InvalidParams("gamma must lie in [0, 1]".into()));
    }
    let mut change_events = 0;
    let values = match pattern {
        DemandPattern::Stationary => vec![u_s; horizon],
        DemandPattern::Pattern1 => (0..horizon).map(|t| pattern1_u(t, horizon, u_s)).collect(),
        DemandPattern::Pattern2 => (0..horizon).map(|t| pattern2_u(t, horizon, u_s)).collect(),
        DemandPattern::Pattern3 => {
            let mut values = Vec::with_capacity(horizon);
            let mut u = u_s;
            values.push(u);
            for _ in 1..horizon {
                let (next, changed) = pattern3_next(u, gamma, rng);
                change_events += usize::from(changed);
                u = next;
                values.push(u);
            }
            values
        }
    };
    Ok(DemandSchedule { pattern, u_s, horizon, gamma, seed, values, change_events })
}

/// Builds the schedule using the demand stream derived from `seed`.
pub fn build_schedule(
    pattern: DemandPattern,
    horizon: usize,
    u_s: f64,
    gamma: f64,
    seed: u64,
) -> Result<DemandSchedule, DemandError> {
    let mut rng = crate::rng::demand_stream(seed);
    build_schedule_with_rng(pattern, horizon, u_s, gamma, seed, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern1_levels() {
        let t_max = 99_999;
        assert_eq!(pattern1_u(0, t_max, 40.0), 40.0);
        assert_eq!(pattern1_u(t_max / 3, t_max, 40.0), 20.0);
        assert_eq!(pattern1_u(t_max / 3 - 1, t_max, 40.0), 40.0);
        assert_eq!(pattern1_u(t_max / 2, t_max, 40.0), 40.0);
        assert_eq!(pattern1_u(3 * t_max / 4, t_max, 40.0), 20.0);
        assert_eq!(pattern1_u(t_max - 1, t_max, 40.0), 20.0);
    }

    #[test]
    fn pattern1_short_schedule() {
        let s = build_schedule(DemandPattern::Pattern1, 12, 40.0, DEFAULT_GAMMA, 0).unwrap();
        let expected = [40., 40., 40., 40., 20., 20., 40., 40., 40., 20., 20., 20.];
        assert_eq!(s.values, expected);
    }

    #[test]
    fn pattern2_shape() {
        let t_max = 100_000;
        assert_eq!(pattern2_u(t_max / 2, t_max, 40.0), 40.0);
        let expected = 40.0 * (-0.5f64).exp();
        assert!((pattern2_u(0, t_max, 40.0) - expected).abs() < 1e-9);
        assert!((expected - 24.261).abs() < 1e-3);
        for d in [1, 17, 1000, 49_999] {
            assert_eq!(pattern2_u(t_max / 2 - d, t_max, 40.0), pattern2_u(t_max / 2 + d, t_max, 40.0));
        }
    }

    #[test]
    fn stationary_is_flat() {
        let s = build_schedule(DemandPattern::Stationary, 3, 40.0, DEFAULT_GAMMA, 9).unwrap();
        assert_eq!(s.values, vec![40.0; 3]);
    }

    #[test]
    fn pattern3_without_events_is_flat() {
        let s = build_schedule(DemandPattern::Pattern3, 5_000, 40.0, 0.0, 3).unwrap();
        assert!(s.values.iter().all(|&u| u == 40.0));
        assert_eq!(s.change_events, 0);
    }

    #[test]
    fn pattern3_unit_shock_is_identity() {
        assert_eq!(pattern3_step(40.0, 1.0, 0.3, 1.0), 40.0);
        assert_eq!(pattern3_step(40.0, 1.0, 0.3, -1.5), 60.0);
        assert_eq!(pattern3_step(40.0, 0.2, 0.3, 3.0), 40.0);
    }

    #[test]
    fn pattern3_is_seed_deterministic() {
        let a = build_schedule(DemandPattern::Pattern3, 20_000, 40.0, 0.01, 77).unwrap();
        let b = build_schedule(DemandPattern::Pattern3, 20_000, 40.0, 0.01, 77).unwrap();
        let c = build_schedule(DemandPattern::Pattern3, 20_000, 40.0, 0.01, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert!(a.values.iter().all(|&u| u > 0.0));
    }

    #[test]
    fn unknown_pattern_name() {
        assert_eq!("pattern2".parse::<DemandPattern>().unwrap(), DemandPattern::Pattern2);
        assert!(matches!("pattern4".parse::<DemandPattern>(), Err(DemandError::UnknownPattern(_))));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(build_schedule(DemandPattern::Pattern1, 0, 40.0, 0.01, 0).is_err());
        assert!(build_schedule(DemandPattern::Pattern1, 10, 0.0, 0.01, 0).is_err());
        assert!(build_schedule(DemandPattern::Pattern3, 10, 40.0, 1.5, 0).is_err());
    }

    #[test]
    fn csv_export() {
        let s = build_schedule(DemandPattern::Pattern1, 4, 40.0, 0.01, 0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,u_t\n0,40\n1,20\n2,40\n3,20\n");
    }
}
