//! TOML run configuration.
//!
//! ```toml
//! preset = "duopoly"          # optional base, see `presets`
//!
//! [market]                    # required without a preset
//! n = 2                       # with `cost`, or give `costs = [1.0, 3.0]`
//! cost = 4.0
//! v = 1.0
//! u_s = 40.0
//! arms = 41
//!
//! [demand]
//! pattern = "pattern1"        # stationary | pattern1 | pattern2 | pattern3
//! gamma = 0.01
//!
//! [run]
//! steps = 100000
//! seed = 7
//! log_window = 100
//! full_log = false
//! diagnostics = false
//!
//! [policy]                    # shared by all firms
//! kind = "awe"                # awe | vanilla | adaptive, plus its parameters
//!
//! # or one table per firm instead of [policy]:
//! # [[policies]]
//! # kind = "adaptive"
//! ```
//!
//! Unknown keys anywhere are errors.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::agents::PolicyKind;
use crate::demand::DemandPattern;
use crate::engine::{DemandConfig, SimConfig, DEFAULT_LOG_WINDOW, DEFAULT_STEPS};
use crate::market::MarketConfig;
use crate::presets;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key the problem is about, when known.
    pub key: Option<String>,
    /// 1-based line in the config text.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    market: Option<RawMarket>,
    demand: Option<RawDemand>,
    run: Option<RawRun>,
    policy: Option<PolicyKind>,
    policies: Option<Vec<PolicyKind>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    n: Option<usize>,
    cost: Option<f64>,
    costs: Option<Vec<f64>>,
    v: Option<f64>,
    u_s: Option<f64>,
    arms: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    pattern: Option<DemandPattern>,
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    steps: Option<usize>,
    seed: Option<u64>,
    log_window: Option<usize>,
    full_log: Option<bool>,
    diagnostics: Option<bool>,
}

/// A parsed config together with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub sim: SimConfig,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: &Path) -> Result<LoadedConfig, LoadError> {
    let text = std::fs::read_to_string(path).map_err(LoadError::Io)?;
    let sim = parse(&text).map_err(LoadError::Config)?;
    Ok(LoadedConfig { sim, sha256: sha256_hex(text.as_bytes()) })
}

#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Config(ConfigError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "cannot read config: {e}"),
            Self::Config(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for LoadError {}

/// Parses and validates config text.
pub fn parse(text: &str) -> Result<SimConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    let err = |key: &str, message: String| ConfigError { line: key_line(text, key), key: Some(key.to_owned()), message };

    let base = match &raw.preset {
        Some(name) => Some(
            presets::preset(name).ok_or_else(|| err("preset", format!("unknown preset {name:?}")))?,
        ),
        None => None,
    };

    let market = build_market(raw.market.unwrap_or_default(), base.as_ref().map(|b| &b.market), &err)?;
    let n = market.n();

    let demand = raw.demand.unwrap_or_default();
    let pattern = match (demand.pattern, &base) {
        (Some(p), _) => p,
        (None, Some(b)) => b.demand.pattern,
        (None, None) => return Err(err("demand.pattern", "missing (no preset given)".into())),
    };
    let gamma = demand.gamma.or(base.as_ref().map(|b| b.demand.gamma)).unwrap_or(DemandConfig::default().gamma);
    if !(0.0..=1.0).contains(&gamma) {
        return Err(err("demand.gamma", format!("must lie in [0, 1], got {gamma}")));
    }

    let run = raw.run.unwrap_or_default();
    let steps = run.steps.unwrap_or(DEFAULT_STEPS);
    if steps == 0 {
        return Err(err("run.steps", "must be >= 1".into()));
    }
    let log_window = run.log_window.unwrap_or(DEFAULT_LOG_WINDOW);
    if log_window == 0 {
        return Err(err("run.log_window", "must be >= 1".into()));
    }

    let policies = match (raw.policy, raw.policies) {
        (Some(_), Some(_)) => {
            return Err(err("policies", "give either [policy] or [[policies]], not both".into()));
        }
        (Some(p), None) => {
            p.validate().map_err(|e| err("policy", e.to_string()))?;
            vec![p; n]
        }
        (None, Some(list)) => {
            if list.len() != n {
                return Err(err("policies", format!("{} entries for {n} firms", list.len())));
            }
            for (i, p) in list.iter().enumerate() {
                p.validate().map_err(|e| err("policies", format!("entry {i}: {e}")))?;
            }
            list
        }
        (None, None) => vec![PolicyKind::default(); n],
    };

    let sim = SimConfig {
        market,
        demand: DemandConfig { pattern, gamma },
        steps,
        policies,
        seed: run.seed.unwrap_or(0),
        log_window,
        full_log: run.full_log.unwrap_or(false),
        diagnostics: run.diagnostics.unwrap_or(false),
        agent_streams: None,
    };
    sim.validate().map_err(|e| ConfigError { key: None, line: None, message: e.to_string() })?;
    Ok(sim)
}

fn build_market(
    raw: RawMarket,
    base: Option<&MarketConfig>,
    err: &dyn Fn(&str, String) -> ConfigError,
) -> Result<MarketConfig, ConfigError> {
    let costs = match (raw.costs, raw.cost, raw.n) {
        (Some(_), Some(_), _) => return Err(err("market.costs", "give either `cost` or `costs`, not both".into())),
        (Some(list), None, n) => {
            if n.is_some_and(|n| n != list.len()) {
                return Err(err("market.n", format!("does not match the {} entries of `costs`", list.len())));
            }
            list
        }
        (None, Some(c), n) => {
            let n = n.or(base.map(MarketConfig::n)).ok_or_else(|| err("market.n", "missing".into()))?;
            vec![c; n]
        }
        (None, None, n) => {
            let b = base.ok_or_else(|| err("market.cost", "missing (no preset given)".into()))?;
            match n {
                Some(n) if b.is_symmetric() => vec![b.costs[0]; n],
                Some(_) => return Err(err("market.n", "preset has unequal costs; give `costs`".into())),
                None => b.costs.clone(),
            }
        }
    };
    if costs.is_empty() {
        return Err(err("market.n", "at least one firm is required".into()));
    }
    if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(err("market.costs", format!("costs must be finite and >= 0, got {c}")));
    }
    let field = |v: Option<f64>, b: Option<f64>, key: &str| v.or(b).ok_or_else(|| err(key, "missing (no preset given)".into()));
    let v = field(raw.v, base.map(|b| b.v).or(Some(1.0)), "market.v")?;
    let u_s = field(raw.u_s, base.map(|b| b.u_s), "market.u_s")?;
    if !(v.is_finite() && v > 0.0) {
        return Err(err("market.v", format!("must be > 0, got {v}")));
    }
    if !(u_s.is_finite() && u_s > 0.0) {
        return Err(err("market.u_s", format!("must be > 0, got {u_s}")));
    }
    let arms = raw.arms.or(base.map(|b| b.arms)).ok_or_else(|| err("market.arms", "missing (no preset given)".into()))?;
    if arms < 2 {
        return Err(err("market.arms", format!("at least 2 arms are required, got {arms}")));
    }
    Ok(MarketConfig { costs, v, u_s, arms })
}

fn syntax_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let line = e.span().map(|s| line_of(text, s.start));
    let key = line.and_then(|l| key_at_line(text, l));
    ConfigError { key, line, message: e.message().to_owned() }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Dotted key assigned on `line`, prefixed with the enclosing table.
fn key_at_line(text: &str, line: usize) -> Option<String> {
    let mut table = String::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if let Some(h) = table_header(t) {
            table = h;
        }
        if i + 1 == line {
            if table_header(t).is_some() {
                return Some(table);
            }
            let key = t.split_once('=')?.0.trim();
            return Some(if table.is_empty() { key.to_owned() } else { format!("{table}.{key}") });
        }
    }
    None
}

fn table_header(t: &str) -> Option<String> {
    let inner = t.strip_prefix("[[").and_then(|s| s.split_once("]]")).map(|(h, _)| h)
        .or_else(|| t.strip_prefix('[').and_then(|s| s.split_once(']')).map(|(h, _)| h))?;
    Some(inner.trim().to_owned())
}

/// Line where a dotted key (or table) is written, if it appears in the text.
fn key_line(text: &str, dotted: &str) -> Option<usize> {
    let (table, key) = dotted.rsplit_once('.').unwrap_or(("", dotted));
    let mut current = String::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if let Some(h) = table_header(t) {
            if h == dotted {
                return Some(i + 1);
            }
            current = h;
            continue;
        }
        if current == table && t.split_once('=').is_some_and(|(k, _)| k.trim() == key) {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_overrides() {
        let cfg = parse("preset = \"duopoly\"\n[run]\nsteps = 500\nseed = 9\n[demand]\npattern = \"pattern2\"\n").unwrap();
        assert_eq!(cfg.market.arms, 41);
        assert_eq!(cfg.steps, 500);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.demand.pattern, DemandPattern::Pattern2);
        assert_eq!(cfg.policies.len(), 2);
    }

    #[test]
    fn explicit_market_and_policies() {
        let text = r#"
[market]
costs = [1.0, 3.0]
u_s = 40.0
arms = 41

[demand]
pattern = "stationary"

[[policies]]
kind = "awe"

[[policies]]
kind = "adaptive"
alpha = 0.2
"#;
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.market.costs, vec![1.0, 3.0]);
        assert_eq!(cfg.market.v, 1.0);
        assert_eq!(cfg.policies[1].name(), "adaptive");
    }

    #[test]
    fn bad_pattern_names_key_and_line() {
        let e = parse("preset = \"duopoly\"\n\n[demand]\npattern = \"pattern9\"\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert_eq!(e.key.as_deref(), Some("demand.pattern"));
        assert!(e.to_string().contains("demand.pattern"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = parse("preset = \"duopoly\"\n[run]\nstpes = 10\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("stpes"), "{e}");
    }

    #[test]
    fn semantic_errors_point_at_key() {
        let e = parse("preset = \"duopoly\"\n[market]\narms = 1\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("market.arms"), Some(3)));
        let e = parse("preset = \"duopoly\"\n[policy]\nkind = \"awe\"\neps_min = 0.9\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("policy"), Some(2)));
        let e = parse("[market]\nn = 2\ncost = 4.0\nu_s = 40.0\narms = 41\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("demand.pattern"));
        let e = parse("preset = \"nope\"\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("preset"), Some(1)));
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
