//! Named experiment configurations.
//!
//! A preset name is a market name, optionally suffixed with a demand pattern:
//! `duopoly` runs pattern 1, `duopoly-pattern3` runs pattern 3.

use crate::agents::PolicyKind;
use crate::demand::DemandPattern;
use crate::engine::SimConfig;
use crate::market::MarketConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub market: MarketConfig,
}

pub fn market_presets() -> Vec<MarketPreset> {
    vec![
        MarketPreset {
            name: "duopoly",
            description: "symmetric duopoly, quantities 0..40",
            market: MarketConfig::symmetric(2, 4.0, 1.0, 40.0, 41),
        },
        MarketPreset {
            name: "ten-firm",
            description: "ten symmetric firms",
            market: MarketConfig::symmetric(10, 10.0, 1.0, 500.0, 50),
        },
        MarketPreset {
            name: "fifty-firm",
            description: "fifty symmetric firms",
            market: MarketConfig::symmetric(50, 20.0, 1.0, 1000.0, 50),
        },
        MarketPreset {
            name: "scaled-actions",
            description: "symmetric duopoly with 500 arms",
            market: MarketConfig::symmetric(2, 4.0, 1.0, 500.0, 500),
        },
        MarketPreset {
            name: "asym-duopoly",
            description: "duopoly with unequal marginal costs",
            market: MarketConfig { costs: vec![1.0, 3.0], v: 1.0, u_s: 40.0, arms: 41 },
        },
        MarketPreset {
            name: "monopoly",
            description: "single firm, quantities 0..40",
            market: MarketConfig::symmetric(1, 4.0, 1.0, 40.0, 41),
        },
    ]
}

/// One-line parameter summary, e.g. `fifty-firm: n=50 K=50 c=20 u_s=1000 v=1`.
pub fn describe(p: &MarketPreset) -> String {
    let m = &p.market;
    let costs = if m.is_symmetric() {
        format!("c={}", m.costs[0])
    } else {
        let list: Vec<String> = m.costs.iter().map(|c| c.to_string()).collect();
        format!("c=[{}]", list.join(","))
    };
    format!("{}: n={} K={} {} u_s={} v={} ({})", p.name, m.n(), m.arms, costs, m.u_s, m.v, p.description)
}

/// Resolves `name` (optionally `<market>-<pattern>`) to a run config using
/// AWE agents.
pub fn preset(name: &str) -> Option<SimConfig> {
    let (market, pattern) = market_presets()
        .into_iter()
        .find_map(|p| {
            if name == p.name {
                return Some((p.market, DemandPattern::Pattern1));
            }
            let suffix = name.strip_prefix(p.name)?.strip_prefix('-')?;
            suffix.parse().ok().map(|pattern| (p.market.clone(), pattern))
        })?;
    Some(SimConfig::new(market, pattern, PolicyKind::default()))
}

pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for p in market_presets() {
        names.push(p.name.to_owned());
        names.extend(DemandPattern::ALL.iter().map(|pat| format!("{}-{pat}", p.name)));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_names() {
        let d = preset("duopoly").unwrap();
        assert_eq!(d.demand.pattern, DemandPattern::Pattern1);
        assert_eq!(d.market.arms, 41);
        assert_eq!(preset("duopoly-pattern3").unwrap().demand.pattern, DemandPattern::Pattern3);
        assert_eq!(preset("fifty-firm-stationary").unwrap().market.n(), 50);
        assert!(preset("duopoly-pattern9").is_none());
        assert!(preset("triopoly").is_none());
        assert!(preset_names().iter().all(|n| preset(n).is_some()));
    }

    #[test]
    fn descriptions_match_experiment_grid() {
        let lines: Vec<String> = market_presets().iter().map(describe).collect();
        assert!(lines.iter().any(|l| l.starts_with("fifty-firm: n=50 K=50 c=20 u_s=1000")));
        assert!(lines.iter().any(|l| l.starts_with("asym-duopoly: n=2 K=41 c=[1,3]")));
        assert!(lines.iter().any(|l| l.starts_with("duopoly: n=2 K=41 c=4 u_s=40 v=1")));
    }
}
