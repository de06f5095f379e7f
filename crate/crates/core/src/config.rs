//! Experiment configuration, validation, and the refresh-slot rule shared by
//! both link-selection heuristics.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Deref, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identity in `[0, node_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Sequential block identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Milliseconds since simulation start, on the single global clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTime(pub f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);
    pub const NEVER: SimTime = SimTime(f64::INFINITY);

    #[inline]
    pub fn msec(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    #[inline]
    fn add(self, rhs: f64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;
    #[inline]
    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardingMode {
    /// A link carries announcements if either endpoint selected the other.
    #[default]
    Undirected,
    /// Only a node's own selections receive its announcements.
    Directed,
}

impl std::str::FromStr for ForwardingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "undirected" => Ok(ForwardingMode::Undirected),
            "directed" => Ok(ForwardingMode::Directed),
            other => Err(format!("unknown forwarding mode `{other}`")),
        }
    }
}

/// All tunables of one experiment. Keys in configuration files use exactly
/// these field names (`S`, `C`, `R` and `k` for the link counts and round
/// length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub node_count: u32,
    /// Scoring links retained per round.
    #[serde(rename = "S")]
    pub scoring_links: u32,
    /// Close links retained per period.
    #[serde(rename = "C")]
    pub close_links: u32,
    /// Random links, re-drawn at every refresh.
    #[serde(rename = "R")]
    pub random_links: u32,
    /// Blocks per scoring round.
    #[serde(rename = "k")]
    pub blocks_per_round: u32,
    pub close_period: f64,
    pub ping_count: u32,
    pub header_validation: f64,
    pub body_validation: f64,
    pub total_rtts: f64,
    pub calibration_rounds: u32,
    pub measurement_blocks: u32,
    pub inter_block_gap: f64,
    pub forwarding_mode: ForwardingMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_inbound: Option<u32>,
    pub intra_city_latency: f64,
    /// Multiplicative per-message jitter, uniform in `±latency_jitter`. Off when 0.
    pub latency_jitter: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            node_count: 1000,
            scoring_links: 3,
            close_links: 3,
            random_links: 2,
            blocks_per_round: 100,
            close_period: 10_000.0,
            ping_count: 5,
            header_validation: 5.0,
            body_validation: 50.0,
            total_rtts: 1.5,
            calibration_rounds: 128,
            measurement_blocks: 100,
            inter_block_gap: 30_000.0,
            forwarding_mode: ForwardingMode::Undirected,
            max_inbound: None,
            intra_city_latency: 2.0,
            latency_jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("cannot read configuration file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse configuration file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
}

impl ExperimentConfig {
    /// Configuration with the given `S`, `C`, `R` and defaults elsewhere.
    pub fn scr(scoring: u32, close: u32, random: u32) -> Self {
        ExperimentConfig {
            scoring_links: scoring,
            close_links: close,
            random_links: random,
            ..ExperimentConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn total_degree(&self) -> u32 {
        self.scoring_links + self.close_links + self.random_links
    }

    /// `S{x}-C{y}-R{z}` label.
    pub fn label(&self) -> String {
        format!(
            "S{}-C{}-R{}",
            self.scoring_links, self.close_links, self.random_links
        )
    }

    fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let (s, c, r) = (self.scoring_links, self.close_links, self.random_links);
        if self.node_count == 0 {
            errs.push("node_count must be positive".to_string());
        }
        if s > 0 && c > 0 && r % 2 != 0 {
            errs.push(format!(
                "R={r} must be even when both S and C are positive"
            ));
        }
        if s + c + r == 0 {
            errs.push("S + C + R must be at least 1".to_string());
        } else if self.node_count <= s + c + r {
            errs.push(format!(
                "node_count={} must exceed S + C + R = {}",
                self.node_count,
                s + c + r
            ));
        }
        if self.blocks_per_round == 0 {
            errs.push("k must be positive".to_string());
        }
        if self.ping_count == 0 {
            errs.push("ping_count must be positive".to_string());
        }
        if self.measurement_blocks == 0 {
            errs.push("measurement_blocks must be positive".to_string());
        }
        let pulls = self.total_rtts - 0.5;
        if !self.total_rtts.is_finite() || pulls < 0.0 || (pulls - pulls.round()).abs() > 1e-9 {
            errs.push(format!(
                "total_rtts={} must be one of 0.5, 1.5, 2.5, ...",
                self.total_rtts
            ));
        }
        for (name, v) in [
            ("close_period", self.close_period),
            ("inter_block_gap", self.inter_block_gap),
            ("intra_city_latency", self.intra_city_latency),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name}={v} must be a positive duration"));
            }
        }
        for (name, v) in [
            ("header_validation", self.header_validation),
            ("body_validation", self.body_validation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                errs.push(format!("{name}={v} must be a non-negative duration"));
            }
        }
        if !(0.0..1.0).contains(&self.latency_jitter) {
            errs.push(format!(
                "latency_jitter={} must lie in [0, 1)",
                self.latency_jitter
            ));
        }
        if self.max_inbound == Some(0) {
            errs.push("max_inbound must be positive when present".to_string());
        }
        errs
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(ValidatedConfig(self))
        } else {
            Err(ConfigError::InvalidConfig(errs))
        }
    }
}

/// A configuration that satisfied all invariants at construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidatedConfig(ExperimentConfig);

impl Deref for ValidatedConfig {
    type Target = ExperimentConfig;

    fn deref(&self) -> &ExperimentConfig {
        &self.0
    }
}

impl ValidatedConfig {
    pub fn into_inner(self) -> ExperimentConfig {
        self.0
    }

    /// Applies `edit` and validates the result again.
    pub fn with(&self, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<Self, ConfigError> {
        let mut cfg = self.0.clone();
        edit(&mut cfg);
        cfg.validate()
    }

    /// Number of request/response exchanges after the announcement.
    pub fn pull_rounds(&self) -> u32 {
        (self.total_rtts - 0.5).round() as u32
    }

    pub fn refresh_slots(&self) -> RefreshSlots {
        refresh_slots(self)
    }

    pub fn scoring_target(&self) -> usize {
        (self.scoring_links + self.refresh_slots().scoring) as usize
    }

    pub fn close_target(&self) -> usize {
        (self.close_links + self.refresh_slots().close) as usize
    }

    /// The scoring heuristic runs only when it has links to retain.
    pub fn scoring_active(&self) -> bool {
        self.scoring_links > 0
    }

    pub fn close_active(&self) -> bool {
        self.close_links > 0
    }
}

/// Random slots each heuristic re-fills at its refresh boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefreshSlots {
    pub scoring: u32,
    pub close: u32,
}

/// Splits `R` between the sets: evenly when both heuristics are on, otherwise
/// all to the one present. With `S = C = 0` the `R` links sit in the scoring
/// slot and neither heuristic ever runs, giving a static random overlay.
pub fn refresh_slots(cfg: &ValidatedConfig) -> RefreshSlots {
    let r = cfg.random_links;
    match (cfg.scoring_links > 0, cfg.close_links > 0) {
        (true, true) => RefreshSlots {
            scoring: r / 2,
            close: r / 2,
        },
        (_, false) => RefreshSlots { scoring: r, close: 0 },
        (false, true) => RefreshSlots { scoring: 0, close: r },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scr(s: u32, c: u32, r: u32) -> ExperimentConfig {
        ExperimentConfig::scr(s, c, r)
    }

    #[test]
    fn balanced_config_sizes() {
        let cfg = scr(3, 3, 2).validate().unwrap();
        assert_eq!(cfg.scoring_target(), 4);
        assert_eq!(cfg.close_target(), 4);
    }

    #[test]
    fn scoring_only_keeps_one_random_link() {
        let cfg = scr(7, 0, 1).validate().unwrap();
        assert_eq!(cfg.scoring_target(), 8);
        assert_eq!(cfg.close_target(), 0);
        assert!(!cfg.close_active());
    }

    #[test]
    fn odd_random_with_both_heuristics_is_rejected() {
        let err = scr(2, 2, 3).validate().unwrap_err();
        match err {
            ConfigError::InvalidConfig(v) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].contains("even"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_violation_is_reported() {
        let mut cfg = scr(2, 2, 3);
        cfg.total_rtts = 1.0;
        cfg.node_count = 5;
        cfg.blocks_per_round = 0;
        let ConfigError::InvalidConfig(v) = cfg.validate().unwrap_err() else {
            panic!()
        };
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn refresh_split() {
        let slots = |s, c, r| scr(s, c, r).validate().unwrap().refresh_slots();
        assert_eq!(slots(3, 3, 2), RefreshSlots { scoring: 1, close: 1 });
        assert_eq!(slots(7, 0, 1), RefreshSlots { scoring: 1, close: 0 });
        assert_eq!(slots(0, 7, 1), RefreshSlots { scoring: 0, close: 1 });
        assert_eq!(slots(0, 0, 8), RefreshSlots { scoring: 8, close: 0 });
        for (s, c, r) in [(3, 3, 2), (7, 0, 1), (0, 7, 1), (1, 1, 6), (0, 0, 8)] {
            let cfg = scr(s, c, r).validate().unwrap();
            assert_eq!(cfg.scoring_target() + cfg.close_target(), (s + c + r) as usize);
        }
    }

    #[test]
    fn pull_rounds_follow_rtt_budget() {
        for (rtts, pulls) in [(0.5, 0), (1.5, 1), (2.5, 2), (3.5, 3)] {
            let mut cfg = scr(3, 3, 2);
            cfg.total_rtts = rtts;
            assert_eq!(cfg.validate().unwrap().pull_rounds(), pulls);
        }
        let mut cfg = scr(3, 3, 2);
        cfg.total_rtts = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let v = scr(3, 3, 2).validate().unwrap();
        let again = v.clone().into_inner().validate().unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn toml_keys_match_field_names() {
        let cfg = ExperimentConfig::from_toml_str(
            "S = 7\nC = 0\nR = 1\nk = 50\nnode_count = 200\nforwarding_mode = \"directed\"\nmax_inbound = 12\n",
        )
        .unwrap();
        assert_eq!(cfg.scoring_links, 7);
        assert_eq!(cfg.blocks_per_round, 50);
        assert_eq!(cfg.forwarding_mode, ForwardingMode::Directed);
        assert_eq!(cfg.max_inbound, Some(12));
        assert_eq!(cfg.body_validation, 50.0);
        let echoed = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(echoed, cfg);
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    }
}
