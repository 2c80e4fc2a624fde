//! Scenario schema: one JSON document describes a complete run.
//!
//! Times are exact rationals serialized as strings ("3", "1/2") so that a
//! scenario round-trips without precision loss. The schema is versioned;
//! loading rejects unknown fields and inconsistent configurations before any
//! simulation starts.

use pharos::committee::{Beta, Universe};
use pharos::finalizer::FinalizeMode;
use pharos::setup::{bootstrap, SystemSetup};
use pharos::threshold::SchemeParams;
use pharos::time::Time;
use pharos::Label;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

/// The schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Exact rational time with string serialization ("3", "1/2").
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Ts(pub Time);

impl fmt::Display for Ts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Ts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Ts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Ts, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse::<Time>().map(Ts).map_err(D::Error::custom)
    }
}

/// Which Schnorr group preset replicas sign in.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 61-bit subgroup: fast enough for thousand-round runs.
    #[default]
    Toy,
    /// 2048-bit MODP group: full-width, for spot checks.
    Standard,
}

impl Preset {
    pub fn params(self) -> SchemeParams {
        match self {
            Preset::Toy => SchemeParams::toy(),
            Preset::Standard => SchemeParams::standard(),
        }
    }
}

/// Observer finalization rule.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalizeSpec {
    Timer { delay: Ts },
    TwoRound,
}

impl FinalizeSpec {
    pub fn mode(self) -> FinalizeMode {
        match self {
            FinalizeSpec::Timer { delay } => FinalizeMode::Timer { delay: delay.0 },
            FinalizeSpec::TwoRound => FinalizeMode::TwoRound,
        }
    }
}

/// Per-hop network delay distribution. Every draw is strictly below the
/// synchrony bound: "before t + delta" means earlier, not at.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelaySpec {
    /// Every hop takes `fraction * delta`, `0 <= fraction < 1`.
    Degenerate { fraction: Ts },
    /// Uniform over the odd dyadics `(2k+1)/2^21 * delta`, `k < 2^20`.
    Uniform,
}

impl Default for DelaySpec {
    fn default() -> DelaySpec {
        DelaySpec::Uniform
    }
}

/// One Byzantine replica and what it does. Behaviors transform the outputs
/// of an honestly-coded replica; see the `adversary` module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub label: u64,
    pub behavior: BehaviorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BehaviorSpec {
    /// Broadcast a second, conflicting proposal whenever proposing.
    Equivocate,
    /// Never broadcast notarization signature shares.
    WithholdSignatures,
    /// Withhold shares, assemble notarizations privately, reveal them
    /// `delay` after assembly.
    WithholdNotarization { delay: Ts },
    /// Retarget own proposals to extend own previous-round block.
    SelfishChain,
    /// Emit nothing at or after `at`.
    Crash { at: Ts },
    /// Never broadcast beacon shares.
    BeaconAbstain,
}

/// A network split. Starts either at an absolute time or when the first
/// honest replica enters `start_round`; ends at an absolute time or a
/// duration after the actual start. Messages crossing component boundaries
/// are dropped at send time and never delivered retroactively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_round: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_time: Option<Ts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_time: Option<Ts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Ts>,
    pub components: Vec<Vec<u64>>,
}

/// Optional scenario-specific assertions layered over the always-on checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    /// Every simulated round must have exactly one notarized block.
    pub all_normal: bool,
    /// Finality no later than the second confirmation's arrival plus the
    /// finalize delay, for every observer. Requires timer-mode finalization.
    pub main_theorem: bool,
    pub growth: Option<GrowthCheck>,
    pub quality: Option<QualityCheck>,
    pub stall: Option<StallCheck>,
}

/// Finalized length at the end of round r must be at least r - k, with at
/// most `allowed_violations` failing rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthCheck {
    pub k: u64,
    pub allowed_violations: u64,
}

/// In every window of `eta` consecutive rounds up to round `upto`, at least
/// `num/den` of the finalized blocks are honest-owned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityCheck {
    pub eta: u64,
    pub num: u64,
    pub den: u64,
    pub upto: u64,
}

/// Beacon expectations around one partition: which components stall (no new
/// randomness) and which stay live, plus how fast production resumes after
/// the heal, in rounds' worth of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StallCheck {
    pub partition: usize,
    pub stalled: Vec<usize>,
    pub live: Vec<usize>,
    pub resume_rounds: u64,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}
fn default_group_count() -> u64 {
    1
}
fn default_observers() -> u64 {
    1
}
fn default_beta() -> String {
    "3".to_string()
}
fn default_epoch_length() -> u64 {
    10
}

/// A complete run description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub preset: Preset,
    /// Universe size; replicas are labeled 1..=universe.
    pub universe: u64,
    #[serde(default = "default_group_count")]
    pub group_count: u64,
    pub group_size: u32,
    /// Signature threshold; defaults to floor(group_size/2) + 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
    /// Advertised adversarial bound; adversary count must respect it unless
    /// `allow_beta_violation` is set.
    #[serde(default = "default_beta")]
    pub beta: String,
    #[serde(default)]
    pub allow_beta_violation: bool,
    #[serde(default = "default_epoch_length")]
    pub epoch_length: u64,
    /// Rounds to simulate; the run stops once every honest replica has
    /// entered round `rounds + 1`.
    pub rounds: u64,
    /// Maximum network delay.
    pub delta: Ts,
    /// Notarization waiting period.
    pub block_time: Ts,
    pub finalize: FinalizeSpec,
    #[serde(default)]
    pub delay: DelaySpec,
    /// External keyless observers fed notarized blocks over the same
    /// network model.
    #[serde(default = "default_observers")]
    pub observers: u64,
    /// Seeds key generation and the delay stream.
    pub master_seed: String,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    #[serde(default)]
    pub partitions: Vec<PartitionSpec>,
    #[serde(default)]
    pub checks: CheckSpec,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, String> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| e.to_string())?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Scenario::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }

    pub fn threshold(&self) -> u32 {
        self.threshold.unwrap_or(self.group_size / 2 + 1)
    }

    pub fn parsed_beta(&self) -> Result<Beta, String> {
        self.beta.parse::<Beta>().map_err(|e| format!("beta: {e}"))
    }

    pub fn byzantine(&self) -> BTreeSet<Label> {
        self.adversaries.iter().map(|a| Label(a.label)).collect()
    }

    pub fn honest(&self) -> BTreeSet<Label> {
        let byz = self.byzantine();
        (1..=self.universe).map(Label).filter(|l| !byz.contains(l)).collect()
    }

    /// No partitions configured: the synchrony hypothesis holds end to end.
    pub fn is_sync(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != SCHEMA_VERSION {
            return Err(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.version
            ));
        }
        if self.name.is_empty() {
            return Err("name must be nonempty".into());
        }
        if self.universe == 0 {
            return Err("universe must be positive".into());
        }
        if self.group_count == 0 {
            return Err("group_count must be positive".into());
        }
        if self.group_size == 0 || self.group_size as u64 > self.universe {
            return Err("group_size must be in 1..=universe".into());
        }
        let t = self.threshold();
        if t == 0 || t > self.group_size {
            return Err("threshold must be in 1..=group_size".into());
        }
        if self.rounds == 0 {
            return Err("rounds must be positive".into());
        }
        if !(self.delta.0 > Time::ZERO) {
            return Err("delta must be positive".into());
        }
        if !(self.block_time.0 > Time::ZERO) {
            return Err("block_time must be positive".into());
        }
        if let FinalizeSpec::Timer { delay } = self.finalize {
            if delay.0.is_negative() {
                return Err("finalize timer delay must be nonnegative".into());
            }
        }
        if let DelaySpec::Degenerate { fraction } = self.delay {
            if fraction.0.is_negative() || !(fraction.0 < Time::from_int(1)) {
                return Err("degenerate delay fraction must be in [0, 1)".into());
            }
        }
        if self.epoch_length == 0 {
            return Err("epoch_length must be positive".into());
        }
        if self.master_seed.is_empty() {
            return Err("master_seed must be nonempty".into());
        }

        let mut seen = BTreeSet::new();
        for a in &self.adversaries {
            if a.label == 0 || a.label > self.universe {
                return Err(format!("adversary label {} outside universe", a.label));
            }
            if !seen.insert(a.label) {
                return Err(format!("adversary label {} listed twice", a.label));
            }
            match &a.behavior {
                BehaviorSpec::WithholdNotarization { delay } if delay.0.is_negative() => {
                    return Err("withhold-notarization delay must be nonnegative".into());
                }
                BehaviorSpec::Crash { at } if at.0.is_negative() => {
                    return Err("crash time must be nonnegative".into());
                }
                _ => {}
            }
        }
        let beta = self.parsed_beta()?;
        let universe = Universe::contiguous(self.universe, self.byzantine())
            .map_err(|e| format!("universe: {e}"))?;
        if !self.allow_beta_violation {
            universe.check_beta(beta).map_err(|e| format!("{e}"))?;
        }

        for (i, p) in self.partitions.iter().enumerate() {
            match (p.start_round, p.start_time) {
                (Some(r), None) if r >= 1 && r <= self.rounds => {}
                (None, Some(t)) if !t.0.is_negative() => {}
                _ => {
                    return Err(format!(
                        "partition {i}: exactly one of start_round (in 1..=rounds) or \
                         start_time (nonnegative) required"
                    ));
                }
            }
            match (p.end_time, p.duration) {
                (Some(e), None) => {
                    let Some(s) = p.start_time else {
                        return Err(format!("partition {i}: end_time requires start_time"));
                    };
                    if !(e.0 > s.0) {
                        return Err(format!("partition {i}: end_time must follow start_time"));
                    }
                }
                (None, Some(d)) if d.0 > Time::ZERO => {}
                _ => {
                    return Err(format!(
                        "partition {i}: exactly one of end_time or positive duration required"
                    ));
                }
            }
            if p.components.len() < 2 {
                return Err(format!("partition {i}: at least two components required"));
            }
            let mut all = BTreeSet::new();
            for c in &p.components {
                if c.is_empty() {
                    return Err(format!("partition {i}: empty component"));
                }
                for &l in c {
                    if l == 0 || l > self.universe {
                        return Err(format!("partition {i}: label {l} outside universe"));
                    }
                    if !all.insert(l) {
                        return Err(format!("partition {i}: label {l} in two components"));
                    }
                }
            }
            if all.len() != self.universe as usize {
                return Err(format!("partition {i}: components must cover the universe"));
            }
        }

        if self.checks.main_theorem && !matches!(self.finalize, FinalizeSpec::Timer { .. }) {
            return Err("main_theorem check requires timer-mode finalization".into());
        }
        if (self.checks.growth.is_some() || self.checks.quality.is_some()) && self.observers == 0 {
            return Err("growth/quality checks need at least one external observer".into());
        }
        if let Some(q) = &self.checks.quality {
            if q.eta == 0 || q.den == 0 || q.num > q.den || q.upto < q.eta || q.upto > self.rounds
            {
                return Err("quality check: need eta >= 1, num/den <= 1, eta <= upto <= rounds"
                    .into());
            }
        }
        if let Some(s) = &self.checks.stall {
            let Some(p) = self.partitions.get(s.partition) else {
                return Err(format!("stall check references partition {}", s.partition));
            };
            for &c in s.stalled.iter().chain(&s.live) {
                if c >= p.components.len() {
                    return Err(format!("stall check references component {c}"));
                }
            }
            if s.resume_rounds == 0 {
                return Err("stall check: resume_rounds must be positive".into());
            }
        }
        Ok(())
    }

    /// Key generation and genesis notarization for this scenario.
    pub fn bootstrap(&self) -> SystemSetup {
        let mut setup = bootstrap(
            self.preset.params(),
            self.universe,
            self.group_count,
            self.group_size,
            self.threshold(),
            self.block_time.0,
            self.finalize.mode(),
            self.master_seed.as_bytes(),
        );
        setup.config.beta = self.parsed_beta().expect("validated");
        setup.config.epoch_length = self.epoch_length;
        setup
    }
}
