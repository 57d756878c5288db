//! TOML file formats: market instances and experiment specifications.
//!
//! A market file lists the products and an optional continuation table:
//!
//! ```toml
//! n = 3
//! quality = [0.9, 0.2, 0.6]
//! appeal = [0.9, 0.1, 0.3]
//! visibility = [0.8, 0.5, 0.1]
//!
//! [continuation]
//! kind = "polynomial"   # or "none", or "explicit" with `values = [...]`
//! rho = 0.8
//! r = 0.7
//! ```
//!
//! `reduced = true` marks the output of `reduce` (qualities may exceed 1)
//! and `unsorted_visibility = true` admits visibilities that rise with
//! position.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trialoffer::instances::{gaussian_instance, GaussianSpec, VisibilityProfile};
use trialoffer::{ContinuationSpec, Market, MarketFlags, PolicyKind};

use crate::error::{CliError, Result};

fn is_false(b: &bool) -> bool {
    !*b
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// One-based line of the first assignment to `key`, for diagnostics.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn field_error(path: &Path, text: &str, field: &str, reason: impl std::fmt::Display) -> CliError {
    let at = line_of(text, field)
        .map(|l| format!("line {l}, "))
        .unwrap_or_default();
    CliError::parse(path, format!("{at}field `{field}`: {reason}"))
}

/// Continuation table of a market file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ContinuationFile {
    #[default]
    None,
    Polynomial { rho: f64, r: f64 },
    Explicit { values: Vec<f64> },
}

impl From<&ContinuationSpec> for ContinuationFile {
    fn from(c: &ContinuationSpec) -> Self {
        match c {
            ContinuationSpec::None => ContinuationFile::None,
            ContinuationSpec::Polynomial { rho, r } => ContinuationFile::Polynomial { rho: *rho, r: *r },
            ContinuationSpec::Explicit(v) => ContinuationFile::Explicit { values: v.clone() },
        }
    }
}

impl From<&ContinuationFile> for ContinuationSpec {
    fn from(c: &ContinuationFile) -> Self {
        match c {
            ContinuationFile::None => ContinuationSpec::None,
            ContinuationFile::Polynomial { rho, r } => ContinuationSpec::Polynomial { rho: *rho, r: *r },
            ContinuationFile::Explicit { values } => ContinuationSpec::Explicit(values.clone()),
        }
    }
}

/// On-disk form of a [`Market`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub n: usize,
    pub quality: Vec<f64>,
    pub appeal: Vec<f64>,
    pub visibility: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub reduced: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub unsorted_visibility: bool,
    #[serde(default)]
    pub continuation: ContinuationFile,
}

impl MarketFile {
    pub fn from_market(m: &Market) -> Self {
        let flags = m.flags();
        MarketFile {
            n: m.n(),
            quality: m.quality().to_vec(),
            appeal: m.appeal().to_vec(),
            visibility: m.visibility().to_vec(),
            reduced: flags.reduced,
            unsorted_visibility: flags.unsorted_visibility,
            continuation: m.continuation().into(),
        }
    }

    /// Parses TOML text; `path` only labels diagnostics.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::parse(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("market file serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_toml())
    }

    /// Validates the file against the market invariants.
    pub fn to_market(&self) -> std::result::Result<Market, (String, String)> {
        for (field, len) in [
            ("quality", self.quality.len()),
            ("appeal", self.appeal.len()),
            ("visibility", self.visibility.len()),
        ] {
            if len != self.n {
                return Err((field.into(), format!("has {len} entries but n = {}", self.n)));
            }
        }
        let flags = MarketFlags {
            reduced: self.reduced,
            unsorted_visibility: self.unsorted_visibility,
        };
        Market::with_flags(
            self.quality.clone(),
            self.appeal.clone(),
            self.visibility.clone(),
            (&self.continuation).into(),
            flags,
        )
        .map_err(|e| {
            let msg = e.to_string();
            let field = ["quality", "appeal", "visibility", "continuation"]
                .into_iter()
                .find(|f| msg.contains(f))
                .unwrap_or("n");
            (field.to_string(), msg)
        })
    }
}

/// Reads and validates a market file.
pub fn load_market(path: &Path) -> Result<Market> {
    let text = read_text(path)?;
    let file = MarketFile::parse(&text, path)?;
    file.to_market()
        .map_err(|(field, reason)| field_error(path, &text, &field, reason))
}

pub fn save_market(m: &Market, path: &Path) -> Result<()> {
    MarketFile::from_market(m).save(path)
}

fn default_mean() -> f64 {
    0.5
}
fn default_sd() -> f64 {
    0.2
}
fn default_quality_range() -> [f64; 2] {
    [0.01, 1.0]
}
fn default_appeal_range() -> [f64; 2] {
    [0.01, 10.0]
}

/// Where product qualities and appeals come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSource {
    Explicit {
        quality: Vec<f64>,
        appeal: Vec<f64>,
    },
    /// Gaussian draws min-max normalized into the given ranges.
    Gaussian {
        n: usize,
        seed: u64,
        #[serde(default = "default_mean")]
        mean_quality: f64,
        #[serde(default = "default_sd")]
        sd_quality: f64,
        #[serde(default = "default_mean")]
        mean_appeal: f64,
        #[serde(default = "default_sd")]
        sd_appeal: f64,
        #[serde(default = "default_quality_range")]
        quality_range: [f64; 2],
        #[serde(default = "default_appeal_range")]
        appeal_range: [f64; 2],
    },
}

/// A named profile such as `"harmonic"` or `"power:0.5"`, or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VisibilitySource {
    Profile(String),
    Values(Vec<f64>),
}

impl Default for VisibilitySource {
    fn default() -> Self {
        VisibilitySource::Profile("harmonic".into())
    }
}

/// One continuation setting of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub rho: f64,
    pub r: f64,
}

fn default_policies() -> Vec<String> {
    PolicyKind::ALL.iter().map(|p| p.name().to_string()).collect()
}
fn default_steps() -> u64 {
    20_000
}
fn default_rerank_period() -> u64 {
    trialoffer::sim::DEFAULT_RERANK_PERIOD
}
fn default_replications() -> u32 {
    100
}
fn default_max_tries() -> u32 {
    trialoffer::sim::DEFAULT_MAX_SESSION_TRIES
}
fn default_true() -> bool {
    true
}

/// A simulation experiment: one instance, a continuation sweep and a set
/// of policies. Every policy also runs once without continuation, which
/// is the baseline of the improvement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_rerank_period")]
    pub rerank_period: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_max_tries")]
    pub max_session_tries: u32,
    #[serde(default = "default_true")]
    pub social_influence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub visibility: VisibilitySource,
    pub instance: InstanceSource,
    pub sweep: Vec<SweepCell>,
}

impl ExperimentSpec {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| CliError::parse(path, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes")
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        let mut kinds = Vec::with_capacity(self.policies.len());
        for name in &self.policies {
            let k: PolicyKind = name
                .parse()
                .map_err(|_| CliError::config("policies", format!("unknown policy `{name}`")))?;
            if kinds.contains(&k) {
                return Err(CliError::config("policies", format!("`{name}` listed twice")));
            }
            kinds.push(k);
        }
        Ok(kinds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(CliError::config("policies", "must not be empty"));
        }
        self.policy_kinds()?;
        if self.sweep.is_empty() {
            return Err(CliError::config("sweep", "must not be empty"));
        }
        for (k, c) in self.sweep.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.rho) {
                return Err(CliError::config(format!("sweep[{k}].rho"), "must lie in [0, 1]"));
            }
            if !(c.r >= 0.0 && c.r.is_finite()) {
                return Err(CliError::config(format!("sweep[{k}].r"), "must be finite and >= 0"));
            }
            if self.sweep[..k].contains(c) {
                return Err(CliError::config(format!("sweep[{k}]"), "duplicate cell"));
            }
        }
        let positive = [
            ("steps", self.steps),
            ("rerank_period", self.rerank_period),
            ("replications", self.replications as u64),
            ("max_session_tries", self.max_session_tries as u64),
            ("trajectory_interval", self.trajectory_interval.unwrap_or(1)),
        ];
        if let Some((field, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::config(*field, "must be at least 1"));
        }
        self.build_market()?;
        Ok(())
    }

    fn n(&self) -> usize {
        match &self.instance {
            InstanceSource::Explicit { quality, .. } => quality.len(),
            InstanceSource::Gaussian { n, .. } => *n,
        }
    }

    pub fn visibility_vector(&self) -> Result<Vec<f64>> {
        match &self.visibility {
            VisibilitySource::Values(v) => Ok(v.clone()),
            VisibilitySource::Profile(name) => {
                let profile: VisibilityProfile = name
                    .parse()
                    .map_err(|_| CliError::config("visibility", format!("unknown profile `{name}`")))?;
                Ok(profile.build(self.n()))
            }
        }
    }

    /// The instance without continuation.
    pub fn build_market(&self) -> Result<Market> {
        let (quality, appeal) = match &self.instance {
            InstanceSource::Explicit { quality, appeal } => (quality.clone(), appeal.clone()),
            InstanceSource::Gaussian {
                n,
                seed,
                mean_quality,
                sd_quality,
                mean_appeal,
                sd_appeal,
                quality_range,
                appeal_range,
            } => {
                let g = GaussianSpec {
                    mean_quality: *mean_quality,
                    sd_quality: *sd_quality,
                    mean_appeal: *mean_appeal,
                    sd_appeal: *sd_appeal,
                    quality_range: (quality_range[0], quality_range[1]),
                    appeal_range: (appeal_range[0], appeal_range[1]),
                };
                gaussian_instance(*n, &g, *seed).map_err(|e| match e {
                    trialoffer::Error::Config { field, reason } => {
                        CliError::config(format!("instance.{field}"), reason)
                    }
                    other => other.into(),
                })?
            }
        };
        let visibility = self.visibility_vector()?;
        Market::new(quality, appeal, visibility, ContinuationSpec::None).map_err(|e| {
            let msg = e.to_string();
            let field = if msg.contains("visibilit") { "visibility" } else { "instance" };
            CliError::config(field, msg)
        })
    }
}
