use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, invalid_value, Error, Result};
use crate::histogram::Label;

/// How many coordinates one user can touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "SensitivityRepr", into = "SensitivityRepr")]
pub enum SensitivitySetting {
    #[default]
    Unrestricted,
    /// At most `Δ ≥ 1` counts change, each by at most one.
    Restricted(u64),
}

impl SensitivitySetting {
    pub fn restricted(delta: u64) -> Result<Self> {
        if delta == 0 {
            return Err(invalid_value!("restricted sensitivity must be at least 1"));
        }
        Ok(Self::Restricted(delta))
    }

    /// `min{Δ, k̄}`, or `k̄` when unrestricted.
    pub fn effective_min(&self, kbar: usize) -> u64 {
        match *self {
            Self::Unrestricted => kbar as u64,
            Self::Restricted(d) => d.min(kbar as u64),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SensitivityRepr {
    Delta(u64),
    Name(String),
}

impl TryFrom<SensitivityRepr> for SensitivitySetting {
    type Error = Error;

    fn try_from(r: SensitivityRepr) -> Result<Self> {
        match r {
            SensitivityRepr::Delta(d) => Self::restricted(d),
            SensitivityRepr::Name(s) => s.parse(),
        }
    }
}

impl From<SensitivitySetting> for SensitivityRepr {
    fn from(s: SensitivitySetting) -> Self {
        match s {
            SensitivitySetting::Unrestricted => Self::Name("unrestricted".to_string()),
            SensitivitySetting::Restricted(d) => Self::Delta(d),
        }
    }
}

impl FromStr for SensitivitySetting {
    type Err = Error;

    /// Accepts `unrestricted`, `restricted:<Δ>` or a bare `<Δ>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unrestricted") {
            return Ok(Self::Unrestricted);
        }
        let num = s.strip_prefix("restricted:").unwrap_or(s);
        let d: u64 = num
            .parse()
            .map_err(|_| invalid_value!("unknown sensitivity setting {s:?}"))?;
        Self::restricted(d)
    }
}

impl fmt::Display for SensitivitySetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unrestricted => f.write_str("unrestricted"),
            Self::Restricted(d) => write!(f, "restricted:{d}"),
        }
    }
}

/// Per-call privacy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub eps: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub sensitivity: SensitivitySetting,
}

impl PrivacyParams {
    pub fn new(eps: f64, delta: f64, delta_prime: f64, sensitivity: SensitivitySetting) -> Result<Self> {
        let p = Self { eps, delta, delta_prime, sensitivity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(invalid_value!("eps must be a positive finite number, got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid_value!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.delta_prime >= 0.0 && self.delta_prime < 1.0) {
            return Err(invalid_value!("delta_prime must lie in [0, 1), got {}", self.delta_prime));
        }
        if let SensitivitySetting::Restricted(0) = self.sensitivity {
            return Err(invalid_value!("restricted sensitivity must be at least 1"));
        }
        Ok(())
    }
}

/// Selection mechanism variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Gumbel noise over the true top-k̄ plus a noisy threshold.
    #[default]
    LimitedDomain,
    /// As `LimitedDomain`, restricted to counts strictly above `h_(k̄+1)`.
    Strict,
    /// Laplace noise; needs restricted sensitivity.
    Laplace,
    /// Picks k̄ privately in `[k, k̄]` (the request's `kbar` is the upper cutoff),
    /// then runs the limited-domain mechanism with `k - 1`.
    OptimalThreshold,
    /// Unordered set, no ⊥, deterministic threshold.
    FixedThreshold,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Self::LimitedDomain,
        Self::Strict,
        Self::Laplace,
        Self::OptimalThreshold,
        Self::FixedThreshold,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LimitedDomain => "limited-domain",
            Self::Strict => "strict",
            Self::Laplace => "laplace",
            Self::OptimalThreshold => "optimal-threshold",
            Self::FixedThreshold => "fixed-threshold",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid_value!("unknown mechanism {s:?}"))
    }
}

/// A top-k query: `1 ≤ k ≤ kbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKRequest {
    pub k: usize,
    pub kbar: usize,
    #[serde(default)]
    pub mechanism: Mechanism,
}

impl TopKRequest {
    pub fn new(k: usize, kbar: usize, mechanism: Mechanism) -> Result<Self> {
        let r = Self { k, kbar, mechanism };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid_value!("k must be at least 1"));
        }
        if self.kbar < self.k {
            return Err(invalid_value!("kbar ({}) must be at least k ({})", self.kbar, self.k));
        }
        if self.mechanism == Mechanism::OptimalThreshold && self.k < 2 {
            return Err(invalid_value!("optimal-threshold needs k >= 2 (it releases k - 1 indices)"));
        }
        Ok(())
    }
}

/// Ordered labels, optionally ended by ⊥.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TopKOutput {
    pub indices: Vec<Label>,
    pub terminated: bool,
}

impl TopKOutput {
    pub fn full(indices: Vec<Label>) -> Self {
        Self { indices, terminated: false }
    }

    pub fn bottom(indices: Vec<Label>) -> Self {
        Self { indices, terminated: true }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Realized output size: indices plus one for a ⊥.
    pub fn cost(&self) -> u64 {
        self.indices.len() as u64 + u64::from(self.terminated)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.indices.iter().any(|l| l == label)
    }
}

impl fmt::Display for TopKOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, l) in self.indices.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(l)?;
        }
        if self.terminated {
            if !self.indices.is_empty() {
                f.write_str(", ")?;
            }
            f.write_str("⊥")?;
        }
        f.write_str(")")
    }
}

/// Where padding labels come from when a histogram has fewer than k̄ labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Reserve {
    /// `__pad_0`, `__pad_1`, ...
    #[default]
    Generated,
    List(Vec<Label>),
}

/// Data-independent configuration for building limited domains.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DomainConfig {
    pub reserve: Reserve,
}

impl DomainConfig {
    pub fn with_reserve(labels: Vec<Label>) -> Self {
        Self { reserve: Reserve::List(labels) }
    }

    /// Takes `n` reserve labels in order, skipping any that `taken` reports as
    /// already present.
    pub(crate) fn padding(&self, n: usize, taken: impl Fn(&str) -> bool) -> Result<Vec<Label>> {
        let mut out = Vec::with_capacity(n);
        match &self.reserve {
            Reserve::Generated => {
                let mut i = 0usize;
                while out.len() < n {
                    let l = format!("__pad_{i}");
                    if !taken(&l) {
                        out.push(l);
                    }
                    i += 1;
                }
            }
            Reserve::List(list) => {
                out.extend(list.iter().filter(|l| !taken(l)).take(n).cloned());
                if out.len() < n {
                    return Err(Error::Config(format!(
                        "padding reserve exhausted: needed {n} labels, {} available",
                        out.len()
                    )));
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid!("eps must be a positive finite number, got {eps}"));
    }
    Ok(())
}
