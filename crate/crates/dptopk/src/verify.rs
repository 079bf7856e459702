//! Oracle suites behind `dptopk verify`.
//!
//! `dp`: exact hockey-stick divergence over enumerated neighbor families.
//! `bad-event`: exact mass on labels outside the neighbor's domain.
//! `equivalence`: sampled Gumbel top-k against the exact peeling law.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use dptopk_core::noise::SeededRng;
use dptopk_core::oracle::{
    bad_event_family, enumerate_neighbors, exact_mechanism_distribution, monte_carlo_distribution,
    total_variation, verify_family, FamilySummary, OracleConfig,
};
use dptopk_core::{DomainConfig, Label, Mechanism, PrivacyParams, Result, SensitivitySetting, TopKRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Dp,
    BadEvent,
    Equivalence,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Self::Dp, Self::BadEvent, Self::Equivalence];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Dp => "dp",
            Self::BadEvent => "bad-event",
            Self::Equivalence => "equivalence",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown suite {s:?} (expected dp, bad-event, equivalence or all)"))
    }
}

/// Parses `all` or a comma list of suite names. Empty is an error.
pub fn parse_selector(sel: &str) -> std::result::Result<Vec<Suite>, String> {
    let names: Vec<&str> = sel.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err("empty suite selector".into());
    }
    if names == ["all"] {
        return Ok(Suite::ALL.to_vec());
    }
    let mut out = names.into_iter().map(Suite::from_str).collect::<std::result::Result<Vec<_>, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Largest neighbor family a check may enumerate.
    pub max_pairs: usize,
    /// Draws for the equivalence suite.
    pub samples: u64,
    pub seed: u64,
    /// Multiplies the threshold's additive term; 1 is the real mechanism.
    pub additive_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { max_pairs: 5000, samples: 200_000, seed: 20_240_601, additive_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    OverBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub name: &'static str,
    pub status: Status,
    pub pairs: usize,
    pub failures: usize,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySummary {
    pub pass: bool,
    pub suites: Vec<Suite>,
    pub additive_scale: f64,
    pub checks: Vec<CheckReport>,
}

struct Family {
    labels: usize,
    max_count: u64,
    restricted: Option<u64>,
}

struct CheckDef {
    suite: Suite,
    name: &'static str,
    family: Family,
    mechanism: Mechanism,
    k: usize,
    kbar: usize,
    eps: f64,
    delta: f64,
    delta_prime: f64,
    eps_target: f64,
    delta_target: f64,
}

fn sensitivity(f: &Family) -> SensitivitySetting {
    f.restricted.map_or(SensitivitySetting::Unrestricted, SensitivitySetting::Restricted)
}

fn check_defs(suites: &[Suite]) -> Vec<CheckDef> {
    let fam = |labels, max_count, restricted| Family { labels, max_count, restricted };
    let mut out = Vec::new();
    for &suite in suites {
        let mut add = |name, family, mechanism, k, kbar, eps, delta, eps_target, delta_target| {
            out.push(CheckDef {
                suite, name, family, mechanism, k, kbar, eps, delta, delta_prime: 0.0, eps_target, delta_target,
            })
        };
        match suite {
            Suite::Dp => {
                add("limited-domain", fam(3, 3, None), Mechanism::LimitedDomain, 2, 2, 0.3, 0.2, 0.6, 0.2);
                add("limited-domain-wide", fam(4, 2, None), Mechanism::LimitedDomain, 2, 3, 0.5, 0.1, 1.0, 0.1);
                add("restricted", fam(4, 2, Some(1)), Mechanism::LimitedDomain, 2, 3, 0.5, 0.1, 1.0, 0.1);
                add("strict", fam(3, 3, None), Mechanism::Strict, 2, 2, 0.3, 0.2, 0.6, 0.2);
                add("optimal-threshold", fam(3, 3, None), Mechanism::OptimalThreshold, 2, 3, 0.3, 0.2, 0.9, 0.2);
                add("fixed-threshold", fam(3, 5, None), Mechanism::FixedThreshold, 2, 2, 1.0, 0.1, 2.0, 0.2);
            }
            Suite::BadEvent => {
                add("limited-domain", fam(3, 3, None), Mechanism::LimitedDomain, 2, 2, 0.3, 0.2, 0.0, 0.2);
                add("limited-domain-wide", fam(4, 2, None), Mechanism::LimitedDomain, 2, 3, 0.5, 0.1, 0.0, 0.1);
                add("restricted", fam(4, 2, Some(1)), Mechanism::LimitedDomain, 2, 3, 0.5, 0.1, 0.0, 0.1);
                add("strict", fam(3, 3, None), Mechanism::Strict, 2, 2, 0.3, 0.2, 0.0, 0.2);
            }
            Suite::Equivalence => {
                add("gumbel-vs-peeling", fam(0, 0, None), Mechanism::LimitedDomain, 3, 4, 1.0, 0.1, 0.0, 0.02);
            }
        }
    }
    out
}

fn universe(n: usize) -> Vec<Label> {
    (0..n).map(|i| char::from(b'a' + i as u8).to_string()).collect()
}

fn report(def: &CheckDef, s: &FamilySummary) -> CheckReport {
    CheckReport {
        suite: def.suite,
        name: def.name,
        status: if s.pass() { Status::Pass } else { Status::Fail },
        pairs: s.pairs,
        failures: s.failures,
        measured: s.max_measured,
        bound: s.bound,
    }
}

fn run_check(def: &CheckDef, opts: &VerifyOptions) -> Result<CheckReport> {
    let req = TopKRequest::new(def.k, def.kbar, def.mechanism)?;
    let params = PrivacyParams::new(def.eps, def.delta, def.delta_prime, sensitivity(&def.family))?;
    if def.suite == Suite::Equivalence {
        // {a:4, b:3, c:1} with d (count 0) filling the fourth domain slot
        let h = [("a", 4u64), ("b", 3), ("c", 1)].into_iter().collect();
        let cfg = OracleConfig::new(req, params)
            .with_domain(DomainConfig::with_reserve(vec!["d".into()]))
            .with_additive_scale(opts.additive_scale);
        let exact = exact_mechanism_distribution(&h, &cfg)?;
        let emp = monte_carlo_distribution(&h, &cfg, opts.samples, &SeededRng::new(opts.seed))?;
        let tv = total_variation(&emp, &exact);
        let pass = tv < def.delta_target;
        return Ok(CheckReport {
            suite: def.suite,
            name: def.name,
            status: if pass { Status::Pass } else { Status::Fail },
            pairs: 0,
            failures: usize::from(!pass),
            measured: tv,
            bound: def.delta_target,
        });
    }
    let f = &def.family;
    let pairs = enumerate_neighbors(&universe(f.labels), f.max_count, f.restricted)?;
    if pairs.len() > opts.max_pairs {
        return Ok(CheckReport {
            suite: def.suite,
            name: def.name,
            status: Status::OverBudget,
            pairs: pairs.len(),
            failures: 0,
            measured: 0.0,
            bound: def.delta_target,
        });
    }
    let cfg = OracleConfig::new(req, params).with_additive_scale(opts.additive_scale);
    let s = match def.suite {
        Suite::Dp => verify_family(&pairs, &cfg, def.eps_target, def.delta_target)?,
        _ => bad_event_family(&pairs, &cfg, def.delta_target)?,
    };
    Ok(report(def, &s))
}

pub fn run_suites(suites: &[Suite], opts: &VerifyOptions) -> Result<VerifySummary> {
    let checks = check_defs(suites)
        .par_iter()
        .map(|s| run_check(s, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifySummary {
        pass: checks.iter().all(|c| c.status == Status::Pass),
        suites: suites.to_vec(),
        additive_scale: opts.additive_scale,
        checks,
    })
}
