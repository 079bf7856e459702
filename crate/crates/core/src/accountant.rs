//! Privacy-loss arithmetic and the pay-what-you-get budget session.
//!
//! Composition bounds take `δ′ = 0` to mean `ln(1/δ′) = +∞`: every branch but
//! the basic sum drops out.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::histogram::{Histogram, Label};
use crate::math;
use crate::mechanisms::{run_mechanism, MechanismRun};
use crate::noise::SeededRng;
use crate::types::{check_eps, DomainConfig, Mechanism, PrivacyParams, SensitivitySetting, TopKOutput, TopKRequest};

/// Largest composition length the optimal-composition search accepts.
pub const MAX_OPTIMAL_K: u64 = 10_000;

/// Which term of a `min{...}` bound was smallest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Basic,
    Advanced,
    BoundedRange,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionBound {
    pub eps_total: f64,
    pub delta_total: f64,
    pub branch: Branch,
}

fn log_inv(delta: f64) -> f64 {
    if delta <= 0.0 {
        f64::INFINITY
    } else {
        -math::ln(delta)
    }
}

fn tanh_half(eps: f64) -> f64 {
    // (e^ε - 1)/(e^ε + 1), computed without cancellation at small ε
    let m = math::expm1(eps);
    m / (m + 2.0)
}

fn pick_min(candidates: [(f64, Branch); 3]) -> (f64, Branch) {
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.0 < best.0 {
            best = *c;
        }
    }
    best
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(invalid!("composition needs at least one mechanism"));
    }
    eps_list.iter().try_for_each(|&e| check_eps(e))
}

/// Per-call loss bound of `k` composed ε-range-bounded selections, with the
/// branch that achieved it.
pub fn eps_prime_with_branch(k: u64, eps: f64, delta_prime: f64) -> Result<(f64, Branch)> {
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    check_eps(eps)?;
    if delta_prime < 0.0 {
        return Err(invalid!("delta_prime must be non-negative"));
    }
    let kf = k as f64;
    let l = log_inv(delta_prime);
    let basic = kf * eps;
    if l.is_infinite() {
        return Ok((basic, Branch::Basic));
    }
    let advanced = kf * eps * tanh_half(eps) + eps * math::sqrt(2.0 * kf * l);
    let bounded = kf * eps * eps / 2.0 + eps * math::sqrt(kf / 2.0 * l);
    Ok(pick_min([
        (basic, Branch::Basic),
        (advanced, Branch::Advanced),
        (bounded, Branch::BoundedRange),
    ]))
}

/// `min{kε, kε·tanh(ε/2) + ε√(2k ln(1/δ′)), kε²/2 + ε√(k/2·ln(1/δ′))}`.
pub fn eps_prime(k: u64, eps: f64, delta_prime: f64) -> Result<f64> {
    eps_prime_with_branch(k, eps, delta_prime).map(|(e, _)| e)
}

/// Advanced composition for general (ε_i, δ_i)-DP mechanisms:
/// `Σεᵢ(e^{εᵢ}−1)/(e^{εᵢ}+1) + √(2Σεᵢ² ln(1/δ′))`, or `Σεᵢ` when `δ′ = 0`.
pub fn advanced_composition(eps_list: &[f64], delta_list: &[f64], delta_prime: f64) -> Result<CompositionBound> {
    check_eps_list(eps_list)?;
    if delta_prime < 0.0 || delta_list.iter().any(|&d| d < 0.0) {
        return Err(invalid!("deltas must be non-negative"));
    }
    let sum: f64 = eps_list.iter().sum();
    let delta_total = (delta_list.iter().sum::<f64>() + delta_prime).min(1.0);
    let l = log_inv(delta_prime);
    if l.is_infinite() {
        return Ok(CompositionBound { eps_total: sum, delta_total, branch: Branch::Basic });
    }
    let sq: f64 = eps_list.iter().map(|e| e * e).sum();
    let adv = eps_list.iter().map(|&e| e * tanh_half(e)).sum::<f64>() + math::sqrt(2.0 * sq * l);
    Ok(CompositionBound { eps_total: adv, delta_total, branch: Branch::Advanced })
}

/// [`advanced_composition`] capped at basic composition `Σεᵢ`.
pub fn advanced_composition_capped(
    eps_list: &[f64],
    delta_list: &[f64],
    delta_prime: f64,
) -> Result<CompositionBound> {
    let b = advanced_composition(eps_list, delta_list, delta_prime)?;
    let sum: f64 = eps_list.iter().sum();
    if sum <= b.eps_total {
        return Ok(CompositionBound { eps_total: sum, branch: Branch::Basic, ..b });
    }
    Ok(b)
}

/// Composition of ε_i-range-bounded mechanisms at total failure probability δ.
pub fn bounded_range_composition(eps_list: &[f64], delta: f64) -> Result<CompositionBound> {
    check_eps_list(eps_list)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid!("delta must lie in [0, 1]"));
    }
    let sum: f64 = eps_list.iter().sum();
    let l = log_inv(delta);
    if l.is_infinite() {
        return Ok(CompositionBound { eps_total: sum, delta_total: delta, branch: Branch::Basic });
    }
    let sq: f64 = eps_list.iter().map(|e| e * e).sum();
    let adv = eps_list.iter().map(|&e| e * tanh_half(e)).sum::<f64>() + math::sqrt(2.0 * sq * l);
    let br = sq / 2.0 + math::sqrt(0.5 * sq * l);
    let (eps_total, branch) = pick_min([
        (sum, Branch::Basic),
        (adv, Branch::Advanced),
        (br, Branch::BoundedRange),
    ]);
    Ok(CompositionBound { eps_total, delta_total: delta, branch })
}

/// `δ_i` of homogeneous optimal composition, summed in log space.
///
/// Each summand `C(k,ℓ)(e^{(k-ℓ)ε} - e^{(k-2i+ℓ)ε})` is positive for `ℓ < i`
/// and is formed as `e^{(k-ℓ)ε}·(-expm1(-2(i-ℓ)ε))` to avoid cancellation.
pub fn optimal_composition_delta(k: u64, eps: f64, i: u64) -> Result<f64> {
    check_eps(eps)?;
    if k == 0 || k > MAX_OPTIMAL_K {
        return Err(invalid!("k must lie in [1, {MAX_OPTIMAL_K}]"));
    }
    if i > k / 2 {
        return Err(invalid!("i must be at most floor(k/2)"));
    }
    if i == 0 {
        return Ok(0.0);
    }
    let log_norm = k as f64 * (eps.max(0.0) + math::ln_1p(math::exp(-eps)));
    let terms: Vec<f64> = (0..i)
        .map(|l| {
            math::ln_binomial(k, l)
                + (k - l) as f64 * eps
                + math::ln(-math::expm1(-2.0 * (i - l) as f64 * eps))
        })
        .collect();
    let log_delta = math::log_sum_exp(terms.iter().copied()) - log_norm;
    Ok(math::exp(log_delta).min(1.0))
}

/// Smallest `(k - 2i)ε` whose `δ_i ≤ delta_cap`, paired with that `δ_i`.
pub fn optimal_dp_composition(k: u64, eps: f64, delta_cap: f64) -> Result<CompositionBound> {
    if !(0.0..1.0).contains(&delta_cap) {
        return Err(invalid!("delta_cap must lie in [0, 1)"));
    }
    check_eps(eps)?;
    if k == 0 || k > MAX_OPTIMAL_K {
        return Err(invalid!("k must lie in [1, {MAX_OPTIMAL_K}]"));
    }
    let mut best = CompositionBound { eps_total: k as f64 * eps, delta_total: 0.0, branch: Branch::Optimal };
    // δ_i increases with i, so scan upward until the cap is crossed.
    for i in 1..=k / 2 {
        let d = optimal_composition_delta(k, eps, i)?;
        if d > delta_cap {
            break;
        }
        best = CompositionBound { eps_total: (k - 2 * i) as f64 * eps, delta_total: d, branch: Branch::Optimal };
    }
    Ok(best)
}

/// Guarantee of a single call of `req` under `params`.
///
/// Ranked Gumbel variants: `(ε′(k, ε, δ′), δ + δ′)`; optimal-threshold counts the
/// private k̄ pick as one more ε-range-bounded selection. Laplace:
/// `(Δε, (e^{Δε}+1)δ̄)`. Fixed-threshold: basic composition of `k` calls of
/// `(ε, δ)` randomized response.
pub fn request_privacy(req: &TopKRequest, params: &PrivacyParams) -> Result<CompositionBound> {
    req.validate()?;
    params.validate()?;
    let k = req.k as u64;
    let ranked = |calls: u64| -> Result<CompositionBound> {
        let (eps_total, branch) = eps_prime_with_branch(calls, params.eps, params.delta_prime)?;
        Ok(CompositionBound { eps_total, delta_total: params.delta + params.delta_prime, branch })
    };
    match req.mechanism {
        Mechanism::LimitedDomain | Mechanism::Strict | Mechanism::OptimalThreshold => ranked(k),
        Mechanism::Laplace => {
            let (eps_total, delta_total) = crate::mechanisms::laplace_privacy(params)?;
            Ok(CompositionBound { eps_total, delta_total, branch: Branch::Basic })
        }
        Mechanism::FixedThreshold => Ok(CompositionBound {
            eps_total: k as f64 * params.eps,
            delta_total: (k as f64 * params.delta).min(1.0),
            branch: Branch::Basic,
        }),
    }
}

/// One accepted query in the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub k: usize,
    pub kbar: usize,
    pub mechanism: Mechanism,
    pub indices: Vec<Label>,
    pub terminated: bool,
    pub cost: u64,
}

impl LogEntry {
    pub fn output(&self) -> TopKOutput {
        TopKOutput { indices: self.indices.clone(), terminated: self.terminated }
    }
}

/// Pay-what-you-get budget state. Serializes to the session file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSession {
    pub session_id: u64,
    pub eps: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub kmax_initial: u64,
    pub kmax_remaining: u64,
    pub ellmax_initial: u64,
    pub ellmax_remaining: u64,
    pub log: Vec<LogEntry>,
    #[serde(default)]
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    KExceedsBudget,
    NoQueriesLeft,
}

impl RejectReason {
    pub fn message(&self) -> &'static str {
        match self {
            Self::KExceedsBudget => "requested k exceeds the remaining kmax",
            Self::NoQueriesLeft => "no queries left (ellmax exhausted)",
        }
    }
}

/// Outcome of `BudgetSession::query`.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryOutcome {
    Accepted(MechanismRun),
    Rejected(RejectReason),
}

/// A-priori privacy statement plus spend so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: u64,
    pub privacy: CompositionBound,
    pub spent: u64,
    pub queries: u64,
    pub kmax_initial: u64,
    pub kmax_remaining: u64,
    pub ellmax_initial: u64,
    pub ellmax_remaining: u64,
    pub closed: bool,
}

impl BudgetSession {
    pub fn create(session_id: u64, kmax: u64, ellmax: u64, eps: f64, delta: f64, delta_prime: f64) -> Result<Self> {
        if kmax == 0 {
            return Err(Error::Validation("kmax must be at least 1".into()));
        }
        if ellmax == 0 {
            return Err(Error::Validation("ellmax must be at least 1".into()));
        }
        PrivacyParams::new(eps, delta, delta_prime, SensitivitySetting::Unrestricted)?;
        Ok(Self {
            session_id,
            eps,
            delta,
            delta_prime,
            kmax_initial: kmax,
            kmax_remaining: kmax,
            ellmax_initial: ellmax,
            ellmax_remaining: ellmax,
            log: Vec::new(),
            closed: false,
        })
    }

    pub fn params(&self, sensitivity: SensitivitySetting) -> Result<PrivacyParams> {
        PrivacyParams::new(self.eps, self.delta, self.delta_prime, sensitivity)
    }

    /// Checks budget for `req` without changing anything.
    pub fn admit(&self, req: &TopKRequest) -> Result<Option<RejectReason>> {
        if self.closed {
            return Err(Error::SessionClosed);
        }
        req.validate()?;
        if self.ellmax_remaining == 0 {
            return Ok(Some(RejectReason::NoQueriesLeft));
        }
        if req.k as u64 > self.kmax_remaining {
            return Ok(Some(RejectReason::KExceedsBudget));
        }
        Ok(None)
    }

    /// Charges an already computed run. The caller must have admitted `req`.
    pub fn record(&mut self, req: &TopKRequest, run: &MechanismRun) -> Result<()> {
        if let Some(reason) = self.admit(req)? {
            return Err(invalid!("cannot record a rejected query: {}", reason.message()));
        }
        if run.cost > self.kmax_remaining {
            return Err(invalid!("run cost {} exceeds remaining kmax {}", run.cost, self.kmax_remaining));
        }
        self.kmax_remaining -= run.cost;
        self.ellmax_remaining -= 1;
        self.log.push(LogEntry {
            k: req.k,
            kbar: run.kbar,
            mechanism: req.mechanism,
            indices: run.output.indices.clone(),
            terminated: run.output.terminated,
            cost: run.cost,
        });
        Ok(())
    }

    /// Runs `req` against `h` if the budget allows, charging the realized cost.
    /// Rejected queries change nothing.
    pub fn query(
        &mut self,
        h: &Histogram,
        req: &TopKRequest,
        sensitivity: SensitivitySetting,
        cfg: &DomainConfig,
        rng: &mut SeededRng,
    ) -> Result<QueryOutcome> {
        if let Some(reason) = self.admit(req)? {
            return Ok(QueryOutcome::Rejected(reason));
        }
        let params = self.params(sensitivity)?;
        let run = run_mechanism(h, req, &params, cfg, rng)?;
        self.record(req, &run)?;
        Ok(QueryOutcome::Accepted(run))
    }

    pub fn spent(&self) -> u64 {
        self.log.iter().map(|e| e.cost).sum()
    }

    /// `(ε′(kmax_initial, ε, δ′), 2·ℓmax_initial·δ + δ′)`.
    pub fn privacy(&self) -> Result<CompositionBound> {
        let (eps_total, branch) = eps_prime_with_branch(self.kmax_initial, self.eps, self.delta_prime)?;
        let delta_total = (2.0 * self.ellmax_initial as f64 * self.delta + self.delta_prime).min(1.0);
        Ok(CompositionBound { eps_total, delta_total, branch })
    }

    pub fn report(&self) -> Result<SessionReport> {
        Ok(SessionReport {
            session_id: self.session_id,
            privacy: self.privacy()?,
            spent: self.spent(),
            queries: self.log.len() as u64,
            kmax_initial: self.kmax_initial,
            kmax_remaining: self.kmax_remaining,
            ellmax_initial: self.ellmax_initial,
            ellmax_remaining: self.ellmax_remaining,
            closed: self.closed,
        })
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Checks the bookkeeping invariants of a (possibly deserialized) session.
    pub fn check_consistency(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        if self.kmax_remaining > self.kmax_initial {
            problems.push("kmax_remaining exceeds kmax_initial".into());
        }
        if self.ellmax_remaining > self.ellmax_initial {
            problems.push("ellmax_remaining exceeds ellmax_initial".into());
        }
        if self.kmax_initial.checked_sub(self.kmax_remaining) != Some(self.spent()) {
            problems.push("spent cost does not match kmax decrease".into());
        }
        if self.ellmax_initial.checked_sub(self.ellmax_remaining) != Some(self.log.len() as u64) {
            problems.push("query count does not match ellmax decrease".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }
}
