//! Exact output distributions for small instances, and the checks built on
//! them: hockey-stick DP verification over enumerated neighbors, bad-event
//! mass, good-event factorization, and Monte-Carlo comparison.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::histogram::{Histogram, Label, SortedView};
use crate::math;
use crate::mechanisms::{additive_term, run_mechanism, threshold_scores, ThresholdVariant};
use crate::noise::{laplace_cdf, NoiseScale, SeededRng};
use crate::types::{DomainConfig, Mechanism, PrivacyParams, SensitivitySetting, TopKOutput, TopKRequest};

/// Most outcome sequences an exact enumeration may produce.
pub const MAX_OUTCOMES: u64 = 1_000_000;

/// Samples per Monte-Carlo chunk; chunk `c` draws from `rng.split(c)`.
pub const MC_CHUNK: u64 = 8192;

/// A released value: the label sequence, plus the selected k̄ when the
/// mechanism releases one (optimal-threshold).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kbar: Option<usize>,
    #[serde(flatten)]
    pub output: TopKOutput,
}

impl From<TopKOutput> for Outcome {
    fn from(output: TopKOutput) -> Self {
        Self { kbar: None, output }
    }
}

/// Outcome → probability.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactDistribution {
    probs: BTreeMap<Outcome, f64>,
}

impl ExactDistribution {
    pub fn point(o: impl Into<Outcome>) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(o.into(), 1.0);
        Self { probs }
    }

    /// Empirical distribution from outcome counts over `n` draws.
    pub fn from_counts(counts: &BTreeMap<Outcome, u64>, n: u64) -> Self {
        let probs = counts.iter().map(|(o, &c)| (o.clone(), c as f64 / n as f64)).collect();
        Self { probs }
    }

    pub fn prob(&self, o: &Outcome) -> f64 {
        self.probs.get(o).copied().unwrap_or(0.0)
    }

    pub fn prob_of(&self, out: &TopKOutput) -> f64 {
        self.prob(&Outcome::from(out.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Outcome, f64)> + '_ {
        self.probs.iter().map(|(o, &p)| (o, p))
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Mass of the outcomes satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&Outcome) -> bool) -> f64 {
        self.probs.iter().filter(|(o, _)| pred(o)).map(|(_, p)| p).sum()
    }

    fn add(&mut self, o: Outcome, p: f64) {
        *self.probs.entry(o).or_insert(0.0) += p;
    }
}

fn count_sequences(n: usize, k: usize) -> u64 {
    // Σ_{j=0}^{min(k,n)} n!/(n-j)!
    let mut total: u64 = 1;
    let mut term: u64 = 1;
    for j in 0..k.min(n) {
        term = term.saturating_mul((n - j) as u64);
        total = total.saturating_add(term);
    }
    total
}

/// Exact law of the peeling mechanism over `domain ∪ {⊥}`: each step draws
/// from the softmax of `ε·h` over the remaining labels and ⊥, stopping at ⊥
/// or after `k` labels.
pub fn exact_peeling_distribution(
    h: &Histogram,
    domain: &[Label],
    k: usize,
    h_bot: f64,
    eps: f64,
) -> Result<ExactDistribution> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid!("eps must be positive and finite, got {eps}"));
    }
    if !h_bot.is_finite() {
        return Err(invalid!("h_bot must be finite"));
    }
    let n = count_sequences(domain.len(), k);
    if n > MAX_OUTCOMES {
        return Err(Error::ResourceLimit(format!(
            "{n} outcome sequences exceed the guard of {MAX_OUTCOMES}"
        )));
    }
    // Shift every count by the largest one before scaling; integer
    // differences are exact, so large counts lose no precision.
    let top = domain.iter().map(|l| h.count(l)).max().unwrap_or(0) as f64;
    let logw: Vec<f64> = domain.iter().map(|l| eps * (h.count(l) as f64 - top)).collect();
    let mut dist = ExactDistribution::default();
    let mut used = alloc::vec![false; domain.len()];
    let mut path = Vec::with_capacity(k);
    peel_rec(domain, &logw, eps * (h_bot - top), k, &mut used, &mut path, 0.0, &mut dist);
    Ok(dist)
}

#[allow(clippy::too_many_arguments)]
fn peel_rec(
    domain: &[Label],
    logw: &[f64],
    log_bot: f64,
    k: usize,
    used: &mut [bool],
    path: &mut Vec<usize>,
    logp: f64,
    dist: &mut ExactDistribution,
) {
    let labels = |path: &[usize]| path.iter().map(|&i| domain[i].clone()).collect::<Vec<_>>();
    if path.len() == k {
        dist.add(TopKOutput::full(labels(path)).into(), math::exp(logp));
        return;
    }
    let rest = logw.iter().zip(used.iter()).filter(|(_, u)| !**u).map(|(w, _)| *w);
    let log_den = math::log_sum_exp(rest.chain(core::iter::once(log_bot)));
    dist.add(TopKOutput::bottom(labels(path)).into(), math::exp(logp + log_bot - log_den));
    for i in 0..domain.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        path.push(i);
        peel_rec(domain, logw, log_bot, k, used, path, logp + logw[i] - log_den, dist);
        path.pop();
        used[i] = false;
    }
}

/// `Σ_o max(0, p(o) − e^ε q(o))`: the smallest δ with `P(S) ≤ e^ε Q(S) + δ`
/// for every outcome set `S`.
pub fn hockey_stick_divergence(p: &ExactDistribution, q: &ExactDistribution, eps: f64) -> f64 {
    let e = math::exp(eps);
    p.iter().map(|(o, pp)| (pp - e * q.prob(o)).max(0.0)).sum()
}

/// `½ Σ_o |p(o) − q(o)|`.
pub fn total_variation(p: &ExactDistribution, q: &ExactDistribution) -> f64 {
    let keys: BTreeSet<&Outcome> = p.probs.keys().chain(q.probs.keys()).collect();
    0.5 * keys.into_iter().map(|o| math::abs(p.prob(o) - q.prob(o))).sum::<f64>()
}

/// How a mechanism is configured for exact evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub request: TopKRequest,
    pub params: PrivacyParams,
    pub domain: DomainConfig,
    /// Multiplier on the threshold's additive term. 1 is the real mechanism;
    /// anything else is a deliberately broken one for mutation tests.
    pub additive_scale: f64,
}

impl OracleConfig {
    pub fn new(request: TopKRequest, params: PrivacyParams) -> Self {
        Self { request, params, domain: DomainConfig::default(), additive_scale: 1.0 }
    }

    pub fn with_additive_scale(mut self, scale: f64) -> Self {
        self.additive_scale = scale;
        self
    }

    pub fn with_domain(mut self, domain: DomainConfig) -> Self {
        self.domain = domain;
        self
    }

    fn h_bot(&self, view: &SortedView, kbar: usize, variant: ThresholdVariant) -> Result<f64> {
        let t = additive_term(kbar, &self.params, variant)?;
        Ok(view.rank_count(kbar + 1) as f64 + 1.0 + self.additive_scale * t)
    }

    /// Candidate domain for the peeling family (limited-domain and strict).
    fn peel_domain(&self, view: &SortedView) -> Result<Vec<Label>> {
        match self.request.mechanism {
            Mechanism::LimitedDomain => view.limited_domain(self.request.kbar, &self.domain),
            Mechanism::Strict => view.strict_limited_domain(self.request.kbar),
            m => Err(Error::Unsupported(format!("{m} has no single peeling domain"))),
        }
    }
}

/// Exact output distribution of the configured mechanism on `h`.
/// Laplace-noised variants have no closed form here.
pub fn exact_mechanism_distribution(h: &Histogram, cfg: &OracleConfig) -> Result<ExactDistribution> {
    let req = cfg.request;
    req.validate()?;
    cfg.params.validate()?;
    let view = h.sorted_view();
    let eps = cfg.params.eps;
    match req.mechanism {
        Mechanism::LimitedDomain | Mechanism::Strict => {
            let domain = cfg.peel_domain(&view)?;
            let variant = ThresholdVariant::for_mechanism(req.mechanism);
            let h_bot = cfg.h_bot(&view, req.kbar, variant)?;
            exact_peeling_distribution(h, &domain, req.k, h_bot, eps)
        }
        Mechanism::OptimalThreshold => {
            if cfg.params.sensitivity != SensitivitySetting::Unrestricted {
                return Err(invalid!("optimal-threshold is defined for unrestricted sensitivity only"));
            }
            let scores = threshold_scores(&view, req.k, req.kbar, &cfg.params);
            let logits: Vec<f64> = scores.iter().map(|&(_, s)| -eps * s).collect();
            let sel = math::softmax(&logits);
            let mut dist = ExactDistribution::default();
            for (&(kbar, _), p_sel) in scores.iter().zip(sel) {
                let domain = view.limited_domain(kbar, &cfg.domain)?;
                let h_bot = cfg.h_bot(&view, kbar, ThresholdVariant::Gumbel)?;
                let inner = exact_peeling_distribution(h, &domain, req.k - 1, h_bot, eps)?;
                for (o, p) in inner.iter() {
                    dist.add(Outcome { kbar: Some(kbar), output: o.output.clone() }, p_sel * p);
                }
            }
            Ok(dist)
        }
        Mechanism::FixedThreshold => {
            let h_bot = cfg.h_bot(&view, req.k, ThresholdVariant::Fixed)?;
            let scale = NoiseScale::from_eps(eps)?;
            let gate = view.rank_count(req.k + 1);
            let eligible: Vec<(&Label, f64)> = view
                .entries()
                .iter()
                .take(req.k)
                .filter(|e| e.1 > gate)
                .map(|(l, c)| (l, 1.0 - laplace_cdf(h_bot - *c as f64, scale)))
                .collect();
            if eligible.len() > 20 {
                return Err(Error::ResourceLimit(format!("2^{} inclusion patterns", eligible.len())));
            }
            let mut dist = ExactDistribution::default();
            for mask in 0u32..(1 << eligible.len()) {
                let mut p = 1.0;
                let mut kept = Vec::new();
                for (j, (l, pj)) in eligible.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        p *= pj;
                        kept.push((*l).clone());
                    } else {
                        p *= 1.0 - pj;
                    }
                }
                kept.sort();
                dist.add(TopKOutput::full(kept).into(), p);
            }
            Ok(dist)
        }
        Mechanism::Laplace => Err(Error::Unsupported(
            "no exact oracle for the laplace variant; use the Monte-Carlo path".into(),
        )),
    }
}

/// Whether `h′` was obtained from `h` by removing a user, or by adding one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Removed,
    Added,
}

/// Two histograms that differ by one user's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub h: Histogram,
    pub h_prime: Histogram,
    pub direction: Direction,
    /// The labels the user contributes to.
    pub user_elements: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted_delta: Option<u64>,
}

impl NeighborPair {
    /// `h′ = h − user`.
    pub fn remove_user(h: Histogram, user: &[Label], restricted_delta: Option<u64>) -> Result<Self> {
        let mut h_prime = h.clone();
        for l in user {
            let c = h.count(l);
            if c == 0 {
                return Err(invalid!("cannot remove label {l:?} with count 0"));
            }
            h_prime.set(l.clone(), c - 1);
        }
        let pair = Self {
            h,
            h_prime,
            direction: Direction::Removed,
            user_elements: user.to_vec(),
            restricted_delta,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// The same pair seen from the other side.
    pub fn reversed(&self) -> Self {
        Self {
            h: self.h_prime.clone(),
            h_prime: self.h.clone(),
            direction: match self.direction {
                Direction::Removed => Direction::Added,
                Direction::Added => Direction::Removed,
            },
            user_elements: self.user_elements.clone(),
            restricted_delta: self.restricted_delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let labels: BTreeSet<&str> = self.h.labels().chain(self.h_prime.labels()).collect();
        let (mut up, mut down, mut differing) = (false, false, 0u64);
        for l in labels {
            let (a, b) = (self.h.count(l), self.h_prime.count(l));
            if a.abs_diff(b) > 1 {
                return Err(invalid!("label {l:?} changes by more than one"));
            }
            up |= a > b;
            down |= a < b;
            differing += u64::from(a != b);
        }
        if up && down {
            return Err(invalid!("neighbors must be ordered coordinatewise"));
        }
        if let Some(d) = self.restricted_delta {
            if differing > d {
                return Err(invalid!("{differing} labels differ, more than Δ = {d}"));
            }
        }
        Ok(())
    }
}

/// Every pair `(h, h − user)` with `h` ranging over all count vectors in
/// `[0, max_count]^universe` and `user` over the nonempty label subsets that
/// `h` can lose (at most Δ labels when restricted).
pub fn enumerate_neighbors(
    universe: &[Label],
    max_count: u64,
    restricted_delta: Option<u64>,
) -> Result<Vec<NeighborPair>> {
    if universe.len() > 6 || max_count > 5 {
        return Err(Error::ResourceLimit(format!(
            "enumeration is limited to 6 labels and counts <= 5, got {} labels and max {max_count}",
            universe.len()
        )));
    }
    let distinct: BTreeSet<&Label> = universe.iter().collect();
    if distinct.len() != universe.len() {
        return Err(invalid!("universe labels must be distinct"));
    }
    if restricted_delta == Some(0) {
        return Err(invalid!("restricted sensitivity must be at least 1"));
    }
    let d = universe.len();
    let base = max_count + 1;
    let n_hist = base.pow(d as u32);
    let mut out = Vec::new();
    for code in 0..n_hist {
        let mut counts = Vec::with_capacity(d);
        let mut c = code;
        for _ in 0..d {
            counts.push(c % base);
            c /= base;
        }
        let h: Histogram = universe.iter().cloned().zip(counts.iter().copied()).collect();
        for mask in 1u32..(1 << d) {
            let user: Vec<Label> = (0..d).filter(|&j| mask & (1 << j) != 0).map(|j| universe[j].clone()).collect();
            if restricted_delta.is_some_and(|dl| user.len() as u64 > dl) {
                continue;
            }
            if user.iter().any(|l| h.count(l) == 0) {
                continue;
            }
            out.push(NeighborPair::remove_user(h.clone(), &user, restricted_delta)?);
        }
    }
    Ok(out)
}

/// One hockey-stick check, in the shape reports are emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpVerification {
    pub pair: NeighborPair,
    pub eps_target: f64,
    pub delta_target: f64,
    pub delta_measured: f64,
    pub pass: bool,
}

/// Exact hockey-stick divergence in both directions at `e^{eps_target}`.
pub fn verify_mechanism_dp(
    pair: &NeighborPair,
    cfg: &OracleConfig,
    eps_target: f64,
    delta_target: f64,
) -> Result<DpVerification> {
    let p = exact_mechanism_distribution(&pair.h, cfg)?;
    let q = exact_mechanism_distribution(&pair.h_prime, cfg)?;
    let delta_measured = hockey_stick_divergence(&p, &q, eps_target).max(hockey_stick_divergence(&q, &p, eps_target));
    Ok(DpVerification {
        pair: pair.clone(),
        eps_target,
        delta_target,
        delta_measured,
        pass: delta_measured <= delta_target,
    })
}

/// Outcome of running a check over a family of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub pairs: usize,
    pub failures: usize,
    pub max_measured: f64,
    pub bound: f64,
    /// The pair with the largest measured value.
    pub worst: Option<NeighborPair>,
}

impl FamilySummary {
    fn new(bound: f64) -> Self {
        Self { pairs: 0, failures: 0, max_measured: 0.0, bound, worst: None }
    }

    fn push(&mut self, pair: &NeighborPair, value: f64, pass: bool) {
        self.pairs += 1;
        self.failures += usize::from(!pass);
        if self.worst.is_none() || value > self.max_measured {
            self.max_measured = value;
            self.worst = Some(pair.clone());
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

pub fn verify_family(
    pairs: &[NeighborPair],
    cfg: &OracleConfig,
    eps_target: f64,
    delta_target: f64,
) -> Result<FamilySummary> {
    let mut s = FamilySummary::new(delta_target);
    for pair in pairs {
        let v = verify_mechanism_dp(pair, cfg, eps_target, delta_target)?;
        s.push(pair, v.delta_measured, v.pass);
    }
    Ok(s)
}

fn bad_labels(pair: &NeighborPair, cfg: &OracleConfig) -> Result<BTreeSet<Label>> {
    let d = cfg.peel_domain(&pair.h.sorted_view())?;
    let d_prime: BTreeSet<Label> = cfg.peel_domain(&pair.h_prime.sorted_view())?.into_iter().collect();
    Ok(d.into_iter().filter(|l| !d_prime.contains(l)).collect())
}

/// Exact probability that the mechanism on `pair.h` emits a label of
/// `D(h) \ D(h′)`. Peeling family only.
pub fn bad_event_probability(pair: &NeighborPair, cfg: &OracleConfig) -> Result<f64> {
    let bad = bad_labels(pair, cfg)?;
    if bad.is_empty() {
        return Ok(0.0);
    }
    let dist = exact_mechanism_distribution(&pair.h, cfg)?;
    Ok(dist.mass_where(|o| o.output.indices.iter().any(|l| bad.contains(l))))
}

/// Bad-event mass on both sides of every pair against `delta`.
pub fn bad_event_family(pairs: &[NeighborPair], cfg: &OracleConfig, delta: f64) -> Result<FamilySummary> {
    let mut s = FamilySummary::new(delta);
    for pair in pairs {
        for side in [pair.clone(), pair.reversed()] {
            let m = bad_event_probability(&side, cfg)?;
            s.push(&side, m, m <= delta);
        }
    }
    Ok(s)
}

/// Largest gap, over outcomes using only labels of `D(h) ∩ D(h′)`, between
/// `Pr[peel(h, D(h)) = o]` and
/// `Pr[peel(h, D(h) ∩ D(h′)) = o] · Pr[peel(h, D(h)) avoids D(h) \ D(h′)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCheck {
    pub max_gap: f64,
    pub common_outcomes: usize,
    pub worst_outcome: Option<Outcome>,
}

pub fn good_event_factorization(pair: &NeighborPair, cfg: &OracleConfig) -> Result<FactorizationCheck> {
    let req = cfg.request;
    let view = pair.h.sorted_view();
    let domain = cfg.peel_domain(&view)?;
    let bad = bad_labels(pair, cfg)?;
    let common: Vec<Label> = domain.iter().filter(|l| !bad.contains(*l)).cloned().collect();
    let h_bot = cfg.h_bot(&view, req.kbar, ThresholdVariant::for_mechanism(req.mechanism))?;
    let full = exact_peeling_distribution(&pair.h, &domain, req.k, h_bot, cfg.params.eps)?;
    let restricted = exact_peeling_distribution(&pair.h, &common, req.k, h_bot, cfg.params.eps)?;
    let avoid = full.mass_where(|o| !o.output.indices.iter().any(|l| bad.contains(l)));
    let mut check = FactorizationCheck { max_gap: 0.0, common_outcomes: 0, worst_outcome: None };
    for (o, p) in restricted.iter() {
        check.common_outcomes += 1;
        let gap = math::abs(full.prob(o) - p * avoid);
        if check.worst_outcome.is_none() || gap > check.max_gap {
            check.max_gap = gap;
            check.worst_outcome = Some(o.clone());
        }
    }
    Ok(check)
}

/// `Pr[Lap(1/ε) > t + Lap(1/ε)] = ¼(2 + εt)e^{−εt}` for `t ≥ 0`.
pub fn laplace_tail_difference(t: f64, eps: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(invalid!("t must be non-negative, got {t}"));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid!("eps must be positive and finite, got {eps}"));
    }
    let x = eps * t;
    Ok(0.25 * (2.0 + x) * math::exp(-x))
}

/// Draws samples `[c·MC_CHUNK, min(n, (c+1)·MC_CHUNK))` from `rng.split(c)`.
/// Merging chunks in any order gives the same table.
pub fn monte_carlo_chunk(
    chunk: u64,
    n: u64,
    rng: &SeededRng,
    mut sample: impl FnMut(&mut SeededRng) -> Result<Outcome>,
) -> Result<BTreeMap<Outcome, u64>> {
    let start = chunk.saturating_mul(MC_CHUNK);
    let end = n.min(start.saturating_add(MC_CHUNK));
    let mut r = rng.split(chunk);
    let mut counts = BTreeMap::new();
    for _ in start..end {
        *counts.entry(sample(&mut r)?).or_insert(0) += 1;
    }
    Ok(counts)
}

pub fn chunk_count(n: u64) -> u64 {
    n.div_ceil(MC_CHUNK)
}

/// Empirical distribution of `n` draws of an arbitrary sampler.
pub fn monte_carlo_with(
    n: u64,
    rng: &SeededRng,
    mut sample: impl FnMut(&mut SeededRng) -> Result<Outcome>,
) -> Result<ExactDistribution> {
    if n == 0 {
        return Err(invalid!("n_samples must be at least 1"));
    }
    let mut total: BTreeMap<Outcome, u64> = BTreeMap::new();
    for c in 0..chunk_count(n) {
        for (o, k) in monte_carlo_chunk(c, n, rng, &mut sample)? {
            *total.entry(o).or_insert(0) += k;
        }
    }
    Ok(ExactDistribution::from_counts(&total, n))
}

/// One draw of the configured mechanism, as an [`Outcome`]. The additive
/// scale is not applied; sampling always runs the real mechanism.
pub fn sample_outcome(h: &Histogram, cfg: &OracleConfig, rng: &mut SeededRng) -> Result<Outcome> {
    let run = run_mechanism(h, &cfg.request, &cfg.params, &cfg.domain, rng)?;
    let kbar = (cfg.request.mechanism == Mechanism::OptimalThreshold).then_some(run.kbar);
    Ok(Outcome { kbar, output: run.output })
}

/// Empirical output distribution of the configured mechanism on `h`.
pub fn monte_carlo_distribution(
    h: &Histogram,
    cfg: &OracleConfig,
    n: u64,
    rng: &SeededRng,
) -> Result<ExactDistribution> {
    monte_carlo_with(n, rng, |r| sample_outcome(h, cfg, r))
}

/// Limited versus full-domain exponential mechanism on the top label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIndexComparison {
    /// `Pr[limited EM over D ∪ {⊥} picks i_(1)]`
    pub p_limited: f64,
    /// `Pr[EM over the whole universe picks i_(1)]`
    pub p_full: f64,
    /// `ln(min{Δ,k̄}e^ε/δ) + ε h_(k̄+1) ≤ ln Σ_{j>k̄} e^{ε h_(j)}`
    pub condition_holds: bool,
    /// `Pr[limited EM picks neither i_(1) nor ⊥]`
    pub wrong_limited: f64,
    /// `Pr[full EM does not pick i_(1)]`
    pub wrong_full: f64,
}

/// Exact first-pick comparison for a universe of `universe_size` labels, all
/// those not stored in `h` having count zero.
pub fn first_index_comparison(
    h: &Histogram,
    universe_size: usize,
    kbar: usize,
    params: &PrivacyParams,
    cfg: &DomainConfig,
) -> Result<FirstIndexComparison> {
    params.validate()?;
    if h.is_empty() {
        return Err(invalid!("histogram must have at least one positive count"));
    }
    if kbar == 0 {
        return Err(invalid!("kbar must be at least 1"));
    }
    if universe_size < h.len().max(kbar) {
        return Err(invalid!("universe of {universe_size} labels cannot hold {} stored labels and kbar = {kbar}", h.len()));
    }
    let eps = params.eps;
    let view = h.sorted_view();
    let domain = view.limited_domain(kbar, cfg)?;
    let dom_logw: Vec<f64> = domain.iter().map(|l| eps * h.count(l) as f64).collect();
    let tail_zeros = universe_size - h.len().max(kbar);
    let mut tail_logw: Vec<f64> = view.entries().iter().skip(kbar).map(|e| eps * e.1 as f64).collect();
    tail_logw.extend(core::iter::repeat_n(0.0, tail_zeros));

    let bot = crate::mechanisms::bottom_threshold_from_view(&view, kbar, params, ThresholdVariant::Gumbel)?;
    let log_bot = eps * bot.value;
    let log_top = eps * view.rank_count(1) as f64;

    let lse_dom = math::log_sum_exp(dom_logw.iter().copied());
    let lse_tail = math::log_sum_exp(tail_logw.iter().copied());
    let lse_lim = math::log_sum_exp([lse_dom, log_bot]);
    let lse_full = math::log_sum_exp([lse_dom, lse_tail]);
    let lse_dom_rest = math::log_sum_exp(dom_logw.iter().skip(1).copied());
    let lse_full_rest = math::log_sum_exp([lse_dom_rest, lse_tail]);

    let m = params.sensitivity.effective_min(kbar) as f64;
    let lhs = math::ln(m * math::exp(eps) / params.delta) + eps * view.rank_count(kbar + 1) as f64;
    Ok(FirstIndexComparison {
        p_limited: math::exp(log_top - lse_lim),
        p_full: math::exp(log_top - lse_full),
        condition_holds: lhs <= lse_tail,
        wrong_limited: math::exp(lse_dom_rest - lse_lim),
        wrong_full: math::exp(lse_full_rest - lse_full),
    })
}
