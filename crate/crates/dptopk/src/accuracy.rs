//! Monte-Carlo accuracy experiments for the limited-domain mechanisms.

use rayon::prelude::*;
use serde::Serialize;

use dptopk_core::mechanisms::run_mechanism;
use dptopk_core::noise::SeededRng;
use dptopk_core::oracle::{chunk_count, MC_CHUNK};
use dptopk_core::{DomainConfig, Error, Histogram, PrivacyParams, Result, TopKRequest};

pub const MIN_TRIALS: u64 = 100;

/// Synthetic or user-supplied instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    /// `⌊scale · r^{−exponent}⌋` for ranks `r = 1..=support`.
    PowerLaw { scale: f64, exponent: f64, support: usize },
    /// `support` labels sharing one count.
    Flat { count: u64, support: usize },
    Custom(Histogram),
}

fn rank_label(r: usize, support: usize) -> String {
    // zero padded so label order agrees with rank order
    let width = support.to_string().len();
    format!("x{r:0width$}")
}

impl Distribution {
    pub fn histogram(&self) -> Histogram {
        match self {
            Self::PowerLaw { scale, exponent, support } => (1..=*support)
                .map(|r| (rank_label(r, *support), (scale * (r as f64).powf(-exponent)).floor() as u64))
                .collect(),
            Self::Flat { count, support } => (1..=*support).map(|r| (rank_label(r, *support), *count)).collect(),
            Self::Custom(h) => h.clone(),
        }
    }
}

/// `α = ln(k·k̄/β)/ε`.
pub fn alpha(k: usize, kbar: usize, beta: f64, eps: f64) -> f64 {
    (k as f64 * kbar as f64 / beta).ln() / eps
}

/// `h_(k̄+1) + 1 + ln(min{Δ,k̄}/δ)/ε + ln(k/β)/ε`, the count `h_(k)` must reach.
pub fn separation_bound(h: &Histogram, req: &TopKRequest, params: &PrivacyParams, beta: f64) -> f64 {
    let m = params.sensitivity.effective_min(req.kbar) as f64;
    h.sorted_view().rank_count(req.kbar + 1) as f64
        + 1.0
        + (m / params.delta).ln() / params.eps
        + (req.k as f64 / beta).ln() / params.eps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub k: usize,
    pub kbar: usize,
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    pub trials: u64,
    pub alpha: f64,
    pub h_k: u64,
    pub separation_bound: f64,
    pub separation_holds: bool,
    pub short_outputs: u64,
    pub short_rate: f64,
    pub violations: u64,
    pub violation_rate: f64,
    /// `β + 3·sqrt(β(1−β)/trials)`.
    pub rate_limit: f64,
}

/// Runs `trials` independent queries. A short output ended in ⊥ before `k`
/// indices; a violation returned some index with count below `h_(k) − α`.
/// Trials are split into fixed chunks on `rng.split(c)`, so the result does
/// not depend on the thread count.
pub fn run_accuracy(
    h: &Histogram,
    req: &TopKRequest,
    params: &PrivacyParams,
    beta: f64,
    trials: u64,
    cfg: &DomainConfig,
    rng: &SeededRng,
) -> Result<AccuracyReport> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!("trials must be at least {MIN_TRIALS}, got {trials}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {beta}")));
    }
    req.validate()?;
    params.validate()?;
    let a = alpha(req.k, req.kbar, beta, params.eps);
    let h_k = h.sorted_view().rank_count(req.k);
    let floor = h_k as f64 - a;
    let per_chunk = (0..chunk_count(trials))
        .into_par_iter()
        .map(|c| {
            let mut r = rng.split(c);
            let n = MC_CHUNK.min(trials - c * MC_CHUNK);
            let (mut short, mut bad) = (0u64, 0u64);
            for _ in 0..n {
                let out = run_mechanism(h, req, params, cfg, &mut r)?.output;
                short += u64::from(out.terminated);
                bad += u64::from(out.indices.iter().any(|l| (h.count(l) as f64) < floor));
            }
            Ok((short, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    let (short, bad) = per_chunk.iter().fold((0, 0), |(s, b), &(x, y)| (s + x, b + y));
    let sep = separation_bound(h, req, params, beta);
    let n = trials as f64;
    Ok(AccuracyReport {
        k: req.k,
        kbar: req.kbar,
        eps: params.eps,
        delta: params.delta,
        beta,
        trials,
        alpha: a,
        h_k,
        separation_bound: sep,
        separation_holds: h_k as f64 >= sep,
        short_outputs: short,
        short_rate: short as f64 / n,
        violations: bad,
        violation_rate: bad as f64 / n,
        rate_limit: beta + 3.0 * (beta * (1.0 - beta) / n).sqrt(),
    })
}
