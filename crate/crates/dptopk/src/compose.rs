//! Bounded-range versus optimal composition table.

use std::io::Write;

use dptopk_core::accountant::{bounded_range_composition, optimal_dp_composition};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComposeRow {
    pub k: u64,
    pub eps: f64,
    pub eps_bounded_range: f64,
    pub eps_optimal: f64,
    /// `eps_optimal / eps_bounded_range`; above 1 the bounded-range bound wins.
    pub ratio: f64,
}

/// One row per `(k, ε)`. The optimal bound takes the smallest `(k − 2i)ε` with
/// `δᵢ ≤ delta`; the bounded-range bound is evaluated at `delta` itself.
pub fn compose_row(k: u64, eps: f64, delta: f64) -> dptopk_core::Result<ComposeRow> {
    let opt = optimal_dp_composition(k, eps, delta)?;
    let br = bounded_range_composition(&vec![eps; k as usize], delta)?;
    Ok(ComposeRow {
        k,
        eps,
        eps_bounded_range: br.eps_total,
        eps_optimal: opt.eps_total,
        ratio: opt.eps_total / br.eps_total,
    })
}

pub fn compose_table(ks: &[u64], epss: &[f64], delta: f64) -> dptopk_core::Result<Vec<ComposeRow>> {
    let mut rows = Vec::with_capacity(ks.len() * epss.len());
    for &k in ks {
        for &e in epss {
            rows.push(compose_row(k, e, delta)?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ComposeRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
