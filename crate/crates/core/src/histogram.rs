//! Sparse histograms and their rank-ordered views.
//!
//! Only labels with a positive count are stored; every other label of the
//! (unknown) universe implicitly has count zero.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::DomainConfig;

pub type Label = String;

/// Label → count map. Labels absent from the map have count 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram {
    counts: BTreeMap<Label, u64>,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` to `label`, summing with any existing count.
    pub fn add(&mut self, label: impl Into<Label>, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(label.into()).or_insert(0) += count;
    }

    /// Sets the count of `label`, removing it when `count == 0`.
    pub fn set(&mut self, label: impl Into<Label>, count: u64) {
        let label = label.into();
        if count == 0 {
            self.counts.remove(&label);
        } else {
            self.counts.insert(label, count);
        }
    }

    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    /// Number of labels with a positive count.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.counts.iter().map(|(l, &c)| (l.as_str(), c))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.counts.keys().map(String::as_str)
    }

    /// Builds a histogram from signed counts, rejecting negatives.
    pub fn try_from_signed<I, L>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (L, i64)>,
        L: Into<Label>,
    {
        let mut h = Self::new();
        for (label, count) in entries {
            let label = label.into();
            if count < 0 {
                return Err(Error::Validation(alloc::format!(
                    "negative count {count} for label {label:?}"
                )));
            }
            h.add(label, count as u64);
        }
        Ok(h)
    }

    pub fn sorted_view(&self) -> SortedView {
        SortedView::new(self)
    }
}

impl<L: Into<Label>> FromIterator<(L, u64)> for Histogram {
    fn from_iter<I: IntoIterator<Item = (L, u64)>>(iter: I) -> Self {
        let mut h = Self::new();
        for (l, c) in iter {
            h.add(l, c);
        }
        h
    }
}

/// Orders by count descending, then label ascending. This is the fixed,
/// data-independent tie-break used everywhere a rank is needed.
pub fn rank_order(a: (&str, u64), b: (&str, u64)) -> Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Histogram entries in rank order; `rank_count(j)` is the j-th largest count
/// (1-based) and is 0 past the stored entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedView {
    entries: Vec<(Label, u64)>,
}

impl SortedView {
    pub fn new(h: &Histogram) -> Self {
        let mut entries: Vec<(Label, u64)> = h.iter().map(|(l, c)| (Label::from(l), c)).collect();
        entries.sort_by(|a, b| rank_order((&a.0, a.1), (&b.0, b.1)));
        Self { entries }
    }

    pub fn entries(&self) -> &[(Label, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `h_(j)` for 1-based `j`; 0 when `j` is past the end or `j == 0`.
    pub fn rank_count(&self, j: usize) -> u64 {
        if j == 0 {
            return 0;
        }
        self.entries.get(j - 1).map_or(0, |e| e.1)
    }

    /// The first `kbar` labels in rank order, padded with reserve labels
    /// (count 0) when fewer than `kbar` labels are stored.
    pub fn limited_domain(&self, kbar: usize, cfg: &DomainConfig) -> Result<Vec<Label>> {
        if kbar == 0 {
            return Err(Error::InvalidArgument("kbar must be at least 1".into()));
        }
        let mut out: Vec<Label> = self.entries.iter().take(kbar).map(|e| e.0.clone()).collect();
        if out.len() < kbar {
            let missing = kbar - out.len();
            let pads = cfg.padding(missing, |l| self.contains(l))?;
            out.extend(pads);
        }
        Ok(out)
    }

    /// Labels whose count is strictly above `h_(kbar+1)`. Never padded.
    pub fn strict_limited_domain(&self, kbar: usize) -> Result<Vec<Label>> {
        if kbar == 0 {
            return Err(Error::InvalidArgument("kbar must be at least 1".into()));
        }
        let cutoff = self.rank_count(kbar + 1);
        Ok(self
            .entries
            .iter()
            .take_while(|e| e.1 > cutoff)
            .map(|e| e.0.clone())
            .collect())
    }

    fn contains(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.0 == label)
    }
}

pub fn sorted_view(h: &Histogram) -> SortedView {
    SortedView::new(h)
}

pub fn limited_domain(h: &Histogram, kbar: usize, cfg: &DomainConfig) -> Result<Vec<Label>> {
    h.sorted_view().limited_domain(kbar, cfg)
}

pub fn strict_limited_domain(h: &Histogram, kbar: usize) -> Result<Vec<Label>> {
    h.sorted_view().strict_limited_domain(kbar)
}
