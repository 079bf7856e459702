//! Differentially private top-k selection over histograms with an unknown domain.
//!
//! The crate is `no_std` (it needs `alloc`) and carries everything that is pure
//! computation: histogram views and limited domains, seeded Gumbel/Laplace
//! sampling, the selection mechanisms, privacy-loss arithmetic with the
//! pay-what-you-get budget session, and exact output-distribution oracles used
//! to check privacy guarantees on small instances.
//!
//! IO, file formats, the command line and the HTTP service live in the `dptopk`
//! crate.
//!
//! ```
//! use dptopk_core::{
//!     histogram::Histogram,
//!     mechanisms::limited_domain_topk,
//!     noise::SeededRng,
//!     DomainConfig, Mechanism, PrivacyParams, SensitivitySetting, TopKRequest,
//! };
//!
//! let h: Histogram = [("a", 50), ("b", 40), ("c", 3)].into_iter().collect();
//! let req = TopKRequest::new(2, 3, Mechanism::LimitedDomain).unwrap();
//! let params = PrivacyParams::new(1.0, 1e-6, 0.0, SensitivitySetting::Unrestricted).unwrap();
//! let mut rng = SeededRng::new(7);
//! let out = limited_domain_topk(&h, &req, &params, &DomainConfig::default(), &mut rng).unwrap();
//! assert!(out.len() <= 2);
//! ```
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod accountant;
pub mod error;
pub mod histogram;
pub mod math;
pub mod mechanisms;
pub mod noise;
pub mod oracle;
mod types;

pub use error::{Error, Result};
pub use histogram::{Histogram, Label, SortedView};
pub use types::{
    DomainConfig, Mechanism, PrivacyParams, SensitivitySetting, TopKOutput, TopKRequest,
};
