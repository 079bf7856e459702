//! Std companion to `dptopk-core`: histogram files, session persistence,
//! the `dptopk` command line and the HTTP service.

pub mod accuracy;
pub mod cli;
pub mod compose;
pub mod io;
pub mod service;
pub mod store;
pub mod verify;
