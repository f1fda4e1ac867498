//! Configuration, experiment runners and verification suites behind the
//! `stmi` binary.

pub mod config;
pub mod experiments;
pub mod output;
pub mod suites;
