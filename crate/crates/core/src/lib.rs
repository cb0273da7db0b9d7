//! Toolkit for measuring hate-speech spillover from fringe communities.

pub mod analysis;
pub mod calendar;
pub mod cohort;
pub mod config;
pub mod corpus;
pub mod error;
pub mod fsutil;
pub mod its;
pub mod lexicon;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
