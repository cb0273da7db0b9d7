use rayon::prelude::*;

use super::{build_design, fit_ols, DesignOptions, ItsFit};
use crate::lexicon::DailyPoint;

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub bandwidth: u32,
    pub fit: Result<ItsFit, String>,
}

/// One fit per bandwidth, ascending.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub entries: Vec<SweepEntry>,
}

impl SweepTable {
    pub fn fits(&self) -> impl Iterator<Item = &ItsFit> {
        self.entries.iter().filter_map(|e| e.fit.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u32, &str)> {
        self.entries
            .iter()
            .filter_map(|e| e.fit.as_ref().err().map(|m| (e.bandwidth, m.as_str())))
    }

    pub fn get(&self, bandwidth: u32) -> Option<&ItsFit> {
        self.entries
            .iter()
            .find(|e| e.bandwidth == bandwidth)
            .and_then(|e| e.fit.as_ref().ok())
    }
}

/// Refits the model at every bandwidth; a failing bandwidth is recorded and
/// the sweep continues.
pub fn sensitivity_sweep(treatment: &[DailyPoint], control: &[DailyPoint], bandwidths: &[u32], opts: DesignOptions) -> SweepTable {
    let mut bandwidths = bandwidths.to_vec();
    bandwidths.sort_unstable();
    bandwidths.dedup();
    let entries = bandwidths
        .par_iter()
        .map(|&bandwidth| SweepEntry {
            bandwidth,
            fit: build_design(treatment, control, bandwidth, opts)
                .and_then(|d| fit_ols(&d))
                .map_err(|e| e.to_string()),
        })
        .collect();
    SweepTable { entries }
}
