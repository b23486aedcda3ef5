use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::EventLog;

/// What each binned series counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Global,
    PerCascade(usize),
    PerUser(usize),
}

impl Grouping {
    fn n_series(&self) -> usize {
        match *self {
            Grouping::Global => 1,
            Grouping::PerCascade(n) | Grouping::PerUser(n) => n,
        }
    }
}

/// Event rates per bin: `rates[series][bin] = count / bin_width`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinnedRates {
    pub start: f64,
    pub bin_width: f64,
    pub rates: Vec<Vec<f64>>,
}

impl BinnedRates {
    pub fn n_bins(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    /// Sum over series, bin by bin.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_bins()];
        for s in &self.rates {
            for (o, r) in out.iter_mut().zip(s) {
                *o += r;
            }
        }
        out
    }
}

/// Rates over `[0, horizon]` in `⌈horizon / bin_width⌉` bins.
pub fn empirical_intensity(log: &EventLog, bin_width: f64, by: Grouping) -> Result<BinnedRates> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("bin width {bin_width} must be positive")));
    }
    let n_bins = (math::ceil(log.horizon() / bin_width) as usize).max(1);
    bin_events(log, 0.0, bin_width, n_bins, by)
}

/// Rates over `[start, end]` split into `n_bins` equal bins; events outside are ignored.
pub fn empirical_intensity_window(
    log: &EventLog,
    start: f64,
    end: f64,
    n_bins: usize,
    by: Grouping,
) -> Result<BinnedRates> {
    if !(end > start) || n_bins == 0 {
        return Err(Error::InvalidWindow { t0: start, t1: end });
    }
    bin_events(log, start, (end - start) / n_bins as f64, n_bins, by)
}

fn bin_events(
    log: &EventLog,
    start: f64,
    bin_width: f64,
    n_bins: usize,
    by: Grouping,
) -> Result<BinnedRates> {
    let mut rates = vec![vec![0.0; n_bins]; by.n_series()];
    let end = start + bin_width * n_bins as f64;
    for e in log.events() {
        if e.time < start || e.time > end {
            continue;
        }
        let series = match by {
            Grouping::Global => 0,
            Grouping::PerCascade(n) => {
                if e.cascade >= n {
                    return Err(Error::CascadeOutOfRange {
                        cascade: e.cascade,
                        n_cascades: n,
                    });
                }
                e.cascade
            }
            Grouping::PerUser(n) => {
                if e.user >= n {
                    return Err(Error::UserOutOfRange {
                        user: e.user,
                        n_users: n,
                    });
                }
                e.user
            }
        };
        let bin = (math::floor((e.time - start) / bin_width) as usize).min(n_bins - 1);
        rates[series][bin] += 1.0;
    }
    for s in &mut rates {
        for r in s.iter_mut() {
            *r /= bin_width;
        }
    }
    Ok(BinnedRates {
        start,
        bin_width,
        rates,
    })
}
