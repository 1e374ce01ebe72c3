//! Equal-tailed credible intervals from Monte Carlo samples.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Posterior mean plus one equal-tailed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub level: f64,
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
}

impl IntervalSummary {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Quantile of already sorted data, interpolating linearly between order
/// statistics at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: samples.len() });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("samples contain non-finite values"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("credible level {level} outside (0,1)")))
    }
}

fn summarise(sorted: &[f64], mean: f64, level: f64) -> IntervalSummary {
    let tail = (1.0 - level) / 2.0;
    IntervalSummary {
        level,
        lower: quantile_sorted(sorted, tail),
        mean,
        upper: quantile_sorted(sorted, 1.0 - tail),
    }
}

pub fn credible_interval(samples: &[f64], level: f64) -> Result<IntervalSummary> {
    check_level(level)?;
    let sorted = sorted_copy(samples)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(summarise(&sorted, mean, level))
}

/// Several levels over one sort of the data.
pub fn credible_intervals(samples: &[f64], levels: &[f64]) -> Result<Vec<IntervalSummary>> {
    levels.iter().try_for_each(|&l| check_level(l))?;
    let sorted = sorted_copy(samples)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(levels.iter().map(|&l| summarise(&sorted, mean, l)).collect())
}
