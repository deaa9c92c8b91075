//! Point estimates with error bars.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Sample mean with its standard error.
    Mean,
    /// Delete-a-group jackknife over settings.
    Jackknife {
        groups: usize,
    },
    MedianOfMeans {
        batches: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: Method,
}

impl EstimateWithError {
    /// `|value - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.std_error
    }

    pub fn contains(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error
    }
}

/// Estimate together with its delete-a-group jackknife replicates. Replicates
/// of estimates computed on the same groups can be combined before taking the
/// error, which propagates correlations exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Jackknife {
    pub value: f64,
    pub replicates: Vec<f64>,
    pub n_samples: usize,
}

impl Jackknife {
    pub fn std_error(&self) -> f64 {
        let g = self.replicates.len();
        if g < 2 {
            return f64::NAN;
        }
        let mean = self.replicates.iter().sum::<f64>() / g as f64;
        let ss: f64 = self
            .replicates
            .iter()
            .map(|r| (r - mean) * (r - mean))
            .sum();
        ((g - 1) as f64 / g as f64 * ss).sqrt()
    }

    pub fn estimate(&self) -> EstimateWithError {
        EstimateWithError {
            value: self.value,
            std_error: self.std_error(),
            n_samples: self.n_samples,
            method: Method::Jackknife {
                groups: self.replicates.len(),
            },
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Jackknife {
        Jackknife {
            value: f(self.value),
            replicates: self.replicates.iter().map(|&r| f(r)).collect(),
            n_samples: self.n_samples,
        }
    }

    /// Combines estimates that share the same groups.
    pub fn combine(parts: &[&Jackknife], f: impl Fn(&[f64]) -> f64) -> Result<Jackknife> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("nothing to combine"))?;
        let g = first.replicates.len();
        if parts.iter().any(|p| p.replicates.len() != g) {
            return Err(Error::invalid("jackknife estimates use different groups"));
        }
        let values: Vec<f64> = parts.iter().map(|p| p.value).collect();
        let mut buf = vec![0.0; parts.len()];
        let replicates = (0..g)
            .map(|i| {
                for (b, p) in buf.iter_mut().zip(parts) {
                    *b = p.replicates[i];
                }
                f(&buf)
            })
            .collect();
        Ok(Jackknife {
            value: f(&values),
            replicates,
            n_samples: first.n_samples,
        })
    }
}

/// Default number of jackknife groups.
pub const DEFAULT_GROUPS: usize = 100;

/// `g` contiguous, near-equal blocks covering `0..m`.
pub fn group_ranges(m: usize, g: usize) -> Vec<Range<usize>> {
    let g = g.clamp(1, m.max(1));
    (0..g).map(|i| (i * m / g)..((i + 1) * m / g)).collect()
}

/// Jackknife of the mean of per-setting values.
pub fn jackknife_mean(xs: &[f64], groups: usize) -> Jackknife {
    let m = xs.len();
    let ranges = group_ranges(m, groups);
    let sums: Vec<f64> = ranges.iter().map(|r| xs[r.clone()].iter().sum()).collect();
    let total: f64 = sums.iter().sum();
    let replicates = ranges
        .iter()
        .zip(&sums)
        .map(|(r, s)| {
            let rest = m - r.len();
            if rest == 0 {
                f64::NAN
            } else {
                (total - s) / rest as f64
            }
        })
        .collect();
    Jackknife {
        value: total / m as f64,
        replicates,
        n_samples: m,
    }
}

/// Sample mean with the usual standard error.
pub fn mean_estimate(xs: &[f64]) -> EstimateWithError {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        f64::NAN
    };
    EstimateWithError {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        n_samples: n,
        method: Method::Mean,
    }
}

/// Batch count `⌈2 ln(1/δ)⌉` for failure probability `δ`.
pub fn batches_for_delta(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta {delta} outside (0, 1)")));
    }
    Ok(((2.0 * (1.0 / delta).ln()).ceil() as usize).max(1))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median of `batches` contiguous batch means. The error is the asymptotic
/// standard error of a median of normal batch means, `√(π/2) · sd / √B`.
pub fn median_of_means(xs: &[f64], batches: usize) -> Result<EstimateWithError> {
    if batches == 0 || batches > xs.len() {
        return Err(Error::invalid(format!(
            "median of means needs 1 <= B <= {} batches, got {batches}",
            xs.len()
        )));
    }
    if batches == 1 {
        let mut e = mean_estimate(xs);
        e.method = Method::MedianOfMeans { batches: 1 };
        return Ok(e);
    }
    let mut means: Vec<f64> = group_ranges(xs.len(), batches)
        .into_iter()
        .map(|r| xs[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();
    let b = means.len() as f64;
    let mu = means.iter().sum::<f64>() / b;
    let sd = (means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (b - 1.0)).sqrt();
    Ok(EstimateWithError {
        value: median(&mut means),
        std_error: (std::f64::consts::FRAC_PI_2).sqrt() * sd / b.sqrt(),
        n_samples: xs.len(),
        method: Method::MedianOfMeans { batches },
    })
}
