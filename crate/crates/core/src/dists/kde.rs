use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DistError;

/// Bandwidth floor for degenerate samples.
pub const MIN_BANDWIDTH: f64 = 1e-6;

/// Univariate Gaussian kernel density estimate.
///
/// Evaluation sums every stored kernel; there is no binning or tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    samples: Vec<f64>,
    bandwidth: f64,
    modal_density: f64,
}

impl Kde {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Largest density over the sample points.
    pub fn modal_density(&self) -> f64 {
        self.modal_density
    }

    pub fn density(&self, x: f64) -> f64 {
        let inv_h = 1.0 / self.bandwidth;
        let sum: f64 = self
            .samples
            .iter()
            .map(|&s| {
                let u = (x - s) * inv_h;
                (-0.5 * u * u).exp()
            })
            .sum();
        sum * inv_h / (self.samples.len() as f64 * (2.0 * PI).sqrt())
    }

    pub(crate) fn check(&self) -> Result<(), DistError> {
        if self.samples.is_empty() || self.samples.iter().any(|s| !s.is_finite()) {
            return Err(DistError::Malformed("kde samples must be finite and non-empty".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(DistError::Bandwidth(self.bandwidth));
        }
        if !(self.modal_density > 0.0 && self.modal_density.is_finite()) {
            return Err(DistError::Malformed("kde modal density must be positive".into()));
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `1.06 * sigma * n^(-1/5)` with `sigma = min(std, IQR / 1.34)`.
///
/// When one of the two spread estimates is zero the other one is used, and
/// the result is floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.34;
    let sigma = match (std > 0.0, iqr > 0.0) {
        (true, true) => std.min(iqr),
        (true, false) => std,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    (1.06 * sigma * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Fits a Gaussian KDE; `bandwidth` defaults to [`silverman_bandwidth`].
pub fn fit_kde(samples: &[f64], bandwidth: Option<f64>, min_samples: usize) -> Result<Kde, DistError> {
    if samples.len() < min_samples.max(1) {
        return Err(DistError::TooFewSamples {
            count: samples.len(),
            min: min_samples.max(1),
        });
    }
    if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
        return Err(DistError::NonFiniteSample(*bad));
    }
    let bandwidth = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(DistError::Bandwidth(h)),
        None => silverman_bandwidth(samples),
    };
    let mut kde = Kde {
        samples: samples.to_vec(),
        bandwidth,
        modal_density: 0.0,
    };
    kde.modal_density = kde
        .samples
        .iter()
        .map(|&s| kde.density(s))
        .fold(0.0, f64::max);
    Ok(kde)
}

/// Evenly spaced order statistics of `samples`, keeping at most `cap`.
pub fn quantile_subsample(samples: &[f64], cap: usize) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if cap == 0 || n <= cap {
        return sorted;
    }
    if cap == 1 {
        return vec![sorted[n / 2]];
    }
    (0..cap)
        .map(|i| {
            let idx = (i as f64 * (n - 1) as f64 / (cap - 1) as f64).round() as usize;
            sorted[idx]
        })
        .collect()
}
