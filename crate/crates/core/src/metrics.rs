//! Rates, sum rate, pooled rate CDF and outage.

use serde::{Deserialize, Serialize};

use crate::assignment::{AllocationResult, AssociationTensor};
use crate::channel::{interference, ChannelParams, ChannelTensor};
use crate::error::{Error, Result};
use crate::power::PowerTensor;

/// `Σ_{j,k} x·log2(1 + SINR)` for one user, by direct summation.
pub fn user_rate(
    user: usize,
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> f64 {
    let noise = params.noise_watts();
    x.user_entries(user)
        .map(|e| {
            let signal = p.at(user, e.bs, e.sub) * h.gain(user, e.bs, e.sub);
            let ipn = interference(user, e.bs, e.sub, x, p, h, params.interference) + noise;
            (signal / ipn).ln_1p() / std::f64::consts::LN_2
        })
        .sum()
}

pub fn user_rates(
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> Vec<f64> {
    (0..x.dims().users)
        .map(|i| user_rate(i, x, p, h, params))
        .collect()
}

pub fn sum_rate(
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> f64 {
    user_rates(x, p, h, params).iter().sum()
}

/// Statistics pooled over users × drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub drops: usize,
    /// Pooled per-user rates, drop-major.
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub mean_sum_rate: f64,
    /// Standard error of the per-drop sum rate mean; zero for one drop.
    pub sum_rate_stderr: f64,
    /// `(rate, F(rate))` at every distinct pooled rate, ascending.
    pub cdf: Vec<(f64, f64)>,
    pub gamma_th: f64,
    /// Fraction of pooled users below `gamma_th`.
    pub outage: f64,
    pub subchannels_per_user: Vec<usize>,
}

impl RateReport {
    /// Fraction of pooled users with rate strictly above `threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        let n = self.per_user_rate.len() as f64;
        self.per_user_rate.iter().filter(|&&r| r > threshold).count() as f64 / n
    }
}

/// Empirical CDF evaluated at each distinct sample.
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut cdf: Vec<(f64, f64)> = Vec::new();
    for (idx, &v) in sorted.iter().enumerate() {
        let f = (idx + 1) as f64 / n;
        match cdf.last_mut() {
            Some(last) if last.0 == v => last.1 = f,
            _ => cdf.push((v, f)),
        }
    }
    cdf
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn aggregate(results: &[AllocationResult], gamma_th: f64) -> Result<RateReport> {
    aggregate_rates(
        results.iter().map(|r| (r.user_rates.as_slice(), r.subchannels_per_user())),
        gamma_th,
    )
}

/// Pools `(per-user rates, per-user sub-channel counts)` per drop.
pub fn aggregate_rates<'a>(
    drops: impl IntoIterator<Item = (&'a [f64], Vec<usize>)>,
    gamma_th: f64,
) -> Result<RateReport> {
    let mut per_user_rate = Vec::new();
    let mut subchannels_per_user = Vec::new();
    let mut drop_sums = Vec::new();
    for (rates, counts) in drops {
        per_user_rate.extend_from_slice(rates);
        subchannels_per_user.extend(counts);
        drop_sums.push(rates.iter().sum::<f64>());
    }
    if drop_sums.is_empty() || per_user_rate.is_empty() {
        return Err(Error::Empty("no allocation results to aggregate"));
    }
    let (mean_sum_rate, sum_rate_stderr) = mean_stderr(&drop_sums);
    let outage = per_user_rate.iter().filter(|&&r| r < gamma_th).count() as f64
        / per_user_rate.len() as f64;
    Ok(RateReport {
        drops: drop_sums.len(),
        sum_rate: per_user_rate.iter().sum(),
        mean_sum_rate,
        sum_rate_stderr,
        cdf: empirical_cdf(&per_user_rate),
        gamma_th,
        outage,
        per_user_rate,
        subchannels_per_user,
    })
}
