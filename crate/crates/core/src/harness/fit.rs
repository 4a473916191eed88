//! Per-N medians and ordinary least squares on `(log N, log median)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Replicate statistics at one grid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    #[serde(rename = "N")]
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub per_n: Vec<LevelStats>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Groups `(N, value)` points by `N` (ascending) and summarizes each level.
pub fn level_stats(points: &[(usize, f64)]) -> Vec<LevelStats> {
    let mut sorted: Vec<(usize, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let n = sorted[start].0;
        let end = start + sorted[start..].iter().take_while(|p| p.0 == n).count();
        let values: Vec<f64> = sorted[start..end].iter().map(|p| p.1).collect();
        out.push(LevelStats {
            n,
            median: quantile(&values, 0.5),
            q25: quantile(&values, 0.25),
            q75: quantile(&values, 0.75),
            min: values[0],
            max: values[values.len() - 1],
            count: values.len(),
        });
        start = end;
    }
    out
}

/// Fits `log median = intercept + slope · log N` over the per-N medians.
pub fn fit_loglog(points: &[(usize, f64)]) -> Result<RateFit> {
    if let Some(&(n, v)) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::FitRefused(format!(
            "metric {v} at N = {n} is not a positive finite number"
        )));
    }
    let per_n = level_stats(points);
    if per_n.len() < 3 {
        return Err(Error::FitRefused(format!(
            "need at least 3 distinct N, got {}",
            per_n.len()
        )));
    }
    let xs: Vec<f64> = per_n.iter().map(|s| (s.n as f64).ln()).collect();
    let ys: Vec<f64> = per_n.iter().map(|s| s.median.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * k * my.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        per_n,
    })
}
