//! Least-squares rate fits for decay/convergence measurements.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// A fitted rate with a leave-one-out stability estimate. The halfwidth is
/// the worst slope change over all n refits with one sample dropped, which
/// is deterministic and pessimistic - the right bias for acceptance gates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub slope_ci_halfwidth: f64,
    pub n_points: usize,
}

/// Fit y against x. `log_log` fits ln y vs ln x (power law), otherwise
/// `log_x` fits y vs ln x; with both flags off the fit is linear.
pub fn fit_rate(samples: &[(f64, f64)], log_x: bool, log_log: bool) -> Result<RateFit> {
    if samples.len() < 4 {
        return Err(LabError::config(format!(
            "rate fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let take_log_x = log_x || log_log;
    let mut pts = Vec::with_capacity(samples.len());
    for &(x, y) in samples {
        if take_log_x && x <= 0.0 {
            return Err(LabError::numerics(format!("log fit with x = {x} <= 0")));
        }
        if log_log && y <= 0.0 {
            return Err(LabError::numerics(format!("log fit with y = {y} <= 0")));
        }
        pts.push((
            if take_log_x { x.ln() } else { x },
            if log_log { y.ln() } else { y },
        ));
    }
    let (xmin, xmax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    if xmax - xmin < 1e-12 * xmax.abs().max(1.0) {
        return Err(LabError::numerics("degenerate x-range in rate fit"));
    }

    let full = least_squares(&pts);
    let mut halfwidth = 0.0f64;
    for drop in 0..pts.len() {
        let reduced: Vec<(f64, f64)> = pts
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != drop)
            .map(|(_, &p)| p)
            .collect();
        let loo = least_squares(&reduced);
        halfwidth = halfwidth.max((loo.0 - full.0).abs());
    }
    let rss: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let e = y - (full.0 * x + full.1);
            e * e
        })
        .sum();
    Ok(RateFit {
        slope: full.0,
        intercept: full.1,
        residual_rms: (rss / pts.len() as f64).sqrt(),
        slope_ci_halfwidth: halfwidth,
        n_points: pts.len(),
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_recovers_exponent() {
        let samples: Vec<(f64, f64)> = [1.0, 0.5, 0.25, 0.125]
            .iter()
            .map(|&x: &f64| (x, x.sqrt()))
            .collect();
        let fit = fit_rate(&samples, false, true).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
        assert!(fit.slope_ci_halfwidth < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let samples: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, 3.7)).collect();
        let fit = fit_rate(&samples, false, true).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn small_noise_perturbs_slope_mildly() {
        // deterministic +-1% wiggle on y = x
        let samples: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let x = (2.0f64).powi(-i);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                (x, x * (1.0 + 0.01 * sign))
            })
            .collect();
        let fit = fit_rate(&samples, false, true).unwrap();
        assert!(fit.slope > 0.95 && fit.slope < 1.05, "slope {}", fit.slope);
        assert!(fit.slope_ci_halfwidth < 0.05);
    }

    #[test]
    fn guards_reject_bad_inputs() {
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)], false, true).is_err());
        let neg = [(1.0, 1.0), (0.5, -1.0), (0.25, 1.0), (0.125, 1.0)];
        assert!(fit_rate(&neg, false, true).is_err());
        let flat_x = [(1.0, 1.0), (1.0, 2.0), (1.0, 3.0), (1.0, 4.0)];
        assert!(fit_rate(&flat_x, false, false).is_err());
    }

    #[test]
    fn semilog_mode_fits_y_against_ln_x() {
        let samples: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&x: &f64| (x, 2.0 * x.ln() + 1.0))
            .collect();
        let fit = fit_rate(&samples, true, false).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
    }
}
