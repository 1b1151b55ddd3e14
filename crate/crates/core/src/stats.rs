//! Least-squares fits for decay rates.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a perfect or degenerate fit.
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(pts: &[(f64, f64)]) -> LinearFit {
    let n = pts.len();
    if n == 0 {
        return LinearFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
            points: 0,
        };
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
        points: n,
    }
}

/// Norms at or below this are excluded from rate fits.
pub const RATE_NORM_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Fit of `ln‖x(jε)‖` against `t`.
    pub exponential: LinearFit,
    /// Fit of `ln‖x(jε)‖` against `ln t`.
    pub polynomial: LinearFit,
}

/// Fits over the middle 70% of boundary samples with norm above the floor.
pub fn decay_rates(times: &[f64], norms: &[f64]) -> RateFit {
    let kept: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(_, r)| **r > RATE_NORM_FLOOR && r.is_finite())
        .map(|(t, r)| (*t, *r))
        .collect();
    let lo = (kept.len() as f64 * 0.15).floor() as usize;
    let hi = (kept.len() as f64 * 0.85).ceil() as usize;
    let mid = &kept[lo.min(kept.len())..hi.min(kept.len())];
    let exp_pts: Vec<(f64, f64)> = mid.iter().map(|(t, r)| (*t, r.ln())).collect();
    let poly_pts: Vec<(f64, f64)> = mid
        .iter()
        .filter(|(t, _)| *t > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    RateFit {
        exponential: linear_fit(&exp_pts),
        polynomial: linear_fit(&poly_pts),
    }
}
