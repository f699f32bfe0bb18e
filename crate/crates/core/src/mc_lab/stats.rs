//! Order statistics and log-log slope regression.

use crate::error::{Error, Result};

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `(median, interquartile range)`.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let med = quantile_of_sorted(&v, 0.5);
    let iqr = quantile_of_sorted(&v, 0.75) - quantile_of_sorted(&v, 0.25);
    (med, iqr)
}

pub fn median(values: &[f64]) -> f64 {
    median_iqr(values).0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
}

/// Ordinary least squares of `ys` on `xs`; at least four points.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let k = xs.len();
    if k != ys.len() {
        return Err(Error::domain("slope regression needs paired points"));
    }
    if k < 4 {
        return Err(Error::domain(format!("slope regression needs at least 4 points, got {k}")));
    }
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::domain("slope regression needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let std_error = (rss / (k - 2) as f64 / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let f = ols_slope(&xs, &ys).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-14);
        assert!((f.intercept - 1.5).abs() < 1e-14);
        assert!(f.std_error < 1e-14);
        assert!(ols_slope(&xs[..3], &ys[..3]).is_err());
    }

    #[test]
    fn noisy_line_standard_error() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.1, 1.9, 3.0];
        let f = ols_slope(&xs, &ys).unwrap();
        // residuals by hand: slope 0.98, intercept 0.03
        assert!((f.slope - 0.98).abs() < 1e-12);
        let rss: f64 = [-0.03, 0.09, -0.09, 0.03].iter().map(|r: &f64| r * r).sum();
        assert!((f.std_error - (rss / 2.0 / 5.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn median_and_iqr() {
        let (m, iqr) = median_iqr(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m, 3.0);
        assert_eq!(iqr, 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }
}
