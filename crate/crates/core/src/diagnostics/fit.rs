use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::linear_fit;

pub const MIN_FIT_SAMPLES: usize = 10;

/// Exponential decay rate fitted to a series on a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lambda_fit: f64,
    pub window: [f64; 2],
    pub r2: f64,
    pub samples: usize,
}

/// Least-squares fit of `log(values) = a - lambda_fit t` over samples with
/// `t` in the closed `window`.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: [f64; 2]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidInput("times and values differ in length".into()));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&t, &v) in times.iter().zip(values) {
        if t >= window[0] && t <= window[1] {
            if !(v > 0.0) {
                return Err(Error::NonPositiveSeries);
            }
            x.push(t);
            y.push(v.ln());
        }
    }
    if x.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "fit window [{}, {}] holds {} samples, need at least {MIN_FIT_SAMPLES}",
            window[0],
            window[1],
            x.len()
        )));
    }
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::InvalidInput("fit window has a single time".into()))?;
    Ok(DecayFit { lambda_fit: -fit.slope, window, r2: fit.r2.clamp(0.0, 1.0), samples: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(50, 0.2);
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.3 * t).exp()).collect();
        let f = fit_decay_rate(&t, &v, [0.0, 100.0]).unwrap();
        assert!((f.lambda_fit - 0.3).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.samples, 50);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t = grid(20, 1.0);
        let f = fit_decay_rate(&t, &vec![2.0; 20], [0.0, 19.0]).unwrap();
        assert_eq!(f.lambda_fit, 0.0);
    }

    #[test]
    fn rejects_nonpositive_and_short_windows() {
        let t = grid(20, 1.0);
        let mut v = vec![1.0; 20];
        v[5] = 0.0;
        assert!(matches!(fit_decay_rate(&t, &v, [0.0, 19.0]), Err(Error::NonPositiveSeries)));
        // The zero lies outside this window.
        assert!(fit_decay_rate(&t, &v, [6.0, 19.0]).is_ok());
        assert!(fit_decay_rate(&t, &v, [10.0, 15.0]).is_err());
    }
}
