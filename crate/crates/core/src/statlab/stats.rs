//! Sample moments with jackknife standard errors.

use serde::{Deserialize, Serialize};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(&x[..n]), mean(&y[..n]));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1) as f64
}

/// Jackknife standard error from the leave-one-out replicates.
pub fn jackknife_se(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    if loo.len() < 2 {
        return f64::NAN;
    }
    let m = mean(loo);
    ((n - 1.0) / n * loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sqrt()
}

/// Generic jackknife: recomputes `stat` on every leave-one-out subsample.
/// Quadratic cost; use the closed forms below for large samples.
pub fn jackknife<F: Fn(&[f64]) -> f64>(x: &[f64], stat: F) -> Estimate {
    let mut loo = Vec::with_capacity(x.len());
    let mut buf = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        buf.clear();
        buf.extend(x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v));
        loo.push(stat(&buf));
    }
    Estimate {
        value: stat(x),
        se: jackknife_se(&loo),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value − target| / se`; infinite when `se = 0` and the values differ.
    pub fn z_against(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se
        }
    }
}

pub fn mean_estimate(x: &[f64]) -> Estimate {
    Estimate {
        value: mean(x),
        se: (variance(x) / x.len() as f64).sqrt(),
    }
}

/// Sample covariance with its jackknife standard error, O(n).
pub fn covariance_estimate(x: &[f64], y: &[f64]) -> Estimate {
    let n = x.len().min(y.len());
    let nf = n as f64;
    let (sx, sy): (f64, f64) = (x[..n].iter().sum(), y[..n].iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (sx - x[i], sy - y[i]);
            let m = nf - 1.0;
            (sxy - x[i] * y[i] - a * b / m) / (m - 1.0)
        })
        .collect();
    Estimate {
        value: covariance(&x[..n], &y[..n]),
        se: jackknife_se(&loo),
    }
}

pub fn variance_estimate(x: &[f64]) -> Estimate {
    covariance_estimate(x, x)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}
