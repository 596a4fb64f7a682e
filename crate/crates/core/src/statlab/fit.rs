//! Log-log power-law fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub se: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope.
    pub slope_ci: (f64, f64),
    /// False when some standard error was unusable and the fit fell back to
    /// equal weights.
    pub weighted: bool,
}

impl ScalingFit {
    /// Fits `log y = a + s log x`. Points are weighted by `(y/se)²`, the
    /// inverse delta-method variance of `log y`; the slope variance is
    /// inflated by the reduced χ² when the scatter exceeds the error bars.
    pub fn fit(abscissa: &[f64], ordinate: &[f64], se: &[f64]) -> Result<Self> {
        let n = abscissa.len();
        if ordinate.len() != n || se.len() != n {
            return Err(Error::Shape("fit inputs differ in length".into()));
        }
        let mut distinct: Vec<f64> = abscissa.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::Precondition(format!(
                "a scaling fit needs at least 3 distinct abscissae, got {}",
                distinct.len()
            )));
        }
        if abscissa.iter().chain(ordinate).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Numerical {
                time: 0.0,
                message: "log-log fit needs positive finite abscissae and ordinates".into(),
            });
        }
        let x: Vec<f64> = abscissa.iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = ordinate.iter().map(|v| v.ln()).collect();
        let weighted = se.iter().all(|s| *s > 0.0 && s.is_finite());
        let w: Vec<f64> = if weighted {
            ordinate.iter().zip(se).map(|(y, s)| (y / s) * (y / s)).collect()
        } else {
            vec![1.0; n]
        };
        let sw: f64 = w.iter().sum();
        let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
        let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
        let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
        let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
        let slope = sxy / sxx;
        let intercept = ym - slope * xm;
        let rss: f64 = (0..n)
            .map(|i| {
                let r = y[i] - intercept - slope * x[i];
                w[i] * r * r
            })
            .sum();
        let dof = (n - 2) as f64;
        let half = if weighted {
            let birge = if dof > 0.0 { (rss / dof).max(1.0) } else { 1.0 };
            1.959963984540054 * (birge / sxx).sqrt()
        } else if dof > 0.0 {
            let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Validation(e.to_string()))?;
            t.inverse_cdf(0.975) * (rss / dof / sxx).sqrt()
        } else {
            f64::INFINITY
        };
        Ok(Self {
            abscissa: abscissa.to_vec(),
            ordinate: ordinate.to_vec(),
            se: se.to_vec(),
            slope,
            intercept,
            slope_ci: (slope - half, slope + half),
            weighted,
        })
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // ties share the average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (rx, ry) = (ranks(&x[..n]), ranks(&y[..n]));
    let c = super::stats::covariance(&rx, &ry);
    c / (super::stats::variance(&rx) * super::stats::variance(&ry)).sqrt()
}
