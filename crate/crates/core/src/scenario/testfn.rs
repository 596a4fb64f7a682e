//! Smooth, compactly supported test functions with analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionSpec {
    /// `A exp(1 - 1/(1 - |x-c|²/r²))` on the ball `|x - c| < r`.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `(x_axis - c_axis)^power` times a unit bump of radius `r` at `c`.
    WindowedMonomial {
        center: Vec<f64>,
        radius: f64,
        axis: usize,
        power: u32,
    },
    /// `a · x`; not compactly supported, only for gradient-only uses such
    /// as the martingale ledger. Rejected in configuration files.
    Linear { coefficients: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    #[serde(flatten)]
    pub spec: TestFunctionSpec,
}

/// Value, gradient and Hessian of the unit bump at offset `y = x - c`.
/// Returns `None` outside the support.
fn bump_parts(y: &[f64], radius: f64) -> Option<(f64, [f64; 2], [f64; 4])> {
    let r2 = radius * radius;
    let s: f64 = y.iter().map(|v| v * v).sum::<f64>() / r2;
    if s >= 1.0 {
        return None;
    }
    let u = 1.0 - s;
    let psi = (1.0 - 1.0 / u).exp();
    let d = y.len();
    let mut grad = [0.0; 2];
    for a in 0..d {
        grad[a] = -2.0 * psi * y[a] / (r2 * u * u);
    }
    let mut hess = [0.0; 4];
    let r4 = r2 * r2;
    for a in 0..d {
        for b in 0..d {
            let yy = y[a] * y[b];
            let delta = if a == b { 1.0 } else { 0.0 };
            hess[a * d + b] = psi
                * (4.0 * yy / (r4 * u.powi(4)) - 8.0 * yy / (r4 * u.powi(3)) - 2.0 * delta / (r2 * u * u));
        }
    }
    Some((psi, grad, hess))
}

impl TestFunction {
    pub fn new(name: impl Into<String>, spec: TestFunctionSpec) -> Self {
        Self {
            name: name.into(),
            spec,
        }
    }

    pub fn bump(name: impl Into<String>, center: Vec<f64>, radius: f64) -> Self {
        Self::new(
            name,
            TestFunctionSpec::Bump {
                center,
                radius,
                amplitude: 1.0,
            },
        )
    }

    pub fn dim(&self) -> usize {
        match &self.spec {
            TestFunctionSpec::Bump { center, .. } | TestFunctionSpec::WindowedMonomial { center, .. } => {
                center.len()
            }
            TestFunctionSpec::Linear { coefficients } => coefficients.len(),
        }
    }

    /// Radius of the support ball around the center; infinite for linear
    /// functions.
    pub fn support_radius(&self) -> f64 {
        match &self.spec {
            TestFunctionSpec::Bump { radius, .. } | TestFunctionSpec::WindowedMonomial { radius, .. } => *radius,
            TestFunctionSpec::Linear { .. } => f64::INFINITY,
        }
    }

    pub fn validate(&self, dim: usize, half_width: f64) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Validation(format!(
                "test function '{}' has dimension {}, expected {dim}",
                self.name,
                self.dim()
            )));
        }
        match &self.spec {
            TestFunctionSpec::Linear { .. } => Err(Error::Validation(format!(
                "test function '{}' is not compactly supported",
                self.name
            ))),
            TestFunctionSpec::Bump { center, radius, .. } | TestFunctionSpec::WindowedMonomial { center, radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Validation(format!("test function '{}' needs a positive radius", self.name)));
                }
                if let TestFunctionSpec::WindowedMonomial { axis, .. } = &self.spec {
                    if *axis >= dim {
                        return Err(Error::Validation(format!("test function '{}' axis out of range", self.name)));
                    }
                }
                if center.iter().any(|c| c - radius < -half_width || c + radius > half_width) {
                    return Err(Error::Validation(format!(
                        "test function '{}' support leaves the box [-{half_width}, {half_width})",
                        self.name
                    )));
                }
                Ok(())
            }
        }
    }

    fn offset(center: &[f64], x: &[f64]) -> [f64; 2] {
        let mut y = [0.0; 2];
        for (a, (xa, ca)) in x.iter().zip(center).enumerate() {
            y[a] = xa - ca;
        }
        y
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = x.len();
        match &self.spec {
            TestFunctionSpec::Bump {
                center,
                radius,
                amplitude,
            } => {
                let y = Self::offset(center, x);
                bump_parts(&y[..d], *radius).map_or(0.0, |(p, _, _)| amplitude * p)
            }
            TestFunctionSpec::WindowedMonomial {
                center,
                radius,
                axis,
                power,
            } => {
                let y = Self::offset(center, x);
                bump_parts(&y[..d], *radius).map_or(0.0, |(p, _, _)| y[*axis].powi(*power as i32) * p)
            }
            TestFunctionSpec::Linear { coefficients } => coefficients.iter().zip(x).map(|(a, b)| a * b).sum(),
        }
    }

    /// Writes `∇φ(x)` into `out` (length `d`).
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match &self.spec {
            TestFunctionSpec::Bump {
                center,
                radius,
                amplitude,
            } => {
                let y = Self::offset(center, x);
                match bump_parts(&y[..d], *radius) {
                    Some((_, g, _)) => {
                        for a in 0..d {
                            out[a] = amplitude * g[a];
                        }
                    }
                    None => out.iter_mut().for_each(|o| *o = 0.0),
                }
            }
            TestFunctionSpec::WindowedMonomial {
                center,
                radius,
                axis,
                power,
            } => {
                let y = Self::offset(center, x);
                match bump_parts(&y[..d], *radius) {
                    Some((p, g, _)) => {
                        let mono = y[*axis].powi(*power as i32);
                        let dmono = if *power == 0 {
                            0.0
                        } else {
                            f64::from(*power) * y[*axis].powi(*power as i32 - 1)
                        };
                        for a in 0..d {
                            out[a] = mono * g[a] + if a == *axis { dmono * p } else { 0.0 };
                        }
                    }
                    None => out.iter_mut().for_each(|o| *o = 0.0),
                }
            }
            TestFunctionSpec::Linear { coefficients } => out.copy_from_slice(coefficients),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// `∇²φ(x)` row-major `d × d`.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut out = vec![0.0; d * d];
        match &self.spec {
            TestFunctionSpec::Bump {
                center,
                radius,
                amplitude,
            } => {
                let y = Self::offset(center, x);
                if let Some((_, _, h)) = bump_parts(&y[..d], *radius) {
                    for (o, v) in out.iter_mut().zip(h.iter()) {
                        *o = amplitude * v;
                    }
                }
            }
            TestFunctionSpec::WindowedMonomial {
                center,
                radius,
                axis,
                power,
            } => {
                let y = Self::offset(center, x);
                if let Some((p, g, h)) = bump_parts(&y[..d], *radius) {
                    let k = *power as i32;
                    let pw = f64::from(*power);
                    let mono = y[*axis].powi(k);
                    let d1 = if k >= 1 { pw * y[*axis].powi(k - 1) } else { 0.0 };
                    let d2 = if k >= 2 { pw * (pw - 1.0) * y[*axis].powi(k - 2) } else { 0.0 };
                    for a in 0..d {
                        for b in 0..d {
                            let mut v = mono * h[a * d + b];
                            if a == *axis {
                                v += d1 * g[b];
                            }
                            if b == *axis {
                                v += d1 * g[a];
                            }
                            if a == *axis && b == *axis {
                                v += d2 * p;
                            }
                            out[a * d + b] = v;
                        }
                    }
                }
            }
            TestFunctionSpec::Linear { .. } => {}
        }
        out
    }

    /// `sup |φ|`, estimated analytically where possible.
    pub fn sup_norm(&self) -> f64 {
        match &self.spec {
            TestFunctionSpec::Bump { amplitude, .. } => amplitude.abs(),
            TestFunctionSpec::WindowedMonomial { radius, power, .. } => radius.powi(*power as i32),
            TestFunctionSpec::Linear { .. } => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn catalogue(dim: usize) -> Vec<TestFunction> {
        let c = vec![0.3; dim];
        vec![
            TestFunction::new(
                "bump",
                TestFunctionSpec::Bump {
                    center: c.clone(),
                    radius: 2.0,
                    amplitude: 1.7,
                },
            ),
            TestFunction::new(
                "x1",
                TestFunctionSpec::WindowedMonomial {
                    center: c.clone(),
                    radius: 2.5,
                    axis: 0,
                    power: 1,
                },
            ),
            TestFunction::new(
                "x2",
                TestFunctionSpec::WindowedMonomial {
                    center: c,
                    radius: 2.5,
                    axis: dim - 1,
                    power: 2,
                },
            ),
        ]
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [1, 2] {
            for f in catalogue(dim) {
                let mut checked = 0;
                while checked < 100 {
                    let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..2.0)).collect();
                    let g = f.gradient(&x);
                    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if gnorm < 1e-3 {
                        continue;
                    }
                    let h = 1e-6;
                    let mut err = 0.0f64;
                    for a in 0..dim {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[a] += h;
                        xm[a] -= h;
                        let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                        err = err.max((fd - g[a]).abs());
                    }
                    assert!(err / gnorm <= 1e-6, "{}: rel err {}", f.name, err / gnorm);
                    checked += 1;
                }
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [1, 2] {
            for f in catalogue(dim) {
                for _ in 0..50 {
                    let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.2..1.8)).collect();
                    let hmat = f.hessian(&x);
                    let h = 1e-5;
                    for b in 0..dim {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[b] += h;
                        xm[b] -= h;
                        let gp = f.gradient(&xp);
                        let gm = f.gradient(&xm);
                        for a in 0..dim {
                            let fd = (gp[a] - gm[a]) / (2.0 * h);
                            assert!((fd - hmat[a * dim + b]).abs() < 1e-5 * (1.0 + fd.abs()));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn compact_support() {
        let f = TestFunction::bump("b", vec![1.0], 0.5);
        assert_eq!(f.value(&[1.6]), 0.0);
        assert_eq!(f.gradient(&[0.4]), vec![0.0]);
        assert_eq!(f.value(&[1.0]), 1.0);
    }

    #[test]
    fn validation_rejects_support_outside_box() {
        let f = TestFunction::bump("b", vec![7.5], 1.0);
        assert!(f.validate(1, 8.0).is_err());
        let lin = TestFunction::new(
            "lin",
            TestFunctionSpec::Linear {
                coefficients: vec![1.0],
            },
        );
        assert!(lin.validate(1, 8.0).is_err());
        assert_eq!(lin.gradient(&[3.0]), vec![1.0]);
    }
}
