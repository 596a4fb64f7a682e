//! Interaction kernels `k: ℝ^d → ℝ^d`.
//!
//! Every shipped variant is bounded and square integrable. Kernels are
//! written as a scalar radial profile times either a fixed direction
//! (even kernels) or the argument itself (odd kernels), which lets the
//! pair loop evaluate the profile once per unordered pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Zero,
    /// `A exp(-|x|²/2w²) e` with a unit direction `e`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
    },
    /// `A (x/w) exp(-|x|²/2w²)`, the odd gradient-of-Gaussian kernel.
    GaussianGradient { amplitude: f64, width: f64 },
    /// `A exp(1 - 1/(1 - |x|²/r²)) e` inside the ball of radius `r`.
    Bump {
        amplitude: f64,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Zero
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Profile {
    Zero,
    Gaussian { inv_two_w2: f64 },
    Bump { inv_r2: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Axis {
    Fixed([f64; 2]),
    Radial { inv_width: f64 },
}

/// A kernel resolved for a given dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    dim: usize,
    amplitude: f64,
    profile: Profile,
    axis: Axis,
}

fn resolve_direction(dim: usize, direction: &Option<Vec<f64>>) -> Result<[f64; 2]> {
    let raw = match direction {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::Validation(format!(
                    "kernel direction has {} components, expected {dim}",
                    v.len()
                )));
            }
            v.clone()
        }
        None => vec![1.0; dim],
    };
    let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Validation("kernel direction must be a nonzero finite vector".into()));
    }
    let mut out = [0.0; 2];
    for (o, c) in out.iter_mut().zip(&raw) {
        *o = c / norm;
    }
    Ok(out)
}

impl KernelSpec {
    pub fn resolve(&self, dim: usize) -> Result<Kernel> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("kernel {name} must be positive, got {v}")))
            }
        };
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation("kernel amplitude must be finite".into()))
            }
        };
        let kernel = match self {
            KernelSpec::Zero => Kernel {
                dim,
                amplitude: 0.0,
                profile: Profile::Zero,
                axis: Axis::Fixed([0.0; 2]),
            },
            KernelSpec::Gaussian {
                amplitude,
                width,
                direction,
            } => {
                finite(*amplitude)?;
                positive("width", *width)?;
                Kernel {
                    dim,
                    amplitude: *amplitude,
                    profile: Profile::Gaussian {
                        inv_two_w2: 0.5 / (width * width),
                    },
                    axis: Axis::Fixed(resolve_direction(dim, direction)?),
                }
            }
            KernelSpec::GaussianGradient { amplitude, width } => {
                finite(*amplitude)?;
                positive("width", *width)?;
                Kernel {
                    dim,
                    amplitude: *amplitude,
                    profile: Profile::Gaussian {
                        inv_two_w2: 0.5 / (width * width),
                    },
                    axis: Axis::Radial {
                        inv_width: 1.0 / width,
                    },
                }
            }
            KernelSpec::Bump {
                amplitude,
                radius,
                direction,
            } => {
                finite(*amplitude)?;
                positive("radius", *radius)?;
                Kernel {
                    dim,
                    amplitude: *amplitude,
                    profile: Profile::Bump {
                        inv_r2: 1.0 / (radius * radius),
                    },
                    axis: Axis::Fixed(resolve_direction(dim, direction)?),
                }
            }
        };
        Ok(kernel)
    }
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.profile == Profile::Zero || self.amplitude == 0.0
    }

    /// `k(-x) = -k(x)` for odd kernels, `k(-x) = k(x)` otherwise.
    pub fn is_odd(&self) -> bool {
        matches!(self.axis, Axis::Radial { .. })
    }

    #[inline(always)]
    pub(crate) fn profile(&self, r2: f64) -> f64 {
        match self.profile {
            Profile::Zero => 0.0,
            Profile::Gaussian { inv_two_w2 } => self.amplitude * (-r2 * inv_two_w2).exp(),
            Profile::Bump { inv_r2 } => {
                let s = r2 * inv_r2;
                if s < 1.0 {
                    self.amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// The fixed direction, or `None` for the radial (odd) variant.
    pub(crate) fn fixed_axis(&self) -> Option<[f64; 2]> {
        match self.axis {
            Axis::Fixed(e) => Some(e),
            Axis::Radial { .. } => None,
        }
    }

    pub(crate) fn radial_scale(&self) -> f64 {
        match self.axis {
            Axis::Fixed(_) => 0.0,
            Axis::Radial { inv_width } => inv_width,
        }
    }

    /// Writes `k(x)` into `out` (length `dim`).
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let p = self.profile(r2);
        match self.axis {
            Axis::Fixed(e) => {
                for (o, ea) in out.iter_mut().zip(e.iter()) {
                    *o = p * ea;
                }
            }
            Axis::Radial { inv_width } => {
                for (o, xa) in out.iter_mut().zip(x) {
                    *o = p * xa * inv_width;
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Adds `scale·k(x)` to `acc`, returning nothing. Used in hot loops.
    #[inline]
    pub fn accumulate(&self, x: &[f64], scale: f64, acc: &mut [f64]) {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let p = self.profile(r2) * scale;
        match self.axis {
            Axis::Fixed(e) => {
                for (a, ea) in acc.iter_mut().zip(e.iter()) {
                    *a += p * ea;
                }
            }
            Axis::Radial { inv_width } => {
                for (a, xa) in acc.iter_mut().zip(x) {
                    *a += p * xa * inv_width;
                }
            }
        }
    }

    /// `sup_x |k(x)|`.
    pub fn sup_norm(&self) -> f64 {
        match (self.profile, self.axis) {
            (Profile::Zero, _) => 0.0,
            (_, Axis::Fixed(_)) => self.amplitude.abs(),
            // |x|/w · exp(-|x|²/2w²) peaks at |x| = w.
            (_, Axis::Radial { .. }) => self.amplitude.abs() * (-0.5f64).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        let k = KernelSpec::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            direction: None,
        }
        .resolve(1)
        .unwrap();
        assert_eq!(k.eval(&[0.0]), vec![1.0]);
        assert!((k.eval(&[-1.0])[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(!k.is_odd());
    }

    #[test]
    fn gradient_kernel_is_odd() {
        let k = KernelSpec::GaussianGradient {
            amplitude: 2.0,
            width: 0.7,
        }
        .resolve(2)
        .unwrap();
        let a = k.eval(&[0.3, -0.2]);
        let b = k.eval(&[-0.3, 0.2]);
        assert_eq!(a[0], -b[0]);
        assert_eq!(a[1], -b[1]);
        assert!(k.is_odd());
    }

    #[test]
    fn bump_vanishes_outside_radius() {
        let k = KernelSpec::Bump {
            amplitude: 1.5,
            radius: 0.5,
            direction: Some(vec![1.0, 0.0]),
        }
        .resolve(2)
        .unwrap();
        assert_eq!(k.eval(&[0.6, 0.0]), vec![0.0, 0.0]);
        assert_eq!(k.eval(&[0.0, 0.0]), vec![1.5, 0.0]);
    }

    #[test]
    fn sup_norm_bounds_samples() {
        for spec in [
            KernelSpec::Gaussian {
                amplitude: -0.8,
                width: 1.3,
                direction: None,
            },
            KernelSpec::GaussianGradient {
                amplitude: 1.1,
                width: 0.4,
            },
            KernelSpec::Bump {
                amplitude: 2.0,
                radius: 1.0,
                direction: None,
            },
        ] {
            let k = spec.resolve(1).unwrap();
            let sup = k.sup_norm();
            for i in -400..=400 {
                let x = i as f64 * 0.01;
                assert!(k.eval(&[x])[0].abs() <= sup + 1e-15);
            }
        }
    }

    #[test]
    fn l2_quadrature_converges() {
        // ∫|k|² by midpoint rule on [-8, 8]; doubling the resolution must
        // change the estimate by a shrinking amount.
        for spec in [
            KernelSpec::Gaussian {
                amplitude: 1.0,
                width: 1.0,
                direction: None,
            },
            KernelSpec::Bump {
                amplitude: 1.0,
                radius: 1.0,
                direction: None,
            },
        ] {
            let k = spec.resolve(1).unwrap();
            let quad = |n: usize| {
                let h = 16.0 / n as f64;
                (0..n)
                    .map(|i| {
                        let x = -8.0 + (i as f64 + 0.5) * h;
                        k.eval(&[x])[0].powi(2) * h
                    })
                    .sum::<f64>()
            };
            let (a, b, c) = (quad(200), quad(400), quad(800));
            assert!((c - b).abs() <= (b - a).abs() + 1e-14);
            assert!(c.is_finite() && c > 0.0);
        }
        // Gaussian: ∫ exp(-x²) dx = √π.
        let k = KernelSpec::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            direction: None,
        }
        .resolve(1)
        .unwrap();
        let n = 4000;
        let h = 16.0 / n as f64;
        let q: f64 = (0..n)
            .map(|i| k.eval(&[-8.0 + (i as f64 + 0.5) * h])[0].powi(2) * h)
            .sum();
        assert!((q - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn bad_direction_rejected() {
        let spec = KernelSpec::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            direction: Some(vec![0.0, 0.0]),
        };
        assert!(spec.resolve(2).is_err());
        let spec = KernelSpec::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            direction: Some(vec![1.0]),
        };
        assert!(spec.resolve(2).is_err());
    }
}
