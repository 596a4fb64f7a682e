//! Diffusion coefficients `σ(t, x) ∈ ℝ^{d×m}` and `ν(t, x) ∈ ℝ^{d×m̃}`.
//!
//! Two catalogue entries: constant matrices, and a base matrix scaled by
//! the bounded smooth modulation `1 + ε sin(ω Σ_a x_a + c t)` whose
//! wavenumber is a multiple of the box frequency so that it stays
//! periodic on `[-L, L)^d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    SmoothPerturbation {
        base: Vec<Vec<f64>>,
        /// Modulation depth `ε ∈ [0, 1)`.
        amplitude: f64,
        /// Integer box mode `n`; the spatial wavenumber is `π n / L`.
        mode: u32,
        /// Temporal angular frequency `c`.
        #[serde(default)]
        frequency: f64,
    },
}

impl CoefficientSpec {
    pub fn constant_diagonal(dim: usize, value: f64) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { value } else { 0.0 }).collect())
            .collect();
        CoefficientSpec::Constant { matrix }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant_diagonal(dim, 0.0)
    }

    fn rows(&self) -> &Vec<Vec<f64>> {
        match self {
            CoefficientSpec::Constant { matrix } => matrix,
            CoefficientSpec::SmoothPerturbation { base, .. } => base,
        }
    }

    pub fn resolve(&self, dim: usize, half_width: f64) -> Result<Coefficient> {
        let rows = self.rows();
        if rows.len() != dim {
            return Err(Error::Validation(format!(
                "coefficient matrix has {} rows, expected d = {dim}",
                rows.len()
            )));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Validation("coefficient matrix rows must have equal, nonzero length".into()));
        }
        let base: Vec<f64> = rows.iter().flatten().copied().collect();
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("coefficient entries must be finite".into()));
        }
        let (amplitude, wavenumber, frequency) = match self {
            CoefficientSpec::Constant { .. } => (0.0, 0.0, 0.0),
            CoefficientSpec::SmoothPerturbation {
                amplitude,
                mode,
                frequency,
                ..
            } => {
                if !(0.0..1.0).contains(amplitude) {
                    return Err(Error::Validation(format!(
                        "modulation amplitude must lie in [0, 1), got {amplitude}"
                    )));
                }
                if !frequency.is_finite() {
                    return Err(Error::Validation("modulation frequency must be finite".into()));
                }
                (*amplitude, PI * f64::from(*mode) / half_width, *frequency)
            }
        };
        Ok(Coefficient {
            dim,
            cols,
            base,
            amplitude,
            wavenumber,
            frequency,
        })
    }
}

/// A resolved coefficient field, stored row-major `d × m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    dim: usize,
    cols: usize,
    base: Vec<f64>,
    amplitude: f64,
    wavenumber: f64,
    frequency: f64,
}

impl Coefficient {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of noise components `m` (or `m̃`).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Modulation depth `ε` (0 for constant coefficients).
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn is_zero(&self) -> bool {
        self.base.iter().all(|v| *v == 0.0)
    }

    /// The constant reference matrix (the unmodulated base).
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Scalar modulation `s(t, x)` with `σ(t, x) = s(t, x) · base`.
    #[inline]
    pub fn modulation(&self, t: f64, x: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            1.0
        } else {
            let phase: f64 = x.iter().sum::<f64>() * self.wavenumber + self.frequency * t;
            1.0 + self.amplitude * phase.sin()
        }
    }

    /// Writes `σ(t, x)` row-major into `out` (length `d·m`).
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let s = self.modulation(t, x);
        for (o, b) in out.iter_mut().zip(&self.base) {
            *o = s * b;
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.cols];
        self.eval_into(t, x, &mut out);
        out
    }

    /// `(σσ^T)(t, x)` row-major `d × d`.
    pub fn outer(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s = self.modulation(t, x);
        let mut out = self.base_outer();
        for v in &mut out {
            *v *= s * s;
        }
        out
    }

    /// `base · base^T`.
    pub fn base_outer(&self) -> Vec<f64> {
        let (d, m) = (self.dim, self.cols);
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..m).map(|l| self.base[i * m + l] * self.base[j * m + l]).sum();
            }
        }
        out
    }

    /// Lower bound `δ` on the smallest eigenvalue of `σσ^T` over all
    /// `(t, x)`: `(1 - ε)² λ_min(base base^T)`.
    pub fn ellipticity_floor(&self) -> f64 {
        let a = self.base_outer();
        let lambda_min = match self.dim {
            1 => a[0],
            2 => {
                let (p, q, r) = (a[0], a[1], a[3]);
                let mean = 0.5 * (p + r);
                let disc = (0.25 * (p - r) * (p - r) + q * q).sqrt();
                mean - disc
            }
            _ => unreachable!("dimension validated to 1 or 2"),
        };
        let s = 1.0 - self.amplitude;
        (s * s * lambda_min).max(0.0)
    }

    /// `sup |∂^β σ|` for `|β| ≤ 4`: the modulation contributes at most
    /// `ε (ω√d)^k` to the k-th derivative.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        let max_entry = self.base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if order == 0 {
            max_entry * (1.0 + self.amplitude)
        } else {
            max_entry * self.amplitude * (self.wavenumber * (self.dim as f64).sqrt()).powi(order as i32)
        }
    }
}
