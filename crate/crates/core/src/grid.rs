//! Uniform periodic grid on `[-L, L)^d` (d = 1 or 2) with FFT helpers.
//!
//! Values are stored row-major with the last axis fastest. Node `j` along
//! an axis sits at `-L + j h`, `h = 2L / M`. Spectral arrays use FFT
//! ordering; the wavenumber of index `n` is `π n / L` with `n` mapped to
//! `[-M/2, M/2)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    m: usize,
    half_width: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("m", &self.m)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.m == other.m && self.half_width == other.half_width
    }
}

impl Grid {
    pub fn new(dim: usize, m: usize, half_width: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Validation(format!("dimension must be 1 or 2, got {dim}")));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::Validation(format!("grid size must be a power of two >= 4, got {m}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Validation("box half-width must be positive".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            m,
            half_width,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Total number of nodes `M^d`.
    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Highest resolved angular frequency per axis, `π / h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.m, flat % self.m]
        }
    }

    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let idx = self.unflatten(flat);
        for (a, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.coord(idx[a]);
        }
    }

    /// Index of the node nearest to `x` (periodically).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let mut flat = 0;
        for xa in x.iter().take(self.dim) {
            let i = ((xa + self.half_width) / h).round() as i64;
            let i = i.rem_euclid(self.m as i64) as usize;
            flat = flat * self.m + i;
        }
        flat
    }

    /// Signed mode number of FFT index `i`.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        PI * self.mode(i) as f64 / self.half_width
    }

    /// Wavevector of a flat spectral index.
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        let idx = self.unflatten(flat);
        let mut k = [0.0; 2];
        for a in 0..self.dim {
            k[a] = self.wavenumber(idx[a]);
        }
        k
    }

    /// Whether the flat spectral index sits on a Nyquist mode along `axis`.
    pub fn is_nyquist(&self, flat: usize, axis: usize) -> bool {
        self.unflatten(flat)[axis] == self.m / 2
    }

    /// Two-thirds dealiasing mask: keep modes with `|n| < M/3` on all axes.
    pub fn dealias_keep(&self, flat: usize) -> bool {
        let idx = self.unflatten(flat);
        (0..self.dim).all(|a| (3 * self.mode(idx[a]).unsigned_abs() as usize) < self.m)
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        if self.dim == 1 {
            plan.process(data);
            return;
        }
        plan.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for c in 0..m {
            for r in 0..m {
                col[r] = data[r * m + c];
            }
            plan.process(&mut col);
            for r in 0..m {
                data[r * m + c] = col[r];
            }
        }
    }

    /// Unnormalized forward DFT `ĉ_n = Σ_j f_j e^{-2πi n j / M}`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    pub fn forward_complex(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut data, &self.forward);
        data
    }

    /// Normalized inverse DFT. Returns the real part and the largest
    /// absolute imaginary residue.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> (Vec<f64>, f64) {
        self.transform(&mut spectrum, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        let mut residue = 0.0f64;
        let values = spectrum
            .iter()
            .map(|c| {
                residue = residue.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (values, residue)
    }

    /// Phase factor that converts DFT coefficients (node origin at `-L`)
    /// into Fourier integrals over the box: `e^{-i ξ·(-L)}`.
    pub fn origin_phase(&self, xi: &[f64]) -> Complex64 {
        let arg: f64 = xi.iter().take(self.dim).map(|k| k * self.half_width).sum();
        Complex64::from_polar(1.0, arg)
    }

    /// Cloud-in-cell deposit of the empirical measure `(1/N) Σ δ_{X_i}` as
    /// a grid density with unit mass.
    pub fn deposit_cic(&self, positions: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let m = self.m as i64;
        let h = self.spacing();
        let n = positions.len() / d;
        let mut out = vec![0.0; self.len()];
        if n == 0 {
            return out;
        }
        let w = 1.0 / (n as f64 * self.cell_volume());
        for x in positions.chunks_exact(d) {
            let mut base = [0i64; 2];
            let mut frac = [0.0; 2];
            for a in 0..d {
                let s = (wrap_position(x[a], self.half_width) + self.half_width) / h;
                let f = s.floor();
                base[a] = f as i64;
                frac[a] = s - f;
            }
            let corners = 1usize << d;
            for c in 0..corners {
                let mut flat = 0usize;
                let mut weight = w;
                for a in 0..d {
                    let up = (c >> a) & 1 == 1;
                    let i = (base[a] + i64::from(up)).rem_euclid(m) as usize;
                    flat = flat * self.m + i;
                    weight *= if up { frac[a] } else { 1.0 - frac[a] };
                }
                out[flat] += weight;
            }
        }
        out
    }

    /// Periodic multilinear interpolation of node values at `x`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let d = self.dim;
        let m = self.m as i64;
        let h = self.spacing();
        let mut base = [0i64; 2];
        let mut frac = [0.0; 2];
        for a in 0..d {
            let s = (wrap_position(x[a], self.half_width) + self.half_width) / h;
            let f = s.floor();
            base[a] = f as i64;
            frac[a] = s - f;
        }
        let mut acc = 0.0;
        for c in 0..(1usize << d) {
            let mut flat = 0usize;
            let mut weight = 1.0;
            for a in 0..d {
                let up = (c >> a) & 1 == 1;
                let i = (base[a] + i64::from(up)).rem_euclid(m) as usize;
                flat = flat * self.m + i;
                weight *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            acc += weight * values[flat];
        }
        acc
    }

    /// Minimal-image displacement along one axis, in `[-L, L)`.
    #[inline]
    pub fn minimal_image(&self, dx: f64) -> f64 {
        wrap_displacement(dx, self.half_width)
    }
}

/// Maps a displacement into `[-L, L)`.
#[inline]
pub fn wrap_displacement(dx: f64, half_width: f64) -> f64 {
    let period = 2.0 * half_width;
    // displacements of wrapped positions need at most one shift
    if dx >= half_width {
        if dx - period < half_width {
            return dx - period;
        }
    } else if dx >= -half_width {
        return dx;
    } else if dx + period >= -half_width {
        return dx + period;
    }
    let mut y = dx - period * (dx / period).round();
    if y >= half_width {
        y -= period;
    } else if y < -half_width {
        y += period;
    }
    y
}

/// Maps a position into `[-L, L)`.
#[inline]
pub fn wrap_position(x: f64, half_width: f64) -> f64 {
    let period = 2.0 * half_width;
    let mut y = (x + half_width).rem_euclid(period) - half_width;
    if y >= half_width {
        y -= period;
    }
    y
}
