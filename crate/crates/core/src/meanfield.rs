//! Spectral solver for the stochastic Fokker–Planck equation
//!
//! `dρ = ∇·((k*ρ)ρ) dt − ∇·(νρ dW) + ½ ∂_i∂_j((σσ^T + νν^T)_{ij} ρ) dt`
//!
//! on the periodic box. One step is `ρ̂' = D · S · (ρ̂ + Ê)`:
//!
//! * `D = exp(-½ ξ^T A ξ Δt)` integrates the constant part `A` of the
//!   second-order operator exactly. `A` dominates the full diffusion matrix
//!   so the explicit remainder is non-positive and the step is stable for
//!   any `Δt`.
//! * `S = exp(-i ξ·ν₀ΔW)` is the exact common-noise shift by the constant
//!   part `ν₀` of `ν`; it carries the `½ν₀ν₀^T` Itô correction.
//! * `Ê` collects the interaction flux, the transport by `ν − ν₀` and the
//!   second-order remainder, all evaluated at the left point and dealiased
//!   with the 2/3 rule.
//!
//! For constant `σ`, `ν` and `k = 0` the step is exact.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::particles::CommonNoisePath;
use crate::scenario::{Coefficient, Kernel, Scenario, TestFunction};

const NEGATIVITY_ABORT: f64 = 0.1;
const MASS_TOLERANCE: f64 = 1e-10;

/// Grid values of `ρ_t` (probability density, mass `h^d Σ ρ_j = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub t: f64,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(t: f64, values: Vec<f64>) -> Self {
        Self { t, values }
    }

    pub fn initial(scenario: &Scenario) -> Result<Self> {
        Ok(Self::new(0.0, scenario.rho0.grid_values(&scenario.grid)?))
    }

    pub fn mass(&self, grid: &Grid) -> f64 {
        self.values.iter().sum::<f64>() * grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spectral coefficients (unnormalized DFT, FFT ordering).
    pub fn spectrum(&self, grid: &Grid) -> Vec<Complex64> {
        grid.forward(&self.values)
    }

    /// Grid L² norm `(h^d Σ f_j²)^{1/2}`.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt()
    }
}

/// `⟨φ, ρ⟩` by uniform-grid quadrature.
pub fn pair_with(grid: &Grid, field: &DensityField, phi: impl Fn(&[f64]) -> f64) -> f64 {
    pair_values(grid, &field.values, phi)
}

pub(crate) fn pair_values(grid: &Grid, values: &[f64], phi: impl Fn(&[f64]) -> f64) -> f64 {
    let mut x = [0.0; 2];
    let d = grid.dim();
    let mut acc = 0.0;
    for (flat, v) in values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        grid.node(flat, &mut x[..d]);
        acc += phi(&x[..d]) * v;
    }
    acc * grid.cell_volume()
}

/// FFT of the kernel tabulated at minimal-image displacements.
#[derive(Clone, Debug)]
pub struct SpectralKernel {
    dim: usize,
    components: Vec<Vec<Complex64>>,
    zero: bool,
}

impl SpectralKernel {
    pub fn new(kernel: &Kernel, grid: &Grid) -> Self {
        let d = grid.dim();
        let h = grid.spacing();
        let n = grid.len();
        let zero = kernel.is_zero();
        let mut components = Vec::new();
        if !zero {
            let mut tables = vec![vec![0.0; n]; d];
            let mut x = [0.0; 2];
            let mut k = [0.0; 2];
            for flat in 0..n {
                let idx = grid.unflatten(flat);
                for a in 0..d {
                    x[a] = grid.mode(idx[a]) as f64 * h;
                }
                kernel.eval_into(&x[..d], &mut k[..d]);
                for a in 0..d {
                    tables[a][flat] = k[a];
                }
            }
            let vol = grid.cell_volume();
            components = tables
                .iter()
                .map(|t| grid.forward(t).into_iter().map(|c| c * vol).collect())
                .collect();
        }
        Self { dim: d, components, zero }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// `(k * ρ)_a` on the grid from the spectrum of `ρ`.
    pub fn apply(&self, grid: &Grid, rho_hat: &[Complex64]) -> Vec<Vec<f64>> {
        if self.zero {
            return vec![vec![0.0; grid.len()]; self.dim];
        }
        self.components
            .iter()
            .map(|kh| {
                let prod: Vec<Complex64> = kh.iter().zip(rho_hat).map(|(a, b)| a * b).collect();
                grid.inverse(prod).0
            })
            .collect()
    }
}

/// Periodic convolution `k * ρ` on the grid, one vector per component.
pub fn convolve(kernel: &Kernel, grid: &Grid, values: &[f64]) -> Vec<Vec<f64>> {
    SpectralKernel::new(kernel, grid).apply(grid, &grid.forward(values))
}

/// Diagnostics of a single step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub mass_drift: f64,
    pub renormalized: bool,
    pub imaginary_residue: f64,
    /// `min ρ / max ρ` after the step (negative on undershoot).
    pub min_ratio: f64,
}

/// The spectral stepper for a fixed set of coefficients.
#[derive(Clone, Debug)]
pub struct FpSolver {
    grid: Grid,
    kernel: SpectralKernel,
    sigma: Coefficient,
    nu: Coefficient,
    /// Implicit diffusion matrix `A` (row-major d×d).
    implicit: Vec<f64>,
    sigma_outer: Vec<f64>,
    nu_outer: Vec<f64>,
    /// `ξ^T A ξ`, `ξ^T Σ_b ξ`, `ξ^T N_b ξ` per spectral index.
    quad_implicit: Vec<f64>,
    quad_sigma: Vec<f64>,
    quad_nu: Vec<f64>,
    keep: Vec<bool>,
    nyquist: Vec<bool>,
}

fn quad_form(m: &[f64], k: &[f64; 2], d: usize) -> f64 {
    let mut acc = 0.0;
    for a in 0..d {
        for b in 0..d {
            acc += k[a] * m[a * d + b] * k[b];
        }
    }
    acc
}

impl FpSolver {
    pub fn new(grid: &Grid, kernel: &Kernel, sigma: &Coefficient, nu: &Coefficient) -> Self {
        let d = grid.dim();
        let sigma_outer = sigma.base_outer();
        let nu_outer = nu.base_outer();
        let es = sigma.amplitude();
        let en = nu.amplitude();
        let implicit: Vec<f64> = sigma_outer
            .iter()
            .zip(&nu_outer)
            .map(|(s, n)| (1.0 + es) * (1.0 + es) * s + en * en * n)
            .collect();
        let n = grid.len();
        let mut quad_implicit = Vec::with_capacity(n);
        let mut quad_sigma = Vec::with_capacity(n);
        let mut quad_nu = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        let mut nyquist = Vec::with_capacity(n);
        for flat in 0..n {
            let k = grid.wavevector(flat);
            quad_implicit.push(quad_form(&implicit, &k, d));
            quad_sigma.push(quad_form(&sigma_outer, &k, d));
            quad_nu.push(quad_form(&nu_outer, &k, d));
            keep.push(grid.dealias_keep(flat));
            nyquist.push((0..d).any(|a| grid.is_nyquist(flat, a)));
        }
        Self {
            grid: grid.clone(),
            kernel: SpectralKernel::new(kernel, grid),
            sigma: sigma.clone(),
            nu: nu.clone(),
            implicit,
            sigma_outer,
            nu_outer,
            quad_implicit,
            quad_sigma,
            quad_nu,
            keep,
            nyquist,
        }
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self::new(&scenario.grid, &scenario.kernel, &scenario.sigma, &scenario.nu)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    /// The implicitly integrated diffusion matrix `A`.
    pub fn implicit_matrix(&self) -> &[f64] {
        &self.implicit
    }

    /// Per-mode implicit decay factor `exp(-½ ξ^T A ξ Δt)`.
    pub fn decay_factor(&self, flat: usize, dt: f64) -> f64 {
        (-0.5 * self.quad_implicit[flat] * dt).exp()
    }

    fn needs_explicit(&self) -> bool {
        !self.kernel.is_zero() || !self.sigma.is_constant() || !self.nu.is_constant()
    }

    /// Explicit increment `Ê` (dealiased), evaluated at time `t` with
    /// spectrum `rho_hat` and grid values `rho`.
    ///
    /// With `linearized = Some((ρ, k*ρ))` the interaction flux is the
    /// linearization `(k*ρ)u + (k*u)ρ` around `ρ` instead of `(k*u)u`.
    pub(crate) fn explicit_increment(
        &self,
        t: f64,
        rho: &[f64],
        rho_hat: &[Complex64],
        dt: f64,
        dw: &[f64],
        linearized: Option<(&[f64], &[Vec<f64>])>,
    ) -> Option<Vec<Complex64>> {
        if !self.needs_explicit() {
            return None;
        }
        let grid = &self.grid;
        let d = grid.dim();
        let n = grid.len();
        let mut inc = vec![Complex64::new(0.0, 0.0); n];
        let wv: Vec<[f64; 2]> = (0..n).map(|f| grid.wavevector(f)).collect();

        if !self.kernel.is_zero() {
            let conv = self.kernel.apply(grid, rho_hat);
            for (a, ca) in conv.iter().enumerate() {
                let flux: Vec<f64> = match linearized {
                    None => ca.iter().zip(rho).map(|(c, r)| c * r * dt).collect(),
                    Some((base, base_conv)) => (0..n)
                        .map(|j| (base_conv[a][j] * rho[j] + ca[j] * base[j]) * dt)
                        .collect(),
                };
                let fh = grid.forward(&flux);
                for f in 0..n {
                    inc[f] += Complex64::new(0.0, wv[f][a]) * fh[f];
                }
            }
        }

        let vary_sigma = !self.sigma.is_constant();
        let vary_nu = !self.nu.is_constant();
        if vary_sigma || vary_nu {
            let es = self.sigma.amplitude();
            let en = self.nu.amplitude();
            let mut x = [0.0; 2];
            let mut u_sigma = vec![0.0; if vary_sigma { n } else { 0 }];
            let mut u_nu = vec![0.0; if vary_nu { n } else { 0 }];
            let mut u_tr = vec![0.0; if vary_nu { n } else { 0 }];
            for flat in 0..n {
                grid.node(flat, &mut x[..d]);
                if vary_sigma {
                    let s = self.sigma.modulation(t, &x[..d]);
                    u_sigma[flat] = (s * s - (1.0 + es) * (1.0 + es)) * rho[flat];
                }
                if vary_nu {
                    let s1 = self.nu.modulation(t, &x[..d]) - 1.0;
                    u_nu[flat] = (s1 * s1 - en * en) * rho[flat];
                    u_tr[flat] = s1 * rho[flat];
                }
            }
            if vary_sigma {
                let uh = grid.forward(&u_sigma);
                for f in 0..n {
                    inc[f] -= 0.5 * dt * self.quad_sigma[f] * uh[f];
                }
            }
            if vary_nu {
                let uh = grid.forward(&u_nu);
                for f in 0..n {
                    inc[f] -= 0.5 * dt * self.quad_nu[f] * uh[f];
                }
                let shift = self.base_shift(dw);
                let th = grid.forward(&u_tr);
                for f in 0..n {
                    let xs: f64 = (0..d).map(|a| wv[f][a] * shift[a]).sum();
                    inc[f] -= Complex64::new(0.0, xs) * th[f];
                }
            }
        }
        for f in 0..n {
            if !self.keep[f] {
                inc[f] = Complex64::new(0.0, 0.0);
            }
        }
        Some(inc)
    }

    /// `ν₀ ΔW` (d-vector).
    fn base_shift(&self, dw: &[f64]) -> [f64; 2] {
        let d = self.grid.dim();
        let m = self.nu.cols();
        let b = self.nu.base();
        let mut out = [0.0; 2];
        for (a, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..m).map(|l| b[a * m + l] * dw[l]).sum();
        }
        out
    }

    /// Applies `D · S` in place.
    pub(crate) fn propagate(&self, spec: &mut [Complex64], dt: f64, dw: &[f64]) {
        let d = self.grid.dim();
        let shift = self.base_shift(dw);
        let shifting = shift[..d].iter().any(|s| *s != 0.0);
        for (f, c) in spec.iter_mut().enumerate() {
            if self.nyquist[f] {
                *c = Complex64::new(0.0, 0.0);
                continue;
            }
            let mut factor = Complex64::new((-0.5 * self.quad_implicit[f] * dt).exp(), 0.0);
            if shifting {
                let k = self.grid.wavevector(f);
                let phase: f64 = (0..d).map(|a| k[a] * shift[a]).sum();
                factor *= Complex64::from_polar(1.0, -phase);
            }
            *c *= factor;
        }
    }

    /// One step from `t` to `t + dt` with common-noise increment `dw`.
    pub fn step(&self, field: &DensityField, dt: f64, dw: &[f64]) -> Result<(DensityField, StepReport)> {
        if dw.len() != self.nu.cols() {
            return Err(Error::Shape(format!(
                "common-noise increment has {} components, expected {}",
                dw.len(),
                self.nu.cols()
            )));
        }
        let grid = &self.grid;
        let mass_before = field.mass(grid);
        let mut spec = grid.forward(&field.values);
        if let Some(inc) = self.explicit_increment(field.t, &field.values, &spec, dt, dw, None) {
            for (s, e) in spec.iter_mut().zip(inc) {
                *s += e;
            }
        }
        self.propagate(&mut spec, dt, dw);
        let (mut values, residue) = grid.inverse(spec);
        let t = field.t + dt;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(t, "non-finite density; reduce the time step"));
        }
        let mut out = DensityField::new(t, values.clone());
        let max = out.max();
        let min = out.min();
        if min < -NEGATIVITY_ABORT * max {
            return Err(Error::numerical(
                t,
                format!(
                    "stability failure: min {min:.3e} below -{NEGATIVITY_ABORT} x max {max:.3e}; try dt <= {:.3e}",
                    dt / 2.0
                ),
            ));
        }
        let mass = out.mass(grid);
        let drift = (mass - mass_before).abs();
        let mut renormalized = false;
        if drift > MASS_TOLERANCE {
            let scale = mass_before / mass;
            for v in &mut values {
                *v *= scale;
            }
            out.values = values;
            renormalized = true;
        }
        let scale = max.abs().max(f64::MIN_POSITIVE);
        Ok((
            out,
            StepReport {
                mass_drift: drift,
                renormalized,
                imaginary_residue: residue / scale,
                min_ratio: min / scale,
            },
        ))
    }

    /// Explicit part only: the remaining second-order operator is
    /// `½∂∂(Bρ)` with `B = σσ^T + ν₁ν₁^T − A`, `ν₁ = ν − ν₀`.
    pub fn remainder_matrix(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s = self.sigma.modulation(t, x);
        let s1 = self.nu.modulation(t, x) - 1.0;
        self.sigma_outer
            .iter()
            .zip(&self.nu_outer)
            .zip(&self.implicit)
            .map(|((so, no), a)| s * s * so + s1 * s1 * no - a)
            .collect()
    }
}

/// Solution of the Fokker–Planck equation along one common-noise path,
/// with the per-step pairings needed by the martingale ledger.
#[derive(Clone, Debug)]
pub struct MeanFieldPath {
    pub grid: Grid,
    /// Snapshots at steps `0, stride, 2·stride, …` and the final step.
    pub snapshots: Vec<DensityField>,
    pub snapshot_steps: Vec<usize>,
    /// `⟨φ, ρ_{t_n}⟩` indexed `[n][fn]`, `n = 0..=n_steps`.
    pub phi_pairings: Vec<Vec<f64>>,
    /// `⟨(ν^T∇φ)_l, ρ_{t_n}⟩` indexed `[n][fn][l]`, `n = 0..n_steps`.
    pub nu_grad_pairings: Vec<Vec<Vec<f64>>>,
    /// `Σ_l ⟨(σ^T∇φ_f)_l (σ^T∇φ_g)_l, ρ_{t_n}⟩` indexed `[n][f][g]`,
    /// `n = 0..n_steps`.
    pub sigma_cov_pairings: Vec<Vec<Vec<f64>>>,
    pub dt: f64,
    pub renormalizations: usize,
    pub worst_min_ratio: f64,
    pub worst_imaginary_residue: f64,
}

impl MeanFieldPath {
    pub fn final_field(&self) -> &DensityField {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    /// Left-point quadrature of `Σ_l ∫_0^{t_n} ⟨(σ^T∇φ_f)_l (σ^T∇φ_g)_l, ρ_u⟩ du`.
    pub fn predicted_covariance(&self, f: usize, g: usize, n: usize) -> f64 {
        self.sigma_cov_pairings[..n].iter().map(|p| p[f][g]).sum::<f64>() * self.dt
    }

    /// The snapshot stored at step `n`, if any.
    pub fn at_step(&self, n: usize) -> Option<&DensityField> {
        self.snapshot_steps.iter().position(|s| *s == n).map(|i| &self.snapshots[i])
    }
}

fn nu_grad_pairing(grid: &Grid, nu: &Coefficient, t: f64, values: &[f64], f: &TestFunction) -> Vec<f64> {
    let d = grid.dim();
    let m = nu.cols();
    let mut out = vec![0.0; m];
    if nu.is_zero() {
        return out;
    }
    let mut x = [0.0; 2];
    let mut g = [0.0; 2];
    let mut coef = vec![0.0; d * m];
    for (flat, v) in values.iter().enumerate() {
        grid.node(flat, &mut x[..d]);
        f.gradient_into(&x[..d], &mut g[..d]);
        if g[..d].iter().all(|c| *c == 0.0) {
            continue;
        }
        nu.eval_into(t, &x[..d], &mut coef);
        for (l, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..d {
                s += coef[a * m + l] * g[a];
            }
            *o += s * v;
        }
    }
    let vol = grid.cell_volume();
    out.iter_mut().for_each(|o| *o *= vol);
    out
}

fn sigma_cov_pairing(grid: &Grid, sigma: &Coefficient, t: f64, values: &[f64], fns: &[TestFunction]) -> Vec<Vec<f64>> {
    let k = fns.len();
    let mut out = vec![vec![0.0; k]; k];
    if sigma.is_zero() || k == 0 {
        return out;
    }
    let d = grid.dim();
    let m = sigma.cols();
    let mut x = [0.0; 2];
    let mut g = [0.0; 2];
    let mut coef = vec![0.0; d * m];
    let mut a = vec![0.0; k * m];
    for (flat, v) in values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        grid.node(flat, &mut x[..d]);
        sigma.eval_into(t, &x[..d], &mut coef);
        for (f, tf) in fns.iter().enumerate() {
            tf.gradient_into(&x[..d], &mut g[..d]);
            for l in 0..m {
                a[f * m + l] = (0..d).map(|q| coef[q * m + l] * g[q]).sum();
            }
        }
        for f in 0..k {
            for h in f..k {
                let c: f64 = (0..m).map(|l| a[f * m + l] * a[h * m + l]).sum();
                out[f][h] += c * v;
            }
        }
    }
    let vol = grid.cell_volume();
    for f in 0..k {
        for h in f..k {
            out[f][h] *= vol;
            out[h][f] = out[f][h];
        }
    }
    out
}

/// Solves along `path` from the initial density, storing snapshots every
/// `stride` steps and the pairings for every test function in `fns`.
pub fn solve_path(
    scenario: &Scenario,
    solver: &FpSolver,
    path: &CommonNoisePath,
    fns: &[TestFunction],
    stride: usize,
) -> Result<MeanFieldPath> {
    let grid = &scenario.grid;
    let dt = path.dt();
    let stride = stride.max(1);
    let mut field = DensityField::initial(scenario)?;
    let n_steps = path.n_steps();
    let mut out = MeanFieldPath {
        grid: grid.clone(),
        snapshots: vec![field.clone()],
        snapshot_steps: vec![0],
        phi_pairings: Vec::with_capacity(n_steps + 1),
        nu_grad_pairings: Vec::with_capacity(n_steps),
        sigma_cov_pairings: Vec::with_capacity(n_steps),
        dt,
        renormalizations: 0,
        worst_min_ratio: 0.0,
        worst_imaginary_residue: 0.0,
    };
    for n in 0..n_steps {
        out.phi_pairings
            .push(fns.iter().map(|f| pair_with(grid, &field, |x| f.value(x))).collect());
        out.nu_grad_pairings.push(
            fns.iter()
                .map(|f| nu_grad_pairing(grid, &scenario.nu, field.t, &field.values, f))
                .collect(),
        );
        out.sigma_cov_pairings
            .push(sigma_cov_pairing(grid, &scenario.sigma, field.t, &field.values, fns));
        let (next, report) = solver.step(&field, dt, path.increment(n))?;
        out.renormalizations += usize::from(report.renormalized);
        out.worst_min_ratio = out.worst_min_ratio.min(report.min_ratio);
        out.worst_imaginary_residue = out.worst_imaginary_residue.max(report.imaginary_residue);
        field = next;
        if (n + 1) % stride == 0 || n + 1 == n_steps {
            out.snapshots.push(field.clone());
            out.snapshot_steps.push(n + 1);
        }
    }
    out.phi_pairings
        .push(fns.iter().map(|f| pair_with(grid, &field, |x| f.value(x))).collect());
    Ok(out)
}

const FIELD_MAGIC: &[u8; 8] = b"FLCTRHO1";

/// Writes a field as little-endian binary: magic `FLCTRHO1`, `u32 d`,
/// `u32 M`, `f64 L`, `f64 t`, then `M^d` `f64` values row-major.
pub fn write_field(path: &Path, grid: &Grid, field: &DensityField) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * field.values.len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.size() as u32).to_le_bytes());
    buf.extend_from_slice(&grid.half_width().to_le_bytes());
    buf.extend_from_slice(&field.t.to_le_bytes());
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a field written by [`write_field`].
pub fn read_field(path: &Path) -> Result<(Grid, DensityField)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = || Error::Integrity(format!("{} is not a density field dump", path.display()));
    if buf.len() < 32 || &buf[..8] != FIELD_MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let (d, m) = (u32_at(8), u32_at(12));
    let grid = Grid::new(d, m, f64_at(16))?;
    let t = f64_at(24);
    if buf.len() != 32 + 8 * grid.len() {
        return Err(bad());
    }
    let values = (0..grid.len()).map(|i| f64_at(32 + 8 * i)).collect();
    Ok((grid, DensityField::new(t, values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CoefficientSpec, KernelSpec};
    use std::f64::consts::PI;

    fn gaussian_values(grid: &Grid, mean: f64, var: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let x = grid.coord(i) - mean;
                (-(x * x) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
            })
            .collect()
    }

    fn coeff(v: f64) -> Coefficient {
        CoefficientSpec::constant_diagonal(1, v).resolve(1, 8.0).unwrap()
    }

    #[test]
    fn heat_decay_factor_is_exact() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let solver = FpSolver::new(&grid, &KernelSpec::Zero.resolve(1).unwrap(), &coeff(1.0), &coeff(0.0));
        let dt = 0.01;
        for f in 0..64 {
            let xi = grid.wavenumber(f);
            let expect = (-0.5 * xi * xi * dt).exp();
            assert!((solver.decay_factor(f, dt) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_convolution_matches_closed_form() {
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let kernel = KernelSpec::Gaussian {
            amplitude: 1.0,
            width: 0.7,
            direction: None,
        }
        .resolve(1)
        .unwrap();
        let rho = gaussian_values(&grid, 0.3, 0.5);
        let conv = convolve(&kernel, &grid, &rho);
        // A e^{-x²/2w²} * N(m, v) = A w / sqrt(w² + v) e^{-(x-m)²/2(w²+v)}
        let (w2, v): (f64, f64) = (0.49, 0.5);
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.coord(i) - 0.3;
            let exact = 0.7 / (w2 + v).sqrt() * (-(x * x) / (2.0 * (w2 + v))).exp();
            worst = worst.max((conv[0][i] - exact).abs());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn convolution_with_spike_reproduces_kernel() {
        let grid = Grid::new(1, 128, 8.0).unwrap();
        let kernel = KernelSpec::GaussianGradient {
            amplitude: 1.0,
            width: 1.0,
        }
        .resolve(1)
        .unwrap();
        let mut spike = vec![0.0; 128];
        let j0 = 70;
        spike[j0] = 1.0 / grid.spacing();
        let conv = convolve(&kernel, &grid, &spike);
        for i in 0..128 {
            let dx = grid.minimal_image(grid.coord(i) - grid.coord(j0));
            assert!((conv[0][i] - kernel.eval(&[dx])[0]).abs() < 1e-12);
        }
        assert!(convolve(&KernelSpec::Zero.resolve(1).unwrap(), &grid, &spike)[0]
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn constant_coefficients_transport_exactly() {
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let solver = FpSolver::new(&grid, &KernelSpec::Zero.resolve(1).unwrap(), &coeff(0.6), &coeff(0.8));
        let mut field = DensityField::new(0.0, gaussian_values(&grid, 0.0, 0.25));
        let dws = [0.1, -0.3, 0.05, 0.2, -0.15];
        let dt = 0.1;
        for dw in dws {
            field = solver.step(&field, dt, &[dw]).unwrap().0;
        }
        let w: f64 = dws.iter().sum();
        let exact = gaussian_values(&grid, 0.8 * w, 0.25 + 0.36 * 0.5);
        let err: f64 = field.values.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-10, "{}", err / norm);
    }

    #[test]
    fn mass_conserved_with_interaction_and_variable_coefficients() {
        let grid = Grid::new(1, 128, 8.0).unwrap();
        let kernel = KernelSpec::GaussianGradient {
            amplitude: 0.5,
            width: 1.0,
        }
        .resolve(1)
        .unwrap();
        let sigma = CoefficientSpec::SmoothPerturbation {
            base: vec![vec![0.8]],
            amplitude: 0.3,
            mode: 2,
            frequency: 1.0,
        }
        .resolve(1, 8.0)
        .unwrap();
        let nu = CoefficientSpec::SmoothPerturbation {
            base: vec![vec![0.5]],
            amplitude: 0.2,
            mode: 1,
            frequency: 0.0,
        }
        .resolve(1, 8.0)
        .unwrap();
        let solver = FpSolver::new(&grid, &kernel, &sigma, &nu);
        let mut field = DensityField::new(0.0, gaussian_values(&grid, 0.0, 1.0));
        let m0 = field.mass(&grid);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let dt = 1e-3;
        for _ in 0..1000 {
            let dw: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let (next, rep) = solver.step(&field, dt, &[dw * dt.sqrt()]).unwrap();
            assert!(!rep.renormalized);
            field = next;
        }
        assert!((field.mass(&grid) - m0).abs() < 1e-8);
    }

    #[test]
    fn pairing_quadrature() {
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let field = DensityField::new(0.0, gaussian_values(&grid, 0.0, 1.0));
        let odd = TestFunction::new(
            "odd",
            crate::scenario::TestFunctionSpec::WindowedMonomial {
                center: vec![0.0],
                radius: 6.0,
                axis: 0,
                power: 1,
            },
        );
        assert!(pair_with(&grid, &field, |x| odd.value(x)).abs() < 1e-10);
        assert!((pair_with(&grid, &field, |_| 1.0) - 1.0).abs() < 1e-10);
        // x² times a wide bump: oracle is a fine Simpson rule on [-7.9, 7.9]
        let bump = TestFunction::bump("b", vec![0.0], 7.9);
        let got = pair_with(&grid, &field, |x| x[0] * x[0] * bump.value(x));
        let n = 20000;
        let h = 15.8 / n as f64;
        let mut simpson = 0.0;
        for i in 0..=n {
            let x = -7.9 + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            simpson += w * x * x * bump.value(&[x]) * (-(x * x) / 2.0).exp() / (2.0 * PI).sqrt();
        }
        simpson *= h / 3.0;
        assert!((got - simpson).abs() < 1e-8, "{got} {simpson}");
    }

    #[test]
    fn field_dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.bin");
        let grid = Grid::new(2, 8, 3.0).unwrap();
        let field = DensityField::new(0.25, (0..64).map(|i| i as f64 * 0.5).collect());
        write_field(&path, &grid, &field).unwrap();
        let (g2, f2) = read_field(&path).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(f2, field);
        std::fs::write(&path, b"junk").unwrap();
        assert!(read_field(&path).is_err());
    }
}
