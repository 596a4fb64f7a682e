//! Fourier transforms of empirical measures and grid fields, and the
//! Bessel-weighted norms
//!
//! `‖f‖²_{H^{-α}} = ∫ (1 + |ξ|²)^{-α} |F[f](ξ)|² dξ`,
//! `F[μ](ξ) = (2π)^{-d/2} ∫ e^{-iξ·x} dμ(x)`,
//!
//! evaluated by trapezoidal quadrature on a symmetric frequency lattice with
//! an analytic bound for the part of the integral outside the lattice.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_displacement, Grid};
use crate::meanfield::SpectralKernel;
use crate::particles::pairwise_drift;
use crate::scenario::{Kernel, ScenarioConfig};

/// Nodes `kΔ`, `k ∈ [-K, K]^d`, `Δ = Ξ / K`, with trapezoid weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyLattice {
    dim: usize,
    cutoff: f64,
    half_points: usize,
}

impl FrequencyLattice {
    /// `points` is `M_f` (even); the lattice has `M_f + 1` nodes per axis.
    pub fn new(dim: usize, cutoff: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Validation(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) || points < 2 || points % 2 != 0 {
            return Err(Error::Validation(
                "frequency lattice needs a positive cutoff and an even point count".into(),
            ));
        }
        Ok(Self {
            dim,
            cutoff,
            half_points: points / 2,
        })
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let s = &cfg.scenario;
        Self::new(s.dimension, s.frequency_cutoff, s.frequency_grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn spacing(&self) -> f64 {
        self.cutoff / self.half_points as f64
    }

    /// Nodes per axis, `M_f + 1`.
    pub fn axis_len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn len(&self) -> usize {
        self.axis_len().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_value(&self, i: usize) -> f64 {
        (i as f64 - self.half_points as f64) * self.spacing()
    }

    pub fn node(&self, flat: usize) -> [f64; 2] {
        let n = self.axis_len();
        if self.dim == 1 {
            [self.axis_value(flat), 0.0]
        } else {
            [self.axis_value(flat / n), self.axis_value(flat % n)]
        }
    }

    /// Index of `-ξ`.
    pub fn mirror(&self, flat: usize) -> usize {
        self.len() - 1 - flat
    }

    /// Trapezoid quadrature weight of a node.
    pub fn weight(&self, flat: usize) -> f64 {
        let n = self.axis_len();
        let w1 = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let h = self.spacing();
        if self.dim == 1 {
            w1(flat) * h
        } else {
            w1(flat / n) * w1(flat % n) * h * h
        }
    }

    /// `∫_{|ξ| > Ξ} |ξ|^{2g} (1 + |ξ|²)^{-α} dξ` bound; `None` when the
    /// integral diverges.
    pub fn tail_integral(&self, alpha: f64, growth: u32) -> Option<f64> {
        let g = f64::from(growth);
        let xi = self.cutoff;
        match self.dim {
            1 => {
                let p = 2.0 * alpha - 2.0 * g;
                (p > 1.0).then(|| 2.0 * xi.powf(1.0 - p) / (p - 1.0))
            }
            _ => {
                let p = alpha - g;
                (p > 1.0).then(|| PI * (1.0 + xi * xi).powf(1.0 - p) / (p - 1.0))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Particles,
    Field,
    Difference,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Particles => "particles",
            SourceTag::Field => "field",
            SourceTag::Difference => "difference",
        }
    }
}

/// `F(ξ)` on a lattice together with what is known about `|F|` off it.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSpectrum {
    pub lattice: FrequencyLattice,
    pub values: Vec<Complex64>,
    pub tag: SourceTag,
    /// Whether the source contains point masses.
    pub point_mass: bool,
    /// `|F(ξ)| ≤ bound · |ξ|^growth` for all `ξ`.
    pub bound: f64,
    pub growth: u32,
}

impl EmpiricalSpectrum {
    pub fn zeros(lattice: &FrequencyLattice, tag: SourceTag) -> Self {
        Self {
            lattice: lattice.clone(),
            values: vec![Complex64::new(0.0, 0.0); lattice.len()],
            tag,
            point_mass: false,
            bound: 0.0,
            growth: 0,
        }
    }

    pub fn at(&self, xi: &[f64]) -> Option<Complex64> {
        let h = self.lattice.spacing();
        let k = self.lattice.half_points as i64;
        let mut flat = 0usize;
        for x in xi.iter().take(self.lattice.dim) {
            let i = (x / h).round() as i64;
            if i.abs() > k || ((i as f64) * h - x).abs() > 1e-9 * h.max(1.0) {
                return None;
            }
            flat = flat * self.lattice.axis_len() + (i + k) as usize;
        }
        Some(self.values[flat])
    }

    /// `self − other` on the same lattice.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::Shape("spectra live on different frequency lattices".into()));
        }
        Ok(Self {
            lattice: self.lattice.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            tag: SourceTag::Difference,
            point_mass: self.point_mass || other.point_mass,
            bound: self.bound + other.bound,
            growth: self.growth.max(other.growth),
        })
    }

    /// `F(-ξ) = conj F(ξ)` defect.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|f| (self.values[f] - self.values[self.lattice.mirror(f)].conj()).norm())
            .fold(0.0, f64::max)
    }
}

fn fourier_constant(dim: usize) -> f64 {
    (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// `(2π)^{-d/2} Σ_j w_j e^{-iξ·x_j}` on the lattice, for real weights.
fn weighted_transform(points: &[f64], weights: &[f64], lattice: &FrequencyLattice) -> Vec<Complex64> {
    let d = lattice.dim();
    let n_ax = lattice.axis_len();
    let k = lattice.half_points;
    let c = fourier_constant(d);
    let mut out = vec![Complex64::new(0.0, 0.0); lattice.len()];
    // phases along one axis for nodes with index >= k (d = 1) or all (d = 2)
    let mut ex = vec![Complex64::new(0.0, 0.0); n_ax];
    let mut ey = vec![Complex64::new(0.0, 0.0); n_ax];
    for (x, w) in points.chunks_exact(d).zip(weights) {
        if *w == 0.0 {
            continue;
        }
        if d == 1 {
            for i in k..n_ax {
                let (s, co) = (lattice.axis_value(i) * x[0]).sin_cos();
                out[i] += Complex64::new(co, -s) * w;
            }
        } else {
            for i in 0..n_ax {
                let (s, co) = (lattice.axis_value(i) * x[0]).sin_cos();
                ex[i] = Complex64::new(co, -s) * w;
                let (s, co) = (lattice.axis_value(i) * x[1]).sin_cos();
                ey[i] = Complex64::new(co, -s);
            }
            for i in k..n_ax {
                let row = &mut out[i * n_ax..(i + 1) * n_ax];
                let a = ex[i];
                for (o, b) in row.iter_mut().zip(&ey) {
                    *o += a * b;
                }
            }
        }
    }
    let half_start = if d == 1 { k } else { k * n_ax };
    for f in half_start..out.len() {
        out[f] *= c;
    }
    for f in 0..half_start {
        out[f] = out[lattice.len() - 1 - f].conj();
    }
    out
}

/// `F(ξ) = (2π)^{-d/2} (1/N) Σ_j e^{-iξ·X_j}`.
pub fn empirical_fourier(positions: &[f64], lattice: &FrequencyLattice) -> Result<EmpiricalSpectrum> {
    let d = lattice.dim();
    let n = positions.len() / d;
    if n == 0 || positions.len() % d != 0 {
        return Err(Error::Shape("empirical transform needs at least one particle".into()));
    }
    let w = vec![1.0 / n as f64; n];
    Ok(EmpiricalSpectrum {
        lattice: lattice.clone(),
        values: weighted_transform(positions, &w, lattice),
        tag: SourceTag::Particles,
        point_mass: true,
        bound: fourier_constant(d),
        growth: 0,
    })
}

/// Quadrature transform of grid fields onto a lattice, with the
/// one-dimensional phase table cached.
#[derive(Clone, Debug)]
pub struct FieldTransform {
    grid: Grid,
    lattice: FrequencyLattice,
    /// `e^{-iξ_k x_j}` indexed `[k][j]`.
    table: Vec<Complex64>,
}

impl FieldTransform {
    pub fn new(grid: &Grid, lattice: &FrequencyLattice) -> Result<Self> {
        if grid.dim() != lattice.dim() {
            return Err(Error::Shape("grid and lattice dimensions differ".into()));
        }
        if lattice.cutoff() > grid.nyquist() * (1.0 + 1e-12) {
            return Err(Error::IncommensurateLattice(format!(
                "frequency cutoff {} exceeds the grid Nyquist frequency {:.3}",
                lattice.cutoff(),
                grid.nyquist()
            )));
        }
        let m = grid.size();
        let n_ax = lattice.axis_len();
        let mut table = Vec::with_capacity(n_ax * m);
        for k in 0..n_ax {
            let xi = lattice.axis_value(k);
            for j in 0..m {
                let (s, c) = (xi * grid.coord(j)).sin_cos();
                table.push(Complex64::new(c, -s));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            lattice: lattice.clone(),
            table,
        })
    }

    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    /// `(2π)^{-d/2} h^d Σ_j f_j e^{-iξ·x_j}`.
    pub fn apply(&self, values: &[f64]) -> Result<EmpiricalSpectrum> {
        let grid = &self.grid;
        if values.len() != grid.len() {
            return Err(Error::Shape("field size does not match the grid".into()));
        }
        let lattice = &self.lattice;
        let d = grid.dim();
        let m = grid.size();
        let n_ax = lattice.axis_len();
        let k = lattice.half_points;
        let scale = fourier_constant(d) * grid.cell_volume();
        let mut out = vec![Complex64::new(0.0, 0.0); lattice.len()];
        if d == 1 {
            for i in k..n_ax {
                let row = &self.table[i * m..(i + 1) * m];
                let s: Complex64 = row.iter().zip(values).map(|(e, v)| e * v).sum();
                out[i] = s * scale;
            }
        } else {
            // partial transform along the second axis: t[j1][k2]
            let mut t = vec![Complex64::new(0.0, 0.0); m * n_ax];
            for j1 in 0..m {
                let vrow = &values[j1 * m..(j1 + 1) * m];
                for k2 in 0..n_ax {
                    let erow = &self.table[k2 * m..(k2 + 1) * m];
                    t[j1 * n_ax + k2] = erow.iter().zip(vrow).map(|(e, v)| e * v).sum();
                }
            }
            for k1 in k..n_ax {
                let erow = &self.table[k1 * m..(k1 + 1) * m];
                for k2 in 0..n_ax {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j1 in 0..m {
                        s += erow[j1] * t[j1 * n_ax + k2];
                    }
                    out[k1 * n_ax + k2] = s * scale;
                }
            }
        }
        let half_start = if d == 1 { k } else { k * n_ax };
        for f in 0..half_start {
            out[f] = out[lattice.len() - 1 - f].conj();
        }
        let total_variation: f64 = values.iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume();
        Ok(EmpiricalSpectrum {
            lattice: lattice.clone(),
            values: out,
            tag: SourceTag::Field,
            point_mass: false,
            bound: fourier_constant(d) * total_variation,
            growth: 0,
        })
    }
}

/// Quadrature Fourier transform of a grid field.
pub fn field_fourier(grid: &Grid, values: &[f64], lattice: &FrequencyLattice) -> Result<EmpiricalSpectrum> {
    FieldTransform::new(grid, lattice)?.apply(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevNormResult {
    pub alpha: f64,
    pub cutoff: f64,
    /// Lattice quadrature of `‖·‖²_{H^{-α}}`.
    pub norm_sq: f64,
    /// Upper bound on the omitted `|ξ| > Ξ` contribution to `norm_sq`.
    pub residual_bound: f64,
}

impl SobolevNormResult {
    pub fn value(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

/// `Σ (1 + |ξ|²)^{-α} |F(ξ)|² w(ξ)` plus the tail bound.
pub fn h_neg_alpha_norm(spectrum: &EmpiricalSpectrum, alpha: f64) -> Result<SobolevNormResult> {
    let lattice = &spectrum.lattice;
    let d = lattice.dim() as f64;
    let needed = d / 2.0 + f64::from(spectrum.growth);
    if spectrum.point_mass && !(alpha > needed) {
        return Err(Error::Validation(format!(
            "alpha must exceed {needed} for a {} source with point masses (alpha = {alpha})",
            spectrum.tag.as_str()
        )));
    }
    let mut acc = 0.0;
    for (f, v) in spectrum.values.iter().enumerate() {
        let xi = lattice.node(f);
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        acc += lattice.weight(f) * (1.0 + r2).powf(-alpha) * v.norm_sqr();
    }
    let residual_bound = if spectrum.bound == 0.0 {
        0.0
    } else {
        match lattice.tail_integral(alpha, spectrum.growth) {
            Some(t) => spectrum.bound * spectrum.bound * t,
            None => f64::INFINITY,
        }
    };
    Ok(SobolevNormResult {
        alpha,
        cutoff: lattice.cutoff(),
        norm_sq: acc,
        residual_bound,
    })
}

/// `F(∇·((k*μ)μ))(ξ) = (2π)^{-d/2} (i/N) Σ_j e^{-iξ·X_j} ξ·(k*μ)(X_j)` with
/// `(k*μ)(z) = (1/N) Σ_i k(z − X_i)`.
pub fn interaction_spectrum(
    positions: &[f64],
    kernel: &Kernel,
    half_width: f64,
    lattice: &FrequencyLattice,
) -> Result<EmpiricalSpectrum> {
    let d = lattice.dim();
    let n = positions.len() / d;
    if n == 0 {
        return Err(Error::Shape("interaction spectrum needs at least one particle".into()));
    }
    if kernel.is_zero() {
        let mut spec = EmpiricalSpectrum::zeros(lattice, SourceTag::Particles);
        spec.point_mass = true;
        spec.growth = 1;
        return Ok(spec);
    }
    let drift = pairwise_drift(positions, d, kernel, half_width);
    interaction_spectrum_from_drift(positions, &drift, lattice)
}

/// [`interaction_spectrum`] from an already computed particle drift
/// `-(k*μ)(X_i)`, as returned by [`pairwise_drift`].
pub fn interaction_spectrum_from_drift(
    positions: &[f64],
    drift: &[f64],
    lattice: &FrequencyLattice,
) -> Result<EmpiricalSpectrum> {
    let d = lattice.dim();
    let n = positions.len() / d;
    if n == 0 || drift.len() != positions.len() {
        return Err(Error::Shape(format!(
            "{} positions and {} drift components in dimension {d}",
            positions.len(),
            drift.len()
        )));
    }
    let mut spec = EmpiricalSpectrum::zeros(lattice, SourceTag::Particles);
    spec.point_mass = true;
    spec.growth = 1;
    let mut sup = 0.0f64;
    for a in 0..d {
        let w: Vec<f64> = drift.chunks_exact(d).map(|c| -c[a] / n as f64).collect();
        sup = sup.max(drift.chunks_exact(d).map(|c| c[a].abs()).fold(0.0, f64::max));
        let g = weighted_transform(positions, &w, lattice);
        for (f, v) in spec.values.iter_mut().enumerate() {
            let xi = lattice.node(f);
            *v += Complex64::new(0.0, xi[a]) * g[f];
        }
    }
    spec.bound = fourier_constant(d) * sup * (d as f64).sqrt();
    Ok(spec)
}

/// Field analogue of [`interaction_spectrum`]: transform of
/// `∇·((k*ρ)ρ)` with `k*ρ` from the spectral convolution.
pub fn interaction_spectrum_field(
    transform: &FieldTransform,
    kernel: &SpectralKernel,
    values: &[f64],
) -> Result<EmpiricalSpectrum> {
    let grid = &transform.grid;
    let lattice = transform.lattice();
    let mut spec = EmpiricalSpectrum::zeros(lattice, SourceTag::Field);
    spec.growth = 1;
    if kernel.is_zero() {
        return Ok(spec);
    }
    let conv = kernel.apply(grid, &grid.forward(values));
    let mut bound = 0.0;
    for (a, ca) in conv.iter().enumerate() {
        let flux: Vec<f64> = ca.iter().zip(values).map(|(c, r)| c * r).collect();
        let g = transform.apply(&flux)?;
        bound += g.bound * g.bound;
        for (f, v) in spec.values.iter_mut().enumerate() {
            let xi = lattice.node(f);
            *v += Complex64::new(0.0, xi[a]) * g.values[f];
        }
    }
    spec.bound = bound.sqrt();
    Ok(spec)
}

/// `⟨φ·k*(μ − ρ), μ − ρ⟩` for a vector test field `φ`, expanded into the
/// particle-particle, particle-field, field-particle and field-field terms.
pub fn pair_test_bilinear(
    positions: &[f64],
    grid: &Grid,
    rho: &[f64],
    phi: &dyn Fn(&[f64], &mut [f64]),
    kernel: &Kernel,
) -> f64 {
    if kernel.is_zero() || positions.is_empty() {
        return 0.0;
    }
    let drift = pairwise_drift(positions, grid.dim(), kernel, grid.half_width());
    pair_test_bilinear_from_drift(positions, &drift, grid, rho, phi, kernel)
}

/// [`pair_test_bilinear`] reusing the particle drift from [`pairwise_drift`].
pub fn pair_test_bilinear_from_drift(
    positions: &[f64],
    drift: &[f64],
    grid: &Grid,
    rho: &[f64],
    phi: &dyn Fn(&[f64], &mut [f64]),
    kernel: &Kernel,
) -> f64 {
    let d = grid.dim();
    let l = grid.half_width();
    let n = positions.len() / d;
    if kernel.is_zero() || n == 0 {
        return 0.0;
    }
    let vol = grid.cell_volume();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut dx = [0.0; 2];
    let mut kv = [0.0; 2];
    let mut ph = [0.0; 2];
    let mut node = [0.0; 2];

    let phi_p: Vec<[f64; 2]> = positions
        .chunks_exact(d)
        .map(|x| {
            let mut p = [0.0; 2];
            phi(x, &mut p[..d]);
            p
        })
        .collect();

    // particle-particle: (1/N) Σ_i φ(X_i)·(k*μ)(X_i), and the particle
    // drift is -(k*μ)(X_i)
    let pp = -drift
        .chunks_exact(d)
        .zip(&phi_p)
        .map(|(b, p)| dot(&p[..d], b))
        .sum::<f64>()
        / n as f64;

    // particle-field: (1/N) Σ_i φ(X_i)·(k*ρ)(X_i), field-particle:
    // h^d Σ_j ρ_j φ(x_j)·(k*μ)(x_j)
    let mut pf = 0.0;
    let mut fp = 0.0;
    for (flat, r) in rho.iter().enumerate() {
        if *r == 0.0 {
            continue;
        }
        grid.node(flat, &mut node[..d]);
        phi(&node[..d], &mut ph[..d]);
        let mut acc_fp = 0.0;
        for i in 0..n {
            let xi = &positions[i * d..(i + 1) * d];
            for a in 0..d {
                dx[a] = wrap_displacement(xi[a] - node[a], l);
            }
            kernel.eval_into(&dx[..d], &mut kv[..d]);
            pf += r * dot(&phi_p[i][..d], &kv[..d]);
            for a in 0..d {
                dx[a] = -dx[a];
            }
            kernel.eval_into(&dx[..d], &mut kv[..d]);
            acc_fp += dot(&ph[..d], &kv[..d]);
        }
        fp += r * acc_fp;
    }
    pf *= vol / n as f64;
    fp *= vol / n as f64;

    // field-field with the spectral convolution
    let conv = SpectralKernel::new(kernel, grid).apply(grid, &grid.forward(rho));
    let mut ff = 0.0;
    for (flat, r) in rho.iter().enumerate() {
        grid.node(flat, &mut node[..d]);
        phi(&node[..d], &mut ph[..d]);
        let mut s = 0.0;
        for a in 0..d {
            s += ph[a] * conv[a][flat];
        }
        ff += r * s;
    }
    ff *= vol;
    pp - pf - fp + ff
}
