//! Solver for the limiting fluctuation SPDE
//!
//! `dη = [∇·(η(k*ρ)) + ∇·(ρ(k*η)) + ½ ∂_i∂_j((σσ^T + νν^T)_{ij} η)] dt
//!       − ∇·(ην dW) − ∇·(σ√ρ ξ)`
//!
//! driven by the same common-noise increments and mean-field density as
//! the particle system. The interaction terms are the linearization of the
//! Fokker–Planck drift `∇·((k*ρ)ρ)` around `ρ`. Space-time white noise is
//! a cell-wise Gaussian array `G` with variance `1/h^d` per entry and
//! component, entering each step as `−∇·(σ√ρ⁺ G)√Δt`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::meanfield::{pair_values, FpSolver, MeanFieldPath};
use crate::particles::CommonNoisePath;
use crate::scenario::{Coefficient, Scenario, TestFunction};
use crate::statlab::stats::{jackknife_se, mean, variance};

const BLOWUP: f64 = 1e8;

/// Grid values of `η_t` (signed).
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationField {
    pub t: f64,
    pub values: Vec<f64>,
}

impl FluctuationField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            values: vec![0.0; grid.len()],
        }
    }

    /// `⟨η, 1⟩` over the box.
    pub fn total(&self, grid: &Grid) -> f64 {
        self.values.iter().sum::<f64>() * grid.cell_volume()
    }

    pub fn pair(&self, grid: &Grid, phi: impl Fn(&[f64]) -> f64) -> f64 {
        pair_values(grid, &self.values, phi)
    }
}

/// One step of white noise: `m` grid arrays of i.i.d. `N(0, 1/h^d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WhiteNoiseSample {
    pub cols: usize,
    /// Component-major: `values[l · M^d + j]`.
    pub values: Vec<f64>,
}

impl WhiteNoiseSample {
    pub fn draw<R: Rng + ?Sized>(grid: &Grid, cols: usize, rng: &mut R) -> Self {
        let sd = grid.cell_volume().powf(-0.5);
        Self {
            cols,
            values: (0..cols * grid.len())
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            cols: self.cols,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// How `η₀` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFluctuation {
    /// `η₀ = 0`.
    Zero,
    /// Grid realization of the Gaussian limit of `√N(μ₀^N − ρ₀)`:
    /// `η₀ = √ρ₀ Z − ρ₀ ⟨√ρ₀, Z⟩` with `Z` cell-wise white noise.
    GaussianBridge,
    /// `√N(μ₀^N − ρ₀)` for a fresh draw of `N` particles, deposited on
    /// the grid by cloud-in-cell.
    FromParticles { n: usize },
}

impl InitialFluctuation {
    pub fn realize<R: Rng + ?Sized>(&self, scenario: &Scenario, rho0: &[f64], rng: &mut R) -> Vec<f64> {
        let grid = &scenario.grid;
        match *self {
            InitialFluctuation::Zero => vec![0.0; grid.len()],
            InitialFluctuation::GaussianBridge => {
                let z = WhiteNoiseSample::draw(grid, 1, rng).values;
                let sq: Vec<f64> = rho0.iter().map(|r| r.max(0.0).sqrt()).collect();
                let proj: f64 = sq.iter().zip(&z).map(|(s, z)| s * z).sum::<f64>() * grid.cell_volume();
                sq.iter().zip(&z).zip(rho0).map(|((s, z), r)| s * z - r * proj).collect()
            }
            InitialFluctuation::FromParticles { n } => {
                let x = scenario.rho0.sample(n, rng);
                let dep = grid.deposit_cic(&x);
                let s = (n as f64).sqrt();
                dep.iter().zip(rho0).map(|(a, b)| s * (a - b)).collect()
            }
        }
    }
}

/// Adds `−∇·(σ√ρ⁺ G)√Δt` to the spectrum.
fn add_forcing(
    grid: &Grid,
    sigma: &Coefficient,
    t: f64,
    rho: &[f64],
    noise: &WhiteNoiseSample,
    dt: f64,
    spec: &mut [Complex64],
) -> Result<()> {
    if sigma.is_zero() {
        return Ok(());
    }
    let d = grid.dim();
    let m = sigma.cols();
    let n = grid.len();
    if noise.cols != m || noise.values.len() != m * n {
        return Err(Error::Shape("white-noise sample does not match σ and the grid".into()));
    }
    let sdt = dt.sqrt();
    let mut flux = vec![vec![0.0; n]; d];
    let mut x = [0.0; 2];
    let mut s = vec![0.0; d * m];
    for j in 0..n {
        let r = rho[j];
        if r <= 0.0 {
            continue;
        }
        grid.node(j, &mut x[..d]);
        sigma.eval_into(t, &x[..d], &mut s);
        let sq = r.sqrt() * sdt;
        for a in 0..d {
            let mut acc = 0.0;
            for l in 0..m {
                acc += s[a * m + l] * noise.values[l * n + j];
            }
            flux[a][j] = -sq * acc;
        }
    }
    for (a, fa) in flux.iter().enumerate() {
        let fh = grid.forward(fa);
        for (f, c) in spec.iter_mut().enumerate() {
            let k = grid.wavevector(f);
            *c += Complex64::new(0.0, k[a]) * fh[f];
        }
    }
    Ok(())
}

/// One step of the fluctuation SPDE from `η_t` given `ρ_t`.
pub fn fluct_step(
    solver: &FpSolver,
    sigma: &Coefficient,
    eta: &FluctuationField,
    rho: &[f64],
    dt: f64,
    dw: &[f64],
    noise: &WhiteNoiseSample,
) -> Result<FluctuationField> {
    let grid = solver.grid();
    let mut spec = grid.forward(&eta.values);
    let conv_rho = if solver.kernel().is_zero() {
        Vec::new()
    } else {
        solver.kernel().apply(grid, &grid.forward(rho))
    };
    if let Some(inc) = solver.explicit_increment(eta.t, &eta.values, &spec, dt, dw, Some((rho, &conv_rho))) {
        for (s, e) in spec.iter_mut().zip(inc) {
            *s += e;
        }
    }
    add_forcing(grid, sigma, eta.t, rho, noise, dt, &mut spec)?;
    solver.propagate(&mut spec, dt, dw);
    let (values, _) = grid.inverse(spec);
    let t = eta.t + dt;
    if values.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
        return Err(Error::numerical(
            t,
            format!("fluctuation field blew up; try dt <= {:.3e}", dt / 2.0),
        ));
    }
    Ok(FluctuationField { t, values })
}

/// Pairings `⟨η_{t_n}, φ⟩` of one run, indexed `[n][fn]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationRun {
    pub pairings: Vec<Vec<f64>>,
    pub final_field: FluctuationField,
}

/// Runs the SPDE along a mean-field path solved with stride 1.
#[allow(clippy::too_many_arguments)]
pub fn run_fluctuation(
    scenario: &Scenario,
    solver: &FpSolver,
    field: &MeanFieldPath,
    path: &CommonNoisePath,
    init: InitialFluctuation,
    run: u64,
    fns: &[TestFunction],
) -> Result<FluctuationRun> {
    let steps = path.n_steps();
    if field.snapshots.len() != steps + 1 {
        return Err(Error::Precondition(
            "the fluctuation solver needs the mean-field density at every step (stride 1)".into(),
        ));
    }
    let grid = &scenario.grid;
    let mut init_rng = scenario.rng.initial_fluctuation(run);
    let mut noise_rng = scenario.rng.white_noise(run);
    let mut eta = FluctuationField {
        t: 0.0,
        values: init.realize(scenario, &field.snapshots[0].values, &mut init_rng),
    };
    let pair_all = |e: &FluctuationField| fns.iter().map(|f| e.pair(grid, |x| f.value(x))).collect::<Vec<_>>();
    let mut pairings = Vec::with_capacity(steps + 1);
    pairings.push(pair_all(&eta));
    let cols = scenario.sigma.cols();
    for n in 0..steps {
        let noise = if scenario.sigma.is_zero() {
            WhiteNoiseSample {
                cols,
                values: Vec::new(),
            }
        } else {
            WhiteNoiseSample::draw(grid, cols, &mut noise_rng)
        };
        eta = fluct_step(
            solver,
            &scenario.sigma,
            &eta,
            &field.snapshots[n].values,
            path.dt(),
            path.increment(n),
            &noise,
        )?;
        pairings.push(pair_all(&eta));
    }
    Ok(FluctuationRun {
        pairings,
        final_field: eta,
    })
}

/// Per-time mean and variance of `⟨η_t, φ⟩` across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    pub runs: usize,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
}

/// `series[r][n]` is run `r` at time step `n`.
pub fn conditional_moments(series: &[Vec<f64>]) -> Result<ConditionalMoments> {
    let r = series.len();
    if r < 100 {
        return Err(Error::Precondition(format!(
            "variance claims need at least 100 runs, got {r}"
        )));
    }
    let steps = series[0].len();
    if series.iter().any(|s| s.len() != steps) {
        return Err(Error::Shape("runs have different lengths".into()));
    }
    let mut out = ConditionalMoments {
        runs: r,
        mean: Vec::with_capacity(steps),
        mean_se: Vec::with_capacity(steps),
        variance: Vec::with_capacity(steps),
        variance_se: Vec::with_capacity(steps),
    };
    let rf = r as f64;
    let mut col = vec![0.0; r];
    for n in 0..steps {
        for (c, s) in col.iter_mut().zip(series) {
            *c = s[n];
        }
        let m = mean(&col);
        let v = variance(&col);
        let s1: f64 = col.iter().sum();
        let s2: f64 = col.iter().map(|x| x * x).sum();
        let loo: Vec<f64> = col
            .iter()
            .map(|x| {
                let a = s1 - x;
                (s2 - x * x - a * a / (rf - 1.0)) / (rf - 2.0)
            })
            .collect();
        out.mean.push(m);
        out.mean_se.push((v / rf).sqrt());
        out.variance.push(v);
        out.variance_se.push(jackknife_se(&loo));
    }
    Ok(out)
}
