//! Euler–Maruyama simulation of the interacting particle system
//!
//! `dX^i = -(1/N) Σ_j k(X^i − X^j) dt + σ(t, X^i) dB^i + ν(t, X^i) dW`
//!
//! on the periodic box, together with the martingale ledgers
//! `M^N(φ)`, `M̂^N(φ)` and the predicted quadratic variation `Q(φ)`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_displacement, wrap_position};
use crate::meanfield::MeanFieldPath;
use crate::scenario::{Coefficient, Kernel, RngPlan, Scenario, TestFunction};

/// Common Brownian increments `ΔW` (`n_steps × m̃`, row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonNoisePath {
    pub path_id: u64,
    dt: f64,
    cols: usize,
    increments: Vec<f64>,
}

impl CommonNoisePath {
    pub fn generate(plan: &RngPlan, path_id: u64, n_steps: usize, cols: usize, dt: f64) -> Self {
        let mut rng = plan.common_noise(path_id);
        let sd = dt.sqrt();
        let increments = (0..n_steps * cols)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            path_id,
            dt,
            cols,
            increments,
        }
    }

    pub fn for_scenario(scenario: &Scenario, path_id: u64) -> Self {
        Self::generate(&scenario.rng, path_id, scenario.n_steps(), scenario.nu.cols(), scenario.dt())
    }

    pub fn from_increments(dt: f64, cols: usize, increments: Vec<f64>) -> Result<Self> {
        if cols == 0 || increments.len() % cols != 0 {
            return Err(Error::Shape(format!(
                "{} increments do not split into rows of {cols}",
                increments.len()
            )));
        }
        Ok(Self {
            path_id: u64::MAX,
            dt,
            cols,
            increments,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.cols
    }

    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.cols..(n + 1) * self.cols]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W_{t_n}`.
    pub fn cumulative(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.cols];
        for k in 0..n {
            for (a, v) in w.iter_mut().zip(self.increment(k)) {
                *a += v;
            }
        }
        w
    }

    /// The same Brownian path seen with a step `factor` times larger.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(Error::Shape(format!(
                "cannot coarsen {} steps by {factor}",
                self.n_steps()
            )));
        }
        let n = self.n_steps() / factor;
        let mut increments = vec![0.0; n * self.cols];
        for k in 0..self.n_steps() {
            for (a, v) in self.increment(k).iter().enumerate() {
                increments[(k / factor) * self.cols + a] += v;
            }
        }
        Ok(Self {
            path_id: self.path_id,
            dt: self.dt * factor as f64,
            cols: self.cols,
            increments,
        })
    }
}

/// Positions `X` (`N × d`, row-major) at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub t: f64,
    pub replica: u64,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, replica: u64) -> Result<Self> {
        if dim == 0 || positions.len() % dim != 0 {
            return Err(Error::Shape(format!("{} coordinates for d = {dim}", positions.len())));
        }
        Ok(Self {
            dim,
            positions,
            t: 0.0,
            replica,
        })
    }

    /// `N` i.i.d. draws from `ρ₀` with the replica's initial stream.
    pub fn sample(scenario: &Scenario, n: usize, replica: u64) -> Self {
        let mut rng = scenario.rng.initial(replica);
        Self {
            dim: scenario.dim(),
            positions: scenario.rho0.sample(n, &mut rng),
            t: 0.0,
            replica,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// `(1/N) Σ_i f(X^i)`.
    pub fn mean_of(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        self.positions.chunks_exact(self.dim).map(f).sum::<f64>() / n as f64
    }
}

/// Per-particle idiosyncratic noise streams.
#[derive(Clone, Debug)]
pub struct IdiosyncraticNoise {
    streams: Vec<ChaCha8Rng>,
    cols: usize,
}

impl IdiosyncraticNoise {
    pub fn for_replica(plan: &RngPlan, replica: u64, n: usize, cols: usize) -> Self {
        Self {
            streams: (0..n as u64).map(|i| plan.idiosyncratic(replica, i)).collect(),
            cols,
        }
    }

    pub fn from_streams(streams: Vec<ChaCha8Rng>, cols: usize) -> Self {
        Self { streams, cols }
    }

    /// Draws `ΔB` for every particle (`N × m`, row-major).
    pub fn draw(&mut self, dt: f64, out: &mut Vec<f64>) {
        out.clear();
        let sd = dt.sqrt();
        for rng in &mut self.streams {
            for _ in 0..self.cols {
                out.push(sd * rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
}

/// `drift_i = -(1/N) Σ_j k(X_i − X_j)` including `j = i`, with minimal-image
/// displacements. Each unordered pair is evaluated once.
pub fn pairwise_drift(positions: &[f64], dim: usize, kernel: &Kernel, half_width: f64) -> Vec<f64> {
    let n = positions.len() / dim;
    let mut drift = vec![0.0; n * dim];
    if n == 0 || kernel.is_zero() {
        return drift;
    }
    let scale = -1.0 / n as f64;
    let l = half_width;
    match (kernel.fixed_axis(), dim) {
        (Some(e), 1) => {
            let mut acc = vec![0.0; n];
            for i in 0..n {
                let xi = positions[i];
                let mut s = 0.0;
                for j in (i + 1)..n {
                    let dx = wrap_displacement(xi - positions[j], l);
                    let p = kernel.profile(dx * dx);
                    s += p;
                    acc[j] += p;
                }
                acc[i] += s + kernel.profile(0.0);
            }
            for (d, a) in drift.iter_mut().zip(&acc) {
                *d = scale * a * e[0];
            }
        }
        (Some(e), _) => {
            let mut acc = vec![0.0; n];
            for i in 0..n {
                let (xi, yi) = (positions[2 * i], positions[2 * i + 1]);
                let mut s = 0.0;
                for j in (i + 1)..n {
                    let dx = wrap_displacement(xi - positions[2 * j], l);
                    let dy = wrap_displacement(yi - positions[2 * j + 1], l);
                    let p = kernel.profile(dx * dx + dy * dy);
                    s += p;
                    acc[j] += p;
                }
                acc[i] += s + kernel.profile(0.0);
            }
            for (i, a) in acc.iter().enumerate() {
                drift[2 * i] = scale * a * e[0];
                drift[2 * i + 1] = scale * a * e[1];
            }
        }
        // odd kernel: k(x) = p(|x|²) x / w, the self term vanishes
        (None, 1) => {
            for i in 0..n {
                let xi = positions[i];
                let mut s = 0.0;
                for j in (i + 1)..n {
                    let dx = wrap_displacement(xi - positions[j], l);
                    let v = kernel.profile(dx * dx) * dx;
                    s += v;
                    drift[j] -= v;
                }
                drift[i] += s;
            }
            let c = scale * kernel.radial_scale();
            drift.iter_mut().for_each(|v| *v *= c);
        }
        (None, _) => {
            for i in 0..n {
                let (xi, yi) = (positions[2 * i], positions[2 * i + 1]);
                let (mut sx, mut sy) = (0.0, 0.0);
                for j in (i + 1)..n {
                    let dx = wrap_displacement(xi - positions[2 * j], l);
                    let dy = wrap_displacement(yi - positions[2 * j + 1], l);
                    let p = kernel.profile(dx * dx + dy * dy);
                    sx += p * dx;
                    sy += p * dy;
                    drift[2 * j] -= p * dx;
                    drift[2 * j + 1] -= p * dy;
                }
                drift[2 * i] += sx;
                drift[2 * i + 1] += sy;
            }
            let c = scale * kernel.radial_scale();
            drift.iter_mut().for_each(|v| *v *= c);
        }
    }
    drift
}

/// Advances the ensemble by one Euler–Maruyama step using the given
/// increments (`db`: `N × m`, `dw`: `m̃`).
#[allow(clippy::too_many_arguments)]
pub fn step_euler(
    ens: &mut ParticleEnsemble,
    dt: f64,
    sigma: &Coefficient,
    nu: &Coefficient,
    kernel: &Kernel,
    half_width: f64,
    db: &[f64],
    dw: &[f64],
) -> Result<()> {
    let d = ens.dim;
    let n = ens.len();
    let (m, mt) = (sigma.cols(), nu.cols());
    if db.len() != n * m || dw.len() != mt {
        return Err(Error::Shape(format!(
            "increment shapes ({}, {}) do not match N·m = {}, m̃ = {mt}",
            db.len(),
            dw.len(),
            n * m
        )));
    }
    let drift = pairwise_drift(&ens.positions, d, kernel, half_width);
    let mut s = vec![0.0; d * m];
    let mut v = vec![0.0; d * mt];
    let t = ens.t;
    for i in 0..n {
        let x = &mut ens.positions[i * d..(i + 1) * d];
        sigma.eval_into(t, x, &mut s);
        nu.eval_into(t, x, &mut v);
        let dbi = &db[i * m..(i + 1) * m];
        for a in 0..d {
            let mut inc = drift[i * d + a] * dt;
            for l in 0..m {
                inc += s[a * m + l] * dbi[l];
            }
            for l in 0..mt {
                inc += v[a * mt + l] * dw[l];
            }
            x[a] = wrap_position(x[a] + inc, half_width);
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::numerical(
                t + dt,
                format!("particle {i} of replica {} left the finite range", ens.replica),
            ));
        }
    }
    ens.t = t + dt;
    Ok(())
}

/// Running `M^N(φ)`, `M̂^N(φ)` and `Q(φ)` for registered test functions,
/// recorded at every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleLedger {
    pub names: Vec<String>,
    /// `[n][fn]` for `n = 0..=steps taken`.
    pub m: Vec<Vec<f64>>,
    pub m_hat: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// Predicted covariation `Σ_l ∫⟨(σ^T∇φ_a)_l (σ^T∇φ_b)_l, μ^N⟩ dt`.
    pub q_cross: Vec<Vec<f64>>,
}

impl MartingaleLedger {
    pub fn new(fns: &[TestFunction]) -> Self {
        let k = fns.len();
        Self {
            names: fns.iter().map(|f| f.name.clone()).collect(),
            m: vec![vec![0.0; k]],
            m_hat: vec![vec![0.0; k]],
            q: vec![vec![0.0; k]],
            q_cross: vec![vec![0.0; k]; k],
        }
    }

    pub fn final_m(&self) -> &[f64] {
        self.m.last().unwrap()
    }

    pub fn final_m_hat(&self) -> &[f64] {
        self.m_hat.last().unwrap()
    }

    pub fn final_q(&self) -> &[f64] {
        self.q.last().unwrap()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Adds one step's contribution to the ledger. `ens` holds the positions at
/// the left point; `db`, `dw` are the increments used by [`step_euler`];
/// `nu_pairings[fn][l]` is `⟨(ν^T∇φ)_l, ρ_t⟩` (needed when `ν ≠ 0`).
#[allow(clippy::too_many_arguments)]
pub fn accumulate_martingales(
    ledger: &mut MartingaleLedger,
    ens: &ParticleEnsemble,
    dt: f64,
    sigma: &Coefficient,
    nu: &Coefficient,
    fns: &[TestFunction],
    db: &[f64],
    dw: &[f64],
    nu_pairings: Option<&[Vec<f64>]>,
) -> Result<()> {
    let d = ens.dim;
    let n = ens.len();
    let (m, mt) = (sigma.cols(), nu.cols());
    let k = fns.len();
    if db.len() != n * m || dw.len() != mt || ledger.names.len() != k {
        return Err(Error::Shape("ledger increments do not match the ensemble".into()));
    }
    let use_nu = !nu.is_zero() && k > 0;
    if use_nu && nu_pairings.map_or(true, |p| p.len() != k || p.iter().any(|r| r.len() != mt)) {
        return Err(Error::Precondition(
            "the common-noise ledger needs the mean-field pairings for every test function".into(),
        ));
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let inv_n = 1.0 / n as f64;
    let mut dm = vec![0.0; k];
    let mut nu_mean = vec![0.0; k * mt];
    let mut cross = vec![0.0; k * k];
    let mut s = vec![0.0; d * m];
    let mut v = vec![0.0; d * mt];
    let mut g = [0.0; 2];
    let mut a_vec = vec![0.0; k * m];
    let sigma_zero = sigma.is_zero();
    for i in 0..n {
        let x = ens.particle(i);
        if !sigma_zero {
            sigma.eval_into(ens.t, x, &mut s);
        }
        if use_nu {
            nu.eval_into(ens.t, x, &mut v);
        }
        let dbi = &db[i * m..(i + 1) * m];
        for (f, tf) in fns.iter().enumerate() {
            tf.gradient_into(x, &mut g[..d]);
            if !sigma_zero {
                for l in 0..m {
                    let al: f64 = (0..d).map(|a| s[a * m + l] * g[a]).sum();
                    a_vec[f * m + l] = al;
                    dm[f] += al * dbi[l];
                }
            }
            if use_nu {
                for l in 0..mt {
                    nu_mean[f * mt + l] += (0..d).map(|a| v[a * mt + l] * g[a]).sum::<f64>();
                }
            }
        }
        if !sigma_zero {
            for f in 0..k {
                for h in f..k {
                    let c: f64 = (0..m).map(|l| a_vec[f * m + l] * a_vec[h * m + l]).sum();
                    cross[f * k + h] += c;
                }
            }
        }
    }
    let prev_m = ledger.m.last().unwrap().clone();
    let prev_mh = ledger.m_hat.last().unwrap().clone();
    let prev_q = ledger.q.last().unwrap().clone();
    let mut new_m = prev_m;
    let mut new_mh = prev_mh;
    let mut new_q = prev_q;
    for f in 0..k {
        new_m[f] += dm[f] * inv_sqrt_n;
        if use_nu {
            let pair = &nu_pairings.unwrap()[f];
            let mut inc = 0.0;
            for l in 0..mt {
                let eta = (nu_mean[f * mt + l] * inv_n - pair[l]) * (n as f64).sqrt();
                inc += eta * dw[l];
            }
            new_mh[f] += inc;
        }
        for h in f..k {
            let c = cross[f * k + h] * inv_n * dt;
            ledger.q_cross[f][h] += c;
            if h != f {
                ledger.q_cross[h][f] += c;
            }
        }
        new_q[f] += cross[f * k + f] * inv_n * dt;
    }
    ledger.m.push(new_m);
    ledger.m_hat.push(new_mh);
    ledger.q.push(new_q);
    Ok(())
}

/// Output of [`run_trajectory`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<ParticleEnsemble>,
    pub snapshot_steps: Vec<usize>,
    pub ledger: MartingaleLedger,
    /// `(1/N) Σ_i φ(X^i_{t_n})` indexed `[n][fn]`, `n = 0..=n_steps`.
    pub phi_means: Vec<Vec<f64>>,
    pub final_state: ParticleEnsemble,
}

impl Trajectory {
    /// `⟨φ, η^N_{t_n}⟩ = √N(⟨φ, μ^N⟩ − ⟨φ, ρ⟩)` for every step.
    pub fn eta_pairings(&self, field: &MeanFieldPath, fn_index: usize) -> Vec<f64> {
        let sqrt_n = (self.final_state.len() as f64).sqrt();
        self.phi_means
            .iter()
            .zip(&field.phi_pairings)
            .map(|(mu, rho)| sqrt_n * (mu[fn_index] - rho[fn_index]))
            .collect()
    }
}

/// Simulates one replica with `n` particles along `path`. When `field` is
/// given, the common-noise ledger is paired against it.
pub fn run_trajectory(
    scenario: &Scenario,
    n: usize,
    replica: u64,
    path: &CommonNoisePath,
    field: Option<&MeanFieldPath>,
    fns: &[TestFunction],
    stride: usize,
) -> Result<Trajectory> {
    let ens = ParticleEnsemble::sample(scenario, n, replica);
    let noise = IdiosyncraticNoise::for_replica(&scenario.rng, replica, n, scenario.sigma.cols());
    run_from(scenario, ens, noise, path, field, fns, stride)
}

/// [`run_trajectory`] from explicit initial positions and noise streams.
pub fn run_from(
    scenario: &Scenario,
    mut ens: ParticleEnsemble,
    mut noise: IdiosyncraticNoise,
    path: &CommonNoisePath,
    field: Option<&MeanFieldPath>,
    fns: &[TestFunction],
    stride: usize,
) -> Result<Trajectory> {
    if path.cols() != scenario.nu.cols() {
        return Err(Error::Shape("common-noise path width does not match ν".into()));
    }
    if noise.streams.len() != ens.len() {
        return Err(Error::Shape("one idiosyncratic stream per particle is required".into()));
    }
    let dt = path.dt();
    let stride = stride.max(1);
    let steps = path.n_steps();
    let l = scenario.half_width();
    let mut ledger = MartingaleLedger::new(fns);
    let mut snapshots = vec![ens.clone()];
    let mut snapshot_steps = vec![0];
    let mut phi_means = Vec::with_capacity(steps + 1);
    let mut db = Vec::new();
    for step in 0..steps {
        phi_means.push(fns.iter().map(|f| ens.mean_of(|x| f.value(x))).collect());
        noise.draw(dt, &mut db);
        let dw = path.increment(step);
        let pairings = field.map(|p| p.nu_grad_pairings[step].as_slice());
        accumulate_martingales(&mut ledger, &ens, dt, &scenario.sigma, &scenario.nu, fns, &db, dw, pairings)?;
        step_euler(&mut ens, dt, &scenario.sigma, &scenario.nu, &scenario.kernel, l, &db, dw)?;
        if (step + 1) % stride == 0 || step + 1 == steps {
            snapshots.push(ens.clone());
            snapshot_steps.push(step + 1);
        }
    }
    phi_means.push(fns.iter().map(|f| ens.mean_of(|x| f.value(x))).collect());
    Ok(Trajectory {
        snapshots,
        snapshot_steps,
        ledger,
        phi_means,
        final_state: ens,
    })
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"FLCTPOS1";

/// Little-endian layout: magic `FLCTPOS1`, `u64 N`, `u32 d`, `u32` zero
/// padding, `f64 t`, then `N·d` `f64` positions row-major.
pub fn write_snapshot(path: &Path, ens: &ParticleEnsemble) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * ens.positions.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(ens.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(ens.dim as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&ens.t.to_le_bytes());
    for v in &ens.positions {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<ParticleEnsemble> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = || Error::Integrity(format!("{} is not a particle snapshot", path.display()));
    if buf.len() < 32 || &buf[..8] != SNAPSHOT_MAGIC {
        return Err(bad());
    }
    let n = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(buf[16..20].try_into().unwrap()) as usize;
    let t = f64::from_le_bytes(buf[24..32].try_into().unwrap());
    if buf.len() != 32 + 8 * n * d {
        return Err(bad());
    }
    let positions = buf[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut ens = ParticleEnsemble::new(d, positions, 0)?;
    ens.t = t;
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CoefficientSpec, KernelSpec, ScenarioConfig};
    use rand::SeedableRng;

    fn gaussian_kernel() -> Kernel {
        KernelSpec::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            direction: None,
        }
        .resolve(1)
        .unwrap()
    }

    fn brute_drift(x: &[f64], d: usize, k: &Kernel, l: f64) -> Vec<f64> {
        let n = x.len() / d;
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..n {
                let dx: Vec<f64> = (0..d).map(|a| wrap_displacement(x[i * d + a] - x[j * d + a], l)).collect();
                let kv = k.eval(&dx);
                for a in 0..d {
                    out[i * d + a] -= kv[a] / n as f64;
                }
            }
        }
        out
    }

    #[test]
    fn drift_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k2 = KernelSpec::GaussianGradient {
            amplitude: 0.7,
            width: 0.9,
        }
        .resolve(2)
        .unwrap();
        for (d, k) in [(1, gaussian_kernel()), (2, k2)] {
            let x: Vec<f64> = (0..3 * d).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let fast = pairwise_drift(&x, d, &k, 8.0);
            let slow = brute_drift(&x, d, &k, 8.0);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_particle_drift_by_hand() {
        let k = gaussian_kernel();
        let drift = pairwise_drift(&[0.0, 1.0], 1, &k, 8.0);
        let k0 = 1.0;
        let k1 = (-0.5f64).exp();
        assert!((drift[0] + (k0 + k1) / 2.0).abs() < 1e-15);
        assert!((drift[1] + (k0 + k1) / 2.0).abs() < 1e-15);
        let odd = KernelSpec::GaussianGradient {
            amplitude: 1.0,
            width: 1.0,
        }
        .resolve(1)
        .unwrap();
        let drift = pairwise_drift(&[-0.7, 0.7], 1, &odd, 8.0);
        assert!((drift[0] + drift[1]).abs() < 1e-15 && drift[0] != 0.0);
        assert!(pairwise_drift(&[1.0, 2.0], 1, &KernelSpec::Zero.resolve(1).unwrap(), 8.0)
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn pure_common_noise_translates_rigidly() {
        let zero = CoefficientSpec::zero(1).resolve(1, 8.0).unwrap();
        let one = CoefficientSpec::constant_diagonal(1, 1.0).resolve(1, 8.0).unwrap();
        let mut ens = ParticleEnsemble::new(1, vec![-1.0, 0.0, 2.5], 0).unwrap();
        let k = KernelSpec::Zero.resolve(1).unwrap();
        step_euler(&mut ens, 0.1, &zero, &one, &k, 8.0, &[0.0; 3], &[0.3]).unwrap();
        for (a, b) in ens.positions.iter().zip([-0.7, 0.3, 2.8]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn noise_path_coarsening_and_moments() {
        let plan = RngPlan::new(9);
        let path = CommonNoisePath::generate(&plan, 0, 20000, 1, 0.01);
        let mean: f64 = path.increments().iter().sum::<f64>() / 20000.0;
        let var: f64 = path.increments().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19999.0;
        assert!(mean.abs() < 4.0 * (0.01f64 / 20000.0).sqrt());
        assert!((var / 0.01 - 1.0).abs() < 4.0 * (2.0f64 / 20000.0).sqrt());
        let coarse = path.coarsen(2).unwrap();
        assert_eq!(coarse.n_steps(), 10000);
        assert!((coarse.cumulative(10000)[0] - path.cumulative(20000)[0]).abs() < 1e-9);
        assert!(path.coarsen(3).is_err());
    }

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        let mut ens = ParticleEnsemble::new(2, vec![0.5, -1.0, 3.0, 2.0], 0).unwrap();
        ens.t = 0.75;
        write_snapshot(&p, &ens).unwrap();
        let back = read_snapshot(&p).unwrap();
        assert_eq!(back.positions, ens.positions);
        assert_eq!(back.t, 0.75);
    }

    fn small_scenario(sigma: f64, nu: f64) -> Scenario {
        let mut cfg = ScenarioConfig::default_for(1);
        cfg.scenario.n_steps = 3;
        cfg.scenario.final_time = 0.3;
        cfg.sigma = CoefficientSpec::constant_diagonal(1, sigma);
        cfg.nu = CoefficientSpec::constant_diagonal(1, nu);
        cfg.kernel = KernelSpec::Gaussian {
            amplitude: 0.5,
            width: 1.0,
            direction: None,
        };
        Scenario::new(cfg).unwrap()
    }

    #[test]
    fn exchangeability_under_permutation() {
        let sc = small_scenario(1.0, 0.0);
        let path = CommonNoisePath::for_scenario(&sc, 0);
        let x: Vec<f64> = vec![-2.0, -1.1, -0.3, 0.0, 0.4, 1.2, 2.2, 3.0];
        let perm = [3usize, 0, 7, 5, 1, 6, 2, 4];
        let streams: Vec<ChaCha8Rng> = (0..8).map(|i| sc.rng.idiosyncratic(0, i)).collect();
        let a = run_from(
            &sc,
            ParticleEnsemble::new(1, x.clone(), 0).unwrap(),
            IdiosyncraticNoise::from_streams(streams.clone(), 1),
            &path,
            None,
            &[],
            1,
        )
        .unwrap();
        let xp: Vec<f64> = perm.iter().map(|&p| x[p]).collect();
        let sp: Vec<ChaCha8Rng> = perm.iter().map(|&p| streams[p].clone()).collect();
        let b = run_from(
            &sc,
            ParticleEnsemble::new(1, xp, 0).unwrap(),
            IdiosyncraticNoise::from_streams(sp, 1),
            &path,
            None,
            &[],
            1,
        )
        .unwrap();
        for (i, &p) in perm.iter().enumerate() {
            let (u, v) = (b.final_state.positions[i], a.final_state.positions[p]);
            assert!((u - v).abs() < 1e-12, "{u} {v}");
        }
    }

    #[test]
    fn ledgers_vanish_without_their_noise() {
        let fns = vec![TestFunction::bump("b", vec![0.0], 3.0)];
        let sc = small_scenario(0.0, 1.0);
        let path = CommonNoisePath::for_scenario(&sc, 1);
        let field = crate::meanfield::solve_path(
            &sc,
            &crate::meanfield::FpSolver::from_scenario(&sc),
            &path,
            &fns,
            1,
        )
        .unwrap();
        let tr = run_trajectory(&sc, 50, 0, &path, Some(&field), &fns, 1).unwrap();
        assert!(tr.ledger.m.iter().all(|r| r[0] == 0.0));
        assert!(tr.ledger.final_m_hat()[0] != 0.0);
        let sc = small_scenario(1.0, 0.0);
        let tr = run_trajectory(&sc, 50, 0, &path, None, &fns, 1).unwrap();
        assert!(tr.ledger.m_hat.iter().all(|r| r[0] == 0.0));
        assert!(tr.ledger.q.windows(2).all(|w| w[1][0] >= w[0][0]));
        // Same seeds reproduce bitwise.
        let tr2 = run_trajectory(&sc, 50, 0, &path, None, &fns, 1).unwrap();
        assert_eq!(tr.final_state.positions, tr2.final_state.positions);
    }

    #[test]
    fn sigma_zero_replicas_coincide() {
        let sc = small_scenario(0.0, 0.7);
        let path = CommonNoisePath::for_scenario(&sc, 2);
        let x = vec![0.1, -0.4, 1.3];
        let run = |rep| {
            run_from(
                &sc,
                ParticleEnsemble::new(1, x.clone(), rep).unwrap(),
                IdiosyncraticNoise::for_replica(&sc.rng, rep, 3, 1),
                &path,
                None,
                &[],
                1,
            )
            .unwrap()
            .final_state
            .positions
        };
        assert_eq!(run(0), run(1));
    }

    #[test]
    fn ledger_rejects_bad_shapes() {
        let sc = small_scenario(1.0, 1.0);
        let fns = vec![TestFunction::bump("b", vec![0.0], 3.0)];
        let mut ledger = MartingaleLedger::new(&fns);
        let ens = ParticleEnsemble::new(1, vec![0.0, 1.0], 0).unwrap();
        assert!(accumulate_martingales(&mut ledger, &ens, 0.1, &sc.sigma, &sc.nu, &fns, &[0.1], &[0.1], None).is_err());
        assert!(accumulate_martingales(&mut ledger, &ens, 0.1, &sc.sigma, &sc.nu, &fns, &[0.1, 0.2], &[0.1], None).is_err());
    }
}
