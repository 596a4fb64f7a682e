//! Coupled particle / mean-field campaigns.
//!
//! Replicas are independent tasks keyed by replica id; results are
//! collected in replica order whatever the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{spearman, ScalingFit};
use super::ks::{ks_normal, ks_two_sample, KsResult};
use super::stats::{covariance_estimate, mean, mean_estimate, variance_estimate, Estimate};
use crate::error::{Error, Result};
use crate::fluctuation::{run_fluctuation, InitialFluctuation};
use crate::meanfield::{pair_values, solve_path, FpSolver, MeanFieldPath};
use crate::particles::{pairwise_drift, run_trajectory, CommonNoisePath};
use crate::scenario::{Scenario, TestFunction};
use crate::sobolev::{
    empirical_fourier, h_neg_alpha_norm, interaction_spectrum, interaction_spectrum_field,
    interaction_spectrum_from_drift, pair_test_bilinear_from_drift, EmpiricalSpectrum, FieldTransform,
    FrequencyLattice,
};

/// Maps `f` over replica ids `0..replicas` in parallel, keeping id order.
pub fn par_replicas<T: Send>(replicas: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..replicas as u64).into_par_iter().map(f).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// `‖μ^N_T − ρ_T‖_{H^{-α}}`.
    Plain,
    /// `‖∇·((k*μ)μ) − ∇·((k*ρ)ρ)‖_{H^{-α}}`.
    Interaction,
    /// `|⟨φ·k*(μ − ρ), μ − ρ⟩|`.
    Bilinear,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Plain => "plain",
            NormKind::Interaction => "interaction",
            NormKind::Bilinear => "bilinear",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergeOptions {
    pub particle_counts: Vec<usize>,
    pub replicas: usize,
    pub alpha_plain: f64,
    pub alpha_interaction: f64,
}

impl ConvergeOptions {
    /// Counts, replicas and `α` from the scenario; the interaction norm
    /// uses `α = d/2 + 2.1`.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let s = &scenario.config.scenario;
        Self {
            particle_counts: s.particle_counts.clone(),
            replicas: s.replicas,
            alpha_plain: s.alpha,
            alpha_interaction: scenario.dim() as f64 / 2.0 + 2.1,
        }
    }
}

/// One replica at one particle count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergeSample {
    pub n: usize,
    pub replica: u64,
    pub plain_sq: f64,
    pub interaction_sq: f64,
    pub bilinear: f64,
    /// Largest tail residual over the two norms.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergeData {
    pub options: ConvergeOptions,
    /// Ordered by count, then replica.
    pub samples: Vec<ConvergeSample>,
}

fn bilinear_field(dim: usize, tf: &TestFunction) -> impl Fn(&[f64], &mut [f64]) + '_ {
    let e = 1.0 / (dim as f64).sqrt();
    move |x: &[f64], out: &mut [f64]| {
        let v = tf.value(x) * e;
        out.iter_mut().for_each(|o| *o = v);
    }
}

/// Runs the particle system at every count against the mean-field solution
/// driven by the same common noise; the noise is redrawn per replica.
pub fn converge_campaign(scenario: &Scenario, options: &ConvergeOptions) -> Result<ConvergeData> {
    let mut counts = options.particle_counts.clone();
    counts.sort_unstable();
    counts.dedup();
    if counts.len() < 3 {
        return Err(Error::Precondition(format!(
            "a scaling campaign needs at least 3 distinct particle counts, got {}",
            counts.len()
        )));
    }
    let tf = scenario
        .test_functions
        .first()
        .ok_or_else(|| Error::Precondition("the bilinear pairing needs a test function".into()))?;
    let lattice = FrequencyLattice::from_config(&scenario.config)?;
    let transform = FieldTransform::new(&scenario.grid, &lattice)?;
    let solver = FpSolver::from_scenario(scenario);
    let steps = scenario.n_steps();
    let phi = bilinear_field(scenario.dim(), tf);
    let per_replica = par_replicas(options.replicas, |r| {
        let path = CommonNoisePath::for_scenario(scenario, r);
        let field = solve_path(scenario, &solver, &path, &[], steps)?;
        let rho = &field.final_field().values;
        let rho_spec = transform.apply(rho)?;
        let rho_int = interaction_spectrum_field(&transform, solver.kernel(), rho)?;
        let mut out = Vec::with_capacity(counts.len());
        for &n in &counts {
            let traj = run_trajectory(scenario, n, r, &path, None, &[], steps)?;
            let x = &traj.final_state.positions;
            let plain = h_neg_alpha_norm(&empirical_fourier(x, &lattice)?.difference(&rho_spec)?, options.alpha_plain)?;
            let (inter, bilinear) = if scenario.kernel.is_zero() {
                let zero = interaction_spectrum(x, &scenario.kernel, scenario.half_width(), &lattice)?;
                (zero, 0.0)
            } else {
                let drift = pairwise_drift(x, scenario.dim(), &scenario.kernel, scenario.half_width());
                (
                    interaction_spectrum_from_drift(x, &drift, &lattice)?,
                    pair_test_bilinear_from_drift(x, &drift, &scenario.grid, rho, &phi, &scenario.kernel),
                )
            };
            let inter = h_neg_alpha_norm(&inter.difference(&rho_int)?, options.alpha_interaction)?;
            out.push(ConvergeSample {
                n,
                replica: r,
                plain_sq: plain.norm_sq,
                interaction_sq: inter.norm_sq,
                bilinear: bilinear.abs(),
                residual: plain.residual_bound.max(inter.residual_bound),
            });
        }
        Ok(out)
    })?;
    let mut samples: Vec<ConvergeSample> = per_replica.into_iter().flatten().collect();
    samples.sort_by_key(|s| (s.n, s.replica));
    Ok(ConvergeData {
        options: options.clone(),
        samples,
    })
}

impl ConvergeData {
    pub fn counts(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.samples.iter().map(|s| s.n).collect();
        c.dedup();
        c
    }

    fn values(&self, n: usize, kind: NormKind, p: u32) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.n == n)
            .map(|s| match kind {
                NormKind::Plain => s.plain_sq.powf(p as f64 / 2.0),
                NormKind::Interaction => s.interaction_sq.powf(p as f64 / 2.0),
                NormKind::Bilinear => s.bilinear.powi(p as i32),
            })
            .collect()
    }

    /// `E[‖·‖^p]` per count with its standard error.
    pub fn moments(&self, kind: NormKind, p: u32) -> Vec<(usize, Estimate)> {
        self.counts()
            .into_iter()
            .map(|n| (n, mean_estimate(&self.values(n, kind, p))))
            .collect()
    }

    pub fn fit(&self, kind: NormKind, p: u32) -> Result<ScalingFit> {
        let m = self.moments(kind, p);
        let x: Vec<f64> = m.iter().map(|(n, _)| *n as f64).collect();
        let y: Vec<f64> = m.iter().map(|(_, e)| e.value).collect();
        let se: Vec<f64> = m.iter().map(|(_, e)| e.se).collect();
        ScalingFit::fit(&x, &y, &se)
    }

    /// Spearman correlation of `N · E[‖·‖^p]` with `N`.
    pub fn scaled_trend(&self, kind: NormKind, p: u32) -> f64 {
        let m = self.moments(kind, p);
        let x: Vec<f64> = m.iter().map(|(n, _)| *n as f64).collect();
        let y: Vec<f64> = m.iter().map(|(n, e)| *n as f64 * e.value).collect();
        spearman(&x, &y)
    }

    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,replica,plain_sq,interaction_sq,bilinear,residual\n");
        for r in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n, r.replica, r.plain_sq, r.interaction_sq, r.bilinear, r.residual
            ));
        }
        s
    }
}

/// `E[‖·‖^p]` against `N` for one norm kind, fitted in log-log.
pub fn moment_campaign(scenario: &Scenario, kind: NormKind, p: u32) -> Result<ScalingFit> {
    let data = converge_campaign(scenario, &ConvergeOptions::from_scenario(scenario))?;
    data.fit(kind, p)
}

pub fn fit_to_csv(fit: &ScalingFit, abscissa_name: &str) -> String {
    let mut s = format!("{abscissa_name},moment,se\n");
    for i in 0..fit.abscissa.len() {
        s.push_str(&format!("{},{},{}\n", fit.abscissa[i], fit.ordinate[i], fit.se[i]));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementOptions {
    pub n: usize,
    pub replicas: usize,
    /// Lags in time steps.
    pub lags: Vec<usize>,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementData {
    pub options: IncrementOptions,
    pub dt: f64,
    /// `[replica][lag]`: `‖η_{s+lag} − η_s‖⁴` averaged over the start times.
    pub per_replica: Vec<Vec<f64>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn scaled_difference(a: &EmpiricalSpectrum, b: &EmpiricalSpectrum, factor: f64) -> Result<EmpiricalSpectrum> {
    let mut d = a.difference(b)?;
    d.values.iter_mut().for_each(|v| *v *= factor);
    d.bound *= factor;
    Ok(d)
}

/// Fourth moments of the fluctuation increments `η^N_t − η^N_s` in
/// `H^{-α}` at the requested lags.
pub fn increment_campaign(scenario: &Scenario, options: &IncrementOptions) -> Result<IncrementData> {
    let positive = options.lags.iter().filter(|l| **l > 0).count();
    if positive < 3 {
        return Err(Error::Precondition(format!("an increment fit needs at least 3 positive lags, got {positive}")));
    }
    let steps = scenario.n_steps();
    if options.lags.iter().any(|l| *l > steps) {
        return Err(Error::Precondition("a lag exceeds the time horizon".into()));
    }
    let stride = options.lags.iter().fold(0, |g, l| gcd(g, *l)).max(1);
    if steps % stride != 0 {
        return Err(Error::Precondition(format!(
            "n_steps = {steps} is not a multiple of the lag resolution {stride}"
        )));
    }
    let lattice = FrequencyLattice::from_config(&scenario.config)?;
    let transform = FieldTransform::new(&scenario.grid, &lattice)?;
    let solver = FpSolver::from_scenario(scenario);
    let root_n = (options.n as f64).sqrt();
    let per_replica = par_replicas(options.replicas, |r| {
        let path = CommonNoisePath::for_scenario(scenario, r);
        let field = solve_path(scenario, &solver, &path, &[], stride)?;
        let traj = run_trajectory(scenario, options.n, r, &path, None, &[], stride)?;
        let eta: Vec<EmpiricalSpectrum> = traj
            .snapshots
            .iter()
            .zip(&field.snapshots)
            .map(|(ens, rho)| {
                let mu = empirical_fourier(&ens.positions, &lattice)?;
                scaled_difference(&mu, &transform.apply(&rho.values)?, root_n)
            })
            .collect::<Result<_>>()?;
        let mut row = Vec::with_capacity(options.lags.len());
        for &lag in &options.lags {
            if lag == 0 {
                row.push(0.0);
                continue;
            }
            let k = lag / stride;
            let mut acc = Vec::new();
            for s in 0..eta.len() - k {
                let inc = eta[s + k].difference(&eta[s])?;
                let v = h_neg_alpha_norm(&inc, options.alpha)?.norm_sq;
                acc.push(v * v);
            }
            row.push(mean(&acc));
        }
        Ok(row)
    })?;
    Ok(IncrementData {
        options: options.clone(),
        dt: scenario.dt(),
        per_replica,
    })
}

impl IncrementData {
    pub fn moments(&self) -> Vec<(f64, Estimate)> {
        self.options
            .lags
            .iter()
            .enumerate()
            .map(|(j, lag)| {
                let v: Vec<f64> = self.per_replica.iter().map(|r| r[j]).collect();
                (*lag as f64 * self.dt, mean_estimate(&v))
            })
            .collect()
    }

    /// Log-log fit over the positive lags.
    pub fn fit(&self) -> Result<ScalingFit> {
        let m: Vec<(f64, Estimate)> = self.moments().into_iter().filter(|(l, _)| *l > 0.0).collect();
        let x: Vec<f64> = m.iter().map(|(l, _)| *l).collect();
        let y: Vec<f64> = m.iter().map(|(_, e)| e.value).collect();
        let se: Vec<f64> = m.iter().map(|(_, e)| e.se).collect();
        ScalingFit::fit(&x, &y, &se)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("replica,lag,fourth_moment\n");
        for (r, row) in self.per_replica.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                s.push_str(&format!("{},{},{}\n", r, self.options.lags[j] as f64 * self.dt, v));
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerOptions {
    pub n: usize,
    pub replicas: usize,
    /// Number of equal windows for the `M_T · ΔM̂` cross products.
    pub windows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerSample {
    pub replica: u64,
    pub m: Vec<f64>,
    pub m_hat: Vec<f64>,
    /// `M̂` increments over each window, `[window][fn]`.
    pub m_hat_windows: Vec<Vec<f64>>,
    /// Mean-field quadrature of the covariance, `[f][g]`.
    pub predicted: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerData {
    pub names: Vec<String>,
    pub samples: Vec<LedgerSample>,
}

/// Particle martingale ledgers with a fresh common-noise path per replica.
pub fn ledger_campaign(scenario: &Scenario, fns: &[TestFunction], options: &LedgerOptions) -> Result<LedgerData> {
    if fns.is_empty() {
        return Err(Error::Precondition("the ledger campaign needs test functions".into()));
    }
    let steps = scenario.n_steps();
    let windows = options.windows.clamp(1, steps);
    let solver = FpSolver::from_scenario(scenario);
    let samples = par_replicas(options.replicas, |r| {
        let path = CommonNoisePath::for_scenario(scenario, r);
        let field = solve_path(scenario, &solver, &path, fns, steps)?;
        let traj = run_trajectory(scenario, options.n, r, &path, Some(&field), fns, steps)?;
        let ledger = &traj.ledger;
        let m_hat_windows = (0..windows)
            .map(|w| {
                let (a, b) = (w * steps / windows, (w + 1) * steps / windows);
                (0..fns.len()).map(|f| ledger.m_hat[b][f] - ledger.m_hat[a][f]).collect()
            })
            .collect();
        let predicted = (0..fns.len())
            .map(|f| (0..fns.len()).map(|g| field.predicted_covariance(f, g, steps)).collect())
            .collect();
        Ok(LedgerSample {
            replica: r,
            m: ledger.final_m().to_vec(),
            m_hat: ledger.final_m_hat().to_vec(),
            m_hat_windows,
            predicted,
        })
    })?;
    Ok(LedgerData {
        names: fns.iter().map(|f| f.name.clone()).collect(),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub f: String,
    pub g: String,
    pub empirical: Estimate,
    pub predicted: f64,
    /// Accepted deviation: `max(4 SE, 10% of |predicted|)`.
    pub band: f64,
    pub pass: bool,
}

/// Empirical `Cov(M_T(φ_f), M_T(φ_g))` against the averaged quadrature.
pub fn martingale_covariance(data: &LedgerData) -> Vec<CovarianceRow> {
    let k = data.names.len();
    let mut rows = Vec::new();
    for f in 0..k {
        for g in f..k {
            let x: Vec<f64> = data.samples.iter().map(|s| s.m[f]).collect();
            let y: Vec<f64> = data.samples.iter().map(|s| s.m[g]).collect();
            let empirical = covariance_estimate(&x, &y);
            let predicted = mean(&data.samples.iter().map(|s| s.predicted[f][g]).collect::<Vec<_>>());
            let band = (4.0 * empirical.se).max(0.1 * predicted.abs());
            rows.push(CovarianceRow {
                f: data.names[f].clone(),
                g: data.names[g].clone(),
                empirical,
                predicted,
                band,
                pass: (empirical.value - predicted).abs() <= band,
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossTermRow {
    pub name: String,
    /// `"final"` for `M_T·M̂_T`, otherwise `"window k"`.
    pub label: String,
    pub mean: Estimate,
    pub z: f64,
    pub pass: bool,
}

/// Means of `M_T(φ)·M̂_T(φ)` and `M_T(φ)·ΔM̂(φ)` over windows; each must lie
/// within 4 standard errors of zero.
pub fn cross_term_check(data: &LedgerData) -> Vec<CrossTermRow> {
    let mut rows = Vec::new();
    let row = |name: &str, label: String, v: Vec<f64>| {
        let mean = mean_estimate(&v);
        let z = mean.z_against(0.0);
        CrossTermRow {
            name: name.to_string(),
            label,
            mean,
            z,
            pass: z <= 4.0,
        }
    };
    for (f, name) in data.names.iter().enumerate() {
        let v = data.samples.iter().map(|s| s.m[f] * s.m_hat[f]).collect();
        rows.push(row(name, "final".into(), v));
        let windows = data.samples.first().map_or(0, |s| s.m_hat_windows.len());
        for w in 0..windows {
            let v = data.samples.iter().map(|s| s.m[f] * s.m_hat_windows[w][f]).collect();
            rows.push(row(name, format!("window {w}"), v));
        }
    }
    rows
}

impl LedgerData {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("replica,function,m,m_hat,predicted_variance\n");
        for r in &self.samples {
            for (f, name) in self.names.iter().enumerate() {
                s.push_str(&format!("{},{},{},{},{}\n", r.replica, name, r.m[f], r.m_hat[f], r.predicted[f][f]));
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltOptions {
    pub n: usize,
    pub replicas: usize,
    /// Id of the one common-noise path shared by every run.
    pub path_id: u64,
    pub initial: InitialFluctuation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub name: String,
    pub particle: Vec<f64>,
    pub spde: Vec<f64>,
    pub particle_variance: Estimate,
    pub spde_variance: Estimate,
    /// `Var_{ρ_T}(φ)`: the exact conditional variance when `k = 0`.
    pub analytic_variance: Option<f64>,
    /// Particle pairings against `N(0, v)` with `v` the analytic variance
    /// when available, else the SPDE variance.
    pub normality: KsResult,
    pub two_sample: KsResult,
    pub variance_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub replicas: usize,
    pub rows: Vec<CltRow>,
}

fn degenerate_ks(sample: &[f64], centre: f64) -> KsResult {
    let all = sample.iter().all(|v| (*v - centre).abs() <= 1e-12 * (1.0 + centre.abs()));
    KsResult {
        statistic: if all { 0.0 } else { 1.0 },
        p_value: if all { 1.0 } else { 0.0 },
        exact: true,
    }
}

/// `⟨η^N_T, φ⟩` from particles and from the fluctuation SPDE, all runs
/// driven by one fixed common-noise path.
pub fn conditional_clt(scenario: &Scenario, fns: &[TestFunction], options: &CltOptions) -> Result<CltReport> {
    if options.replicas < 500 {
        return Err(Error::Precondition(format!(
            "distributional claims need at least 500 replicas, got {}",
            options.replicas
        )));
    }
    let steps = scenario.n_steps();
    let solver = FpSolver::from_scenario(scenario);
    let path = CommonNoisePath::for_scenario(scenario, options.path_id);
    let field: MeanFieldPath = solve_path(scenario, &solver, &path, fns, 1)?;
    let rho_t = &field.final_field().values;
    let grid = &scenario.grid;
    let root_n = (options.n as f64).sqrt();
    let target: Vec<f64> = field.phi_pairings[steps].clone();
    let particle = par_replicas(options.replicas, |r| {
        let traj = run_trajectory(scenario, options.n, r, &path, None, &[], steps)?;
        Ok(fns
            .iter()
            .zip(&target)
            .map(|(f, t)| root_n * (traj.final_state.mean_of(|x| f.value(x)) - t))
            .collect::<Vec<f64>>())
    })?;
    let spde = par_replicas(options.replicas, |r| {
        let run = run_fluctuation(scenario, &solver, &field, &path, options.initial.clone(), r, fns)?;
        Ok(run.pairings[steps].clone())
    })?;
    let mut rows = Vec::new();
    for (f, tf) in fns.iter().enumerate() {
        let p: Vec<f64> = particle.iter().map(|v| v[f]).collect();
        let s: Vec<f64> = spde.iter().map(|v| v[f]).collect();
        let analytic_variance = scenario.kernel.is_zero().then(|| {
            let m1 = pair_values(grid, rho_t, |x| tf.value(x));
            let m2 = pair_values(grid, rho_t, |x| tf.value(x).powi(2));
            m2 - m1 * m1
        });
        let particle_variance = variance_estimate(&p);
        let spde_variance = variance_estimate(&s);
        let reference = analytic_variance.unwrap_or(spde_variance.value);
        let normality = if reference > 0.0 {
            ks_normal(&p, 0.0, reference.sqrt())
        } else {
            degenerate_ks(&p, 0.0)
        };
        let two_sample = if particle_variance.value == 0.0 && spde_variance.value == 0.0 {
            degenerate_ks(&p, s[0])
        } else {
            ks_two_sample(&p, &s)
        };
        rows.push(CltRow {
            name: tf.name.clone(),
            variance_ratio: particle_variance.value / reference,
            particle: p,
            spde: s,
            particle_variance,
            spde_variance,
            analytic_variance,
            normality,
            two_sample,
        });
    }
    Ok(CltReport {
        n: options.n,
        replicas: options.replicas,
        rows,
    })
}

impl CltReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("function,run,particle,spde\n");
        for row in &self.rows {
            for (r, (p, q)) in row.particle.iter().zip(&row.spde).enumerate() {
                s.push_str(&format!("{},{},{},{}\n", row.name, r, p, q));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CoefficientSpec, KernelSpec, ScenarioConfig};

    fn small(dim: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default_for(dim);
        let s = &mut cfg.scenario;
        s.final_time = 0.1;
        s.n_steps = 8;
        s.half_width = 4.0;
        s.grid_size = 64;
        s.frequency_cutoff = 8.0;
        s.frequency_grid = 128;
        s.replicas = 6;
        s.particle_counts = vec![20, 40, 80];
        cfg.kernel = KernelSpec::Gaussian {
            amplitude: 0.5,
            width: 1.0,
            direction: None,
        };
        cfg.sigma = CoefficientSpec::constant_diagonal(dim, 0.5);
        cfg.nu = CoefficientSpec::constant_diagonal(dim, 0.5);
        cfg.test_functions = vec![
            TestFunction::bump("a", vec![0.5; dim], 2.0),
            TestFunction::bump("b", vec![-0.5; dim], 2.0),
        ];
        cfg
    }

    #[test]
    fn converge_is_deterministic_and_ordered() {
        let sc = Scenario::new(small(1)).unwrap();
        let opts = ConvergeOptions::from_scenario(&sc);
        let a = converge_campaign(&sc, &opts).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| converge_campaign(&sc, &opts).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.counts(), vec![20, 40, 80]);
        assert!(a.samples.iter().all(|s| s.plain_sq > 0.0 && s.interaction_sq > 0.0));
        assert_eq!(a.moments(NormKind::Plain, 2).len(), 3);
        assert!(a.fit(NormKind::Plain, 2).unwrap().slope.is_finite());
    }

    #[test]
    fn converge_rejects_two_counts() {
        let sc = Scenario::new(small(1)).unwrap();
        let opts = ConvergeOptions {
            particle_counts: vec![10, 20, 20],
            ..ConvergeOptions::from_scenario(&sc)
        };
        assert!(matches!(converge_campaign(&sc, &opts), Err(Error::Precondition(_))));
    }

    #[test]
    fn collapsed_system_has_zero_norms() {
        // k = 0, no noise, all mass at one grid node: μ^N = ρ exactly.
        let mut cfg = small(1);
        cfg.kernel = KernelSpec::Zero;
        cfg.sigma = CoefficientSpec::zero(1);
        cfg.nu = CoefficientSpec::zero(1);
        let sc = Scenario::new(cfg).unwrap();
        let lattice = FrequencyLattice::from_config(&sc.config).unwrap();
        let h = sc.grid.spacing();
        let atom = vec![0.0; 50];
        let mut rho = vec![0.0; sc.grid.len()];
        rho[sc.grid.nearest_node(&[0.0])] = 1.0 / h;
        let diff = empirical_fourier(&atom, &lattice)
            .unwrap()
            .difference(&FieldTransform::new(&sc.grid, &lattice).unwrap().apply(&rho).unwrap())
            .unwrap();
        assert!(h_neg_alpha_norm(&diff, 1.0).unwrap().norm_sq < 1e-24);
    }

    #[test]
    fn increments_vanish_at_lag_zero() {
        let sc = Scenario::new(small(1)).unwrap();
        let opts = IncrementOptions {
            n: 30,
            replicas: 4,
            lags: vec![0, 1, 2, 4],
            alpha: 2.6,
        };
        let data = increment_campaign(&sc, &opts).unwrap();
        assert!(data.per_replica.iter().all(|r| r[0] == 0.0 && r[1] > 0.0));
        let m = data.moments();
        assert!(m[1].1.value < m[3].1.value);
        assert!(data.fit().is_ok());
        let bad = IncrementOptions {
            lags: vec![0, 1, 2],
            ..opts
        };
        assert!(increment_campaign(&sc, &bad).is_err());
    }

    #[test]
    fn cross_terms_vanish_without_either_noise() {
        for (sigma, nu) in [(0.0, 0.5), (0.5, 0.0)] {
            let mut cfg = small(1);
            cfg.sigma = CoefficientSpec::constant_diagonal(1, sigma);
            cfg.nu = CoefficientSpec::constant_diagonal(1, nu);
            let sc = Scenario::new(cfg).unwrap();
            let fns = sc.test_functions.clone();
            let opts = LedgerOptions {
                n: 30,
                replicas: 5,
                windows: 2,
            };
            let data = ledger_campaign(&sc, &fns, &opts).unwrap();
            for row in cross_term_check(&data) {
                assert_eq!(row.mean.value, 0.0);
                assert!(row.pass);
            }
        }
    }

    #[test]
    fn clt_needs_enough_replicas() {
        let sc = Scenario::new(small(1)).unwrap();
        let fns = sc.test_functions.clone();
        let opts = CltOptions {
            n: 20,
            replicas: 100,
            path_id: 0,
            initial: InitialFluctuation::GaussianBridge,
        };
        assert!(matches!(conditional_clt(&sc, &fns, &opts), Err(Error::Precondition(_))));
    }
}
