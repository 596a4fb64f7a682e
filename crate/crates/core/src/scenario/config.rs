//! The experiment configuration and its TOML grammar.
//!
//! A config file has a `[scenario]` table with the numerical parameters,
//! one table each for `kernel`, `sigma`, `nu` and `rho0` (tagged by a
//! `kind` key) and an optional array of `[[test_functions]]`. Every key in
//! `[scenario]` except `dimension` may be omitted; omitted keys take the
//! defaults listed on [`RawScenarioSection`]. See `docs/config.md` for the
//! full grammar, including the optional `[campaign]` table.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::coeff::CoefficientSpec;
use super::density::Rho0Spec;
use super::kernel::KernelSpec;
use super::rng::{RngPlan, SeedPlanSummary};
use super::testfn::TestFunction;
use crate::error::{Error, Result};

/// `[scenario]` as written in a file; `None` means "use the default".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenarioSection {
    /// 1 or 2. Default 1.
    pub dimension: Option<usize>,
    /// Strictly increasing particle counts. Default `[1000]`.
    pub particle_counts: Option<Vec<usize>>,
    /// Default 0.5.
    pub final_time: Option<f64>,
    /// Default 100.
    pub n_steps: Option<usize>,
    /// Box half-width `L`. Default 8.
    pub half_width: Option<f64>,
    /// Grid nodes per axis. Default 512 (d = 1), 256 (d = 2).
    pub grid_size: Option<usize>,
    /// Frequency cutoff `Ξ`. Default 64 (d = 1), 32 (d = 2).
    pub frequency_cutoff: Option<f64>,
    /// Frequency lattice points per axis. Default 1024 (d = 1), 512 (d = 2).
    pub frequency_grid: Option<usize>,
    /// Sobolev exponent. Default 1.0 (d = 1), 1.5 (d = 2).
    pub alpha: Option<f64>,
    /// Default 200.
    pub replicas: Option<usize>,
    /// Default 42.
    pub seed: Option<u64>,
    /// Steps between stored snapshots. Default `n_steps`.
    pub snapshot_stride: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub dimension: usize,
    pub particle_counts: Vec<usize>,
    pub final_time: f64,
    pub n_steps: usize,
    pub half_width: f64,
    pub grid_size: usize,
    pub frequency_cutoff: f64,
    pub frequency_grid: usize,
    pub alpha: f64,
    pub replicas: usize,
    pub seed: u64,
    pub snapshot_stride: usize,
}

/// `[campaign]` as written in a file. Sizes of the individual Monte-Carlo
/// campaigns; the coupled scaling campaigns use `[scenario]` directly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCampaignSection {
    /// Particles per martingale-ledger replica. Default 500.
    pub ledger_particles: Option<usize>,
    /// Windows for the `M_T · ΔM̂` cross products. Default 4.
    pub ledger_windows: Option<usize>,
    /// Particles per conditional-CLT replica. Default: the largest count.
    pub clt_particles: Option<usize>,
    /// Common-noise path id shared by conditional campaigns. Default 0.
    pub fixed_path: Option<u64>,
    /// Particles per increment replica. Default 2000.
    pub increment_particles: Option<usize>,
    /// Increment lags in time steps. Default: doubling from
    /// `max(1, n_steps/64)` up to `n_steps/4`.
    pub increment_lags: Option<Vec<usize>>,
    /// Default `d/2 + 2.1`.
    pub increment_alpha: Option<f64>,
    /// Default `[8, 16, …, 1024]`.
    pub elln_counts: Option<Vec<usize>>,
    /// Draws per count. Default 100000.
    pub elln_samples: Option<usize>,
    /// Sup-norm of the cancelling test function. Default 0.01.
    pub elln_phi_sup: Option<f64>,
    /// Default `[2, 4]`.
    pub elln_powers: Option<Vec<u32>>,
    /// Default: `(8 √(e⁹) ‖(1+|·|²)^{-α}‖²_{L¹})^{-1}` at the scenario `α`.
    pub elln_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub ledger_particles: usize,
    pub ledger_windows: usize,
    pub clt_particles: usize,
    pub fixed_path: u64,
    pub increment_particles: usize,
    pub increment_lags: Vec<usize>,
    pub increment_alpha: f64,
    pub elln_counts: Vec<usize>,
    pub elln_samples: usize,
    pub elln_phi_sup: f64,
    pub elln_powers: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elln_kappa: Option<f64>,
}

fn default_lags(n_steps: usize) -> Vec<usize> {
    let mut lag = (n_steps / 64).max(1);
    let mut out = Vec::new();
    while lag <= (n_steps / 4).max(1) {
        out.push(lag);
        lag *= 2;
    }
    out
}

impl RawCampaignSection {
    fn resolve(self, s: &ScenarioSection) -> CampaignSection {
        CampaignSection {
            ledger_particles: self.ledger_particles.unwrap_or(500),
            ledger_windows: self.ledger_windows.unwrap_or(4),
            clt_particles: self
                .clt_particles
                .unwrap_or_else(|| s.particle_counts.last().copied().unwrap_or(1000)),
            fixed_path: self.fixed_path.unwrap_or(0),
            increment_particles: self.increment_particles.unwrap_or(2000),
            increment_lags: self.increment_lags.unwrap_or_else(|| default_lags(s.n_steps)),
            increment_alpha: self.increment_alpha.unwrap_or(s.dimension as f64 / 2.0 + 2.1),
            elln_counts: self.elln_counts.unwrap_or_else(|| (3..=10).map(|k| 1usize << k).collect()),
            elln_samples: self.elln_samples.unwrap_or(100_000),
            elln_phi_sup: self.elln_phi_sup.unwrap_or(0.01),
            elln_powers: self.elln_powers.unwrap_or_else(|| vec![2, 4]),
            elln_kappa: self.elln_kappa,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    scenario: RawScenarioSection,
    #[serde(default)]
    campaign: RawCampaignSection,
    kernel: Option<KernelSpec>,
    sigma: Option<CoefficientSpec>,
    nu: Option<CoefficientSpec>,
    rho0: Option<Rho0Spec>,
    test_functions: Option<Vec<TestFunction>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub campaign: CampaignSection,
    pub kernel: KernelSpec,
    pub sigma: CoefficientSpec,
    pub nu: CoefficientSpec,
    pub rho0: Rho0Spec,
    pub test_functions: Vec<TestFunction>,
}

impl RawConfig {
    fn resolve(self) -> ScenarioConfig {
        let s = self.scenario;
        let dim = s.dimension.unwrap_or(1);
        let n_steps = s.n_steps.unwrap_or(100);
        let scenario = ScenarioSection {
            dimension: dim,
            particle_counts: s.particle_counts.unwrap_or_else(|| vec![1000]),
            final_time: s.final_time.unwrap_or(0.5),
            n_steps,
            half_width: s.half_width.unwrap_or(8.0),
            grid_size: s.grid_size.unwrap_or(if dim == 1 { 512 } else { 256 }),
            frequency_cutoff: s.frequency_cutoff.unwrap_or(if dim == 1 { 64.0 } else { 32.0 }),
            frequency_grid: s.frequency_grid.unwrap_or(if dim == 1 { 1024 } else { 512 }),
            alpha: s.alpha.unwrap_or(if dim == 1 { 1.0 } else { 1.5 }),
            replicas: s.replicas.unwrap_or(200),
            seed: s.seed.unwrap_or(42),
            snapshot_stride: s.snapshot_stride.unwrap_or(n_steps),
        };
        ScenarioConfig {
            campaign: self.campaign.resolve(&scenario),
            kernel: self.kernel.unwrap_or_default(),
            sigma: self.sigma.unwrap_or_else(|| CoefficientSpec::constant_diagonal(dim, 1.0)),
            nu: self.nu.unwrap_or_else(|| CoefficientSpec::zero(dim)),
            rho0: self.rho0.unwrap_or_else(|| Rho0Spec::standard_gaussian(dim, 0.5)),
            test_functions: self
                .test_functions
                .unwrap_or_else(|| vec![TestFunction::bump("bump", vec![0.0; dim], 3.0)]),
            scenario,
        }
    }
}

impl ScenarioConfig {
    /// A config with every default filled in for dimension `dim`.
    pub fn default_for(dim: usize) -> Self {
        RawConfig {
            scenario: RawScenarioSection {
                dimension: Some(dim),
                ..Default::default()
            },
            ..Default::default()
        }
        .resolve()
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let cfg = raw.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn dim(&self) -> usize {
        self.scenario.dimension
    }

    pub fn dt(&self) -> f64 {
        self.scenario.final_time / self.scenario.n_steps as f64
    }

    pub fn rng_plan(&self) -> RngPlan {
        RngPlan::new(self.scenario.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let d = s.dimension;
        if !(1..=2).contains(&d) {
            return Err(Error::Validation(format!("dimension must be 1 or 2, got {d}")));
        }
        if !(s.alpha > d as f64 / 2.0) {
            return Err(Error::Validation(format!(
                "alpha must exceed d/2 (alpha = {}, d = {d})",
                s.alpha
            )));
        }
        if s.n_steps == 0 {
            return Err(Error::Validation("n_steps must be at least 1".into()));
        }
        if !(s.final_time > 0.0 && s.final_time.is_finite()) {
            return Err(Error::Validation("final_time must be positive".into()));
        }
        if !(s.half_width > 0.0 && s.half_width.is_finite()) {
            return Err(Error::Validation("half_width must be positive".into()));
        }
        if !s.grid_size.is_power_of_two() || s.grid_size < 4 {
            return Err(Error::Validation("grid_size must be a power of two".into()));
        }
        if !s.frequency_grid.is_power_of_two() || s.frequency_grid < 2 {
            return Err(Error::Validation("frequency_grid must be a power of two".into()));
        }
        if s.particle_counts.is_empty() {
            return Err(Error::Validation("particle_counts must not be empty".into()));
        }
        if s.particle_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("particle_counts must be strictly increasing".into()));
        }
        if s.replicas == 0 {
            return Err(Error::Validation("replicas must be at least 1".into()));
        }
        if s.snapshot_stride == 0 {
            return Err(Error::Validation("snapshot_stride must be at least 1".into()));
        }
        if !(s.frequency_cutoff > 0.0) {
            return Err(Error::Validation("frequency_cutoff must be positive".into()));
        }
        let spacing = 2.0 * s.frequency_cutoff / s.frequency_grid as f64;
        let alias_limit = PI / (2.0 * s.half_width);
        if spacing > alias_limit * (1.0 + 1e-12) {
            return Err(Error::IncommensurateLattice(format!(
                "frequency spacing {spacing:.4} exceeds pi/(2L) = {alias_limit:.4}; raise frequency_grid"
            )));
        }
        let nyquist = PI * s.grid_size as f64 / (2.0 * s.half_width);
        if s.frequency_cutoff > nyquist {
            return Err(Error::IncommensurateLattice(format!(
                "frequency cutoff {} exceeds the grid Nyquist frequency {nyquist:.3}; raise grid_size",
                s.frequency_cutoff
            )));
        }
        self.kernel.resolve(d)?;
        self.sigma.resolve(d, s.half_width)?;
        self.nu.resolve(d, s.half_width)?;
        self.rho0.resolve(d, s.half_width)?;
        let mut names = std::collections::HashSet::new();
        for f in &self.test_functions {
            f.validate(d, s.half_width)?;
            if !names.insert(f.name.clone()) {
                return Err(Error::Validation(format!("duplicate test function name '{}'", f.name)));
            }
        }
        self.validate_campaign()
    }

    fn validate_campaign(&self) -> Result<()> {
        let c = &self.campaign;
        let d = self.scenario.dimension as f64;
        if c.ledger_particles == 0 || c.clt_particles == 0 || c.increment_particles == 0 {
            return Err(Error::Validation("campaign particle counts must be positive".into()));
        }
        if c.ledger_windows == 0 {
            return Err(Error::Validation("ledger_windows must be at least 1".into()));
        }
        if !(c.increment_alpha > d / 2.0 + 2.0) {
            return Err(Error::Validation(format!(
                "increment_alpha must exceed d/2 + 2 (got {})",
                c.increment_alpha
            )));
        }
        if c.elln_counts.iter().any(|n| *n == 0) || c.elln_samples == 0 {
            return Err(Error::Validation("elln counts and samples must be positive".into()));
        }
        if !(c.elln_phi_sup >= 0.0 && c.elln_phi_sup.is_finite()) {
            return Err(Error::Validation("elln_phi_sup must be finite and non-negative".into()));
        }
        if c.elln_powers.iter().any(|p| ![1, 2, 4].contains(p)) {
            return Err(Error::Validation("elln_powers must be drawn from 1, 2, 4".into()));
        }
        if c.elln_kappa.is_some_and(|k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Validation("elln_kappa must be positive".into()));
        }
        Ok(())
    }

    /// Manifest echo of the resolved config (no timestamps, stable bytes).
    pub fn manifest(&self) -> ScenarioManifest {
        ScenarioManifest {
            config: self.clone(),
            seed_plan: SeedPlanSummary::from(&self.rng_plan()),
            code_version: code_version(),
        }
    }
}

pub fn code_version() -> String {
    format!("fluctlab {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub config: ScenarioConfig,
    pub seed_plan: SeedPlanSummary,
    pub code_version: String,
}

impl ScenarioManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_toml_str(&text, path)
}
