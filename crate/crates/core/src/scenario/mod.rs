//! Coefficients, densities, test functions, configuration and randomness
//! for every experiment.

mod coeff;
mod config;
mod density;
mod kernel;
mod rng;
mod testfn;

pub use coeff::{Coefficient, CoefficientSpec};
pub use config::{
    code_version, load_config, CampaignSection, RawCampaignSection, RawScenarioSection, ScenarioConfig, ScenarioManifest,
    ScenarioSection,
};
pub use density::{InitialDensity, MixtureComponent, Rho0Spec};
pub use kernel::{Kernel, KernelSpec};
pub use rng::{Domain, RngPlan, SeedPlanSummary};
pub use testfn::{TestFunction, TestFunctionSpec};

use rand::Rng;

use crate::error::Result;
use crate::grid::Grid;

/// A validated config with every spec resolved against the box.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub kernel: Kernel,
    pub sigma: Coefficient,
    pub nu: Coefficient,
    pub rho0: InitialDensity,
    pub test_functions: Vec<TestFunction>,
    pub rng: RngPlan,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let s = &config.scenario;
        let d = s.dimension;
        Ok(Self {
            grid: Grid::new(d, s.grid_size, s.half_width)?,
            kernel: config.kernel.resolve(d)?,
            sigma: config.sigma.resolve(d, s.half_width)?,
            nu: config.nu.resolve(d, s.half_width)?,
            rho0: config.rho0.resolve(d, s.half_width)?,
            test_functions: config.test_functions.clone(),
            rng: config.rng_plan(),
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.scenario.dimension
    }

    pub fn dt(&self) -> f64 {
        self.config.dt()
    }

    pub fn n_steps(&self) -> usize {
        self.config.scenario.n_steps
    }

    pub fn half_width(&self) -> f64 {
        self.config.scenario.half_width
    }

    pub fn alpha(&self) -> f64 {
        self.config.scenario.alpha
    }

    pub fn test_function(&self, name: &str) -> Option<&TestFunction> {
        self.test_functions.iter().find(|f| f.name == name)
    }
}

/// Draws `n` i.i.d. initial positions from `rho0`.
pub fn sample_initial<R: Rng + ?Sized>(rho0: &InitialDensity, n: usize, rng: &mut R) -> Vec<f64> {
    rho0.sample(n, rng)
}
