//! Under one fixed common-noise path, √N(⟨μ^N_T, φ⟩ − ⟨ρ_T, φ⟩) from
//! particles against the fluctuation SPDE, with k = 0 so the exact
//! conditional variance Var_{ρ_T}(φ) is known.

use fluctlab::fluctuation::InitialFluctuation;
use fluctlab::scenario::{CoefficientSpec, Scenario, ScenarioConfig, TestFunction};
use fluctlab::statlab::campaign::{conditional_clt, CltOptions};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    let s = &mut cfg.scenario;
    s.n_steps = 20;
    s.grid_size = 256;
    s.frequency_cutoff = 32.0;
    s.frequency_grid = 512;
    cfg.sigma = CoefficientSpec::constant_diagonal(1, 1.0);
    cfg.nu = CoefficientSpec::constant_diagonal(1, 1.0);
    cfg.test_functions = vec![TestFunction::bump("bump", vec![0.5], 2.0)];
    let scenario = Scenario::new(cfg)?;
    let opts = CltOptions {
        n: 400,
        replicas: 500,
        path_id: 3,
        initial: InitialFluctuation::GaussianBridge,
    };
    let report = conditional_clt(&scenario, &scenario.test_functions, &opts)?;
    for row in &report.rows {
        println!("{}", row.name);
        println!("  particle variance {:.5} ± {:.5}", row.particle_variance.value, row.particle_variance.se);
        println!("  SPDE variance     {:.5} ± {:.5}", row.spde_variance.value, row.spde_variance.se);
        println!("  exact             {:.5}", row.analytic_variance.unwrap_or(f64::NAN));
        println!("  KS normality p    {:.3}", row.normality.p_value);
        println!("  two-sample KS p   {:.3}", row.two_sample.p_value);
    }
    Ok(())
}
