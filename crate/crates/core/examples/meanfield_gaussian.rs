//! With k = 0 and constant σ, ν the conditional density is Gaussian with
//! mean ν W_t and variance s₀² + σ² t. The spectral solver reproduces it.

use fluctlab::meanfield::{solve_path, FpSolver};
use fluctlab::particles::CommonNoisePath;
use fluctlab::scenario::{CoefficientSpec, Rho0Spec, Scenario, ScenarioConfig};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    let s = &mut cfg.scenario;
    s.final_time = 0.5;
    s.n_steps = 400;
    s.grid_size = 256;
    s.frequency_cutoff = 32.0;
    s.frequency_grid = 512;
    cfg.sigma = CoefficientSpec::constant_diagonal(1, 0.8);
    cfg.nu = CoefficientSpec::constant_diagonal(1, 0.5);
    cfg.rho0 = Rho0Spec::standard_gaussian(1, 0.5);
    let scenario = Scenario::new(cfg)?;
    let solver = FpSolver::from_scenario(&scenario);
    let grid = &scenario.grid;

    for seed in 0..5 {
        let path = CommonNoisePath::for_scenario(&scenario, seed);
        let field = solve_path(&scenario, &solver, &path, &[], 400)?;
        let rho = field.final_field();
        let mean = 0.5 * path.cumulative(400)[0];
        let var = 0.25 + 0.64 * 0.5;
        let (mut err, mut norm) = (0.0, 0.0);
        for (i, v) in rho.values.iter().enumerate() {
            let mut x = fluctlab::grid::wrap_displacement(grid.coord(i) - mean, grid.half_width());
            x = (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            err += (v - x).powi(2);
            norm += x * x;
        }
        println!("path {seed}: mean {mean:+.4}, relative L2 error {:.2e}", (err / norm).sqrt());
    }
    Ok(())
}
