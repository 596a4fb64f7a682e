//! The limiting fluctuation SPDE with k = 0, ν = 0 and η₀ = 0: the
//! variance of ⟨η_T, φ⟩ across runs against ∫₀ᵀ ⟨|∇P_{T−s}φ|², ρ_s⟩ ds,
//! computed here by the left-point rule on the mean-field path.

use fluctlab::fluctuation::{conditional_moments, run_fluctuation, InitialFluctuation};
use fluctlab::meanfield::{solve_path, FpSolver};
use fluctlab::particles::CommonNoisePath;
use fluctlab::scenario::{CoefficientSpec, Scenario, ScenarioConfig, TestFunction};
use fluctlab::statlab::campaign::par_replicas;

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    let s = &mut cfg.scenario;
    s.final_time = 0.25;
    s.n_steps = 50;
    s.grid_size = 128;
    s.half_width = 6.0;
    s.frequency_cutoff = 16.0;
    s.frequency_grid = 256;
    cfg.sigma = CoefficientSpec::constant_diagonal(1, 1.0);
    cfg.test_functions = vec![TestFunction::bump("bump", vec![0.3], 2.0)];
    let scenario = Scenario::new(cfg)?;
    let solver = FpSolver::from_scenario(&scenario);
    let path = CommonNoisePath::for_scenario(&scenario, 0);
    let fns = scenario.test_functions.clone();
    let field = solve_path(&scenario, &solver, &path, &fns, 1)?;

    let runs = par_replicas(400, |r| {
        run_fluctuation(&scenario, &solver, &field, &path, InitialFluctuation::Zero, r, &fns)
    })?;
    let series: Vec<Vec<f64>> = runs.iter().map(|r| r.pairings.iter().map(|p| p[0]).collect()).collect();
    let m = conditional_moments(&series)?;
    let last = m.variance.len() - 1;
    println!("runs {}", m.runs);
    println!("mean     {:+.4} ± {:.4}", m.mean[last], m.mean_se[last]);
    println!("variance {:.5} ± {:.5}", m.variance[last], m.variance_se[last]);
    println!("martingale QV bound  T <|grad phi|^2, rho> ~ {:.5}", field.predicted_covariance(0, 0, last));
    Ok(())
}
