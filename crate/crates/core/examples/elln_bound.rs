//! log E exp(N|⟨φ, μ_N⊗μ_N⟩|^p) for a cancelling φ with ‖φ‖∞ = 0.01,
//! against the closed-form bound for p = 2.

use fluctlab::scenario::{Scenario, ScenarioConfig, TestFunction};
use fluctlab::statlab::elln::{elln_campaign, EllnOptions};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    cfg.test_functions = vec![TestFunction::bump("g", vec![0.2], 1.5)];
    let scenario = Scenario::new(cfg)?;
    let g = &scenario.test_functions[0];
    for p in [2, 4] {
        let opts = EllnOptions {
            counts: vec![8, 32, 128, 512],
            samples: 20_000,
            p,
            phi_sup: 0.01,
            kappa: 1.0,
        };
        let report = elln_campaign(&scenario.rho0, &scenario.grid, g, &opts, &scenario.rng)?;
        println!("p = {p}, bound {:?}, increasing: {}", report.bound, report.increasing);
        for r in &report.rows {
            println!("    N = {:>4}  {:.3e}  [{:.3e}, {:.3e}]{}", r.n, r.estimate, r.ci.0, r.ci.1,
                if r.heavy_tail { "  heavy tail" } else { "" });
        }
    }
    Ok(())
}
