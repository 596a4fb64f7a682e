//! E‖μ^N_T − ρ_T‖² in H^{-α} against N, with the interaction and bilinear
//! norms alongside, fitted in log-log coordinates.

use fluctlab::scenario::{CoefficientSpec, KernelSpec, Scenario, ScenarioConfig};
use fluctlab::statlab::campaign::{converge_campaign, ConvergeOptions, NormKind};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    let s = &mut cfg.scenario;
    s.particle_counts = vec![100, 200, 400, 800];
    s.replicas = 40;
    s.n_steps = 10;
    s.final_time = 0.2;
    cfg.kernel = KernelSpec::Gaussian {
        amplitude: 0.5,
        width: 1.0,
        direction: None,
    };
    cfg.sigma = CoefficientSpec::constant_diagonal(1, 0.5);
    cfg.nu = CoefficientSpec::constant_diagonal(1, 0.5);
    let scenario = Scenario::new(cfg)?;
    let data = converge_campaign(&scenario, &ConvergeOptions::from_scenario(&scenario))?;
    for (kind, p) in [(NormKind::Plain, 2), (NormKind::Interaction, 2), (NormKind::Bilinear, 1)] {
        let fit = data.fit(kind, p)?;
        println!(
            "{:<12} p={p}: slope {:+.3}  CI [{:+.3}, {:+.3}]",
            kind.as_str(),
            fit.slope,
            fit.slope_ci.0,
            fit.slope_ci.1
        );
        for (n, e) in data.moments(kind, p) {
            println!("    N = {n:>4}  {:.4e} ± {:.1e}", e.value, e.se);
        }
    }
    println!("N-scaled 4th moment trend (plain): {:+.2}", data.scaled_trend(NormKind::Plain, 4));
    Ok(())
}
