//! E‖η^N_t − η^N_s‖⁴ in H^{-α}, α > d/2 + 2, against the lag |t − s|.

use fluctlab::scenario::{CoefficientSpec, KernelSpec, Scenario, ScenarioConfig};
use fluctlab::statlab::campaign::{increment_campaign, IncrementOptions};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    let s = &mut cfg.scenario;
    s.n_steps = 64;
    s.frequency_cutoff = 16.0;
    s.frequency_grid = 256;
    cfg.kernel = KernelSpec::Gaussian {
        amplitude: 0.5,
        width: 1.0,
        direction: None,
    };
    cfg.sigma = CoefficientSpec::constant_diagonal(1, 0.5);
    cfg.nu = CoefficientSpec::constant_diagonal(1, 0.5);
    let scenario = Scenario::new(cfg)?;
    let opts = IncrementOptions {
        n: 300,
        replicas: 40,
        lags: vec![1, 2, 4, 8, 16],
        alpha: 2.6,
    };
    let data = increment_campaign(&scenario, &opts)?;
    for (lag, e) in data.moments() {
        println!("lag {lag:.5}  {:.4e} ± {:.1e}", e.value, e.se);
    }
    let fit = data.fit()?;
    println!("slope {:.3}  CI [{:.3}, {:.3}]", fit.slope, fit.slope_ci.0, fit.slope_ci.1);
    Ok(())
}
