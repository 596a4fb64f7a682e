//! Histogram KL between pooled particle positions and ρ_T under one common
//! noise path, for increasing N. A one-particle proxy for the N-particle
//! relative entropy.

use fluctlab::scenario::{CoefficientSpec, KernelSpec, Scenario, ScenarioConfig};
use fluctlab::statlab::entropy::entropy_campaign;

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    cfg.scenario.n_steps = 10;
    cfg.kernel = KernelSpec::Gaussian {
        amplitude: 0.5,
        width: 1.0,
        direction: None,
    };
    cfg.nu = CoefficientSpec::constant_diagonal(1, 0.5);
    let scenario = Scenario::new(cfg)?;
    for row in entropy_campaign(&scenario, &[100, 400, 1600], 200, 0)? {
        let e = &row.estimate;
        println!(
            "N = {:>5}: KL {:.5} from {} samples, {} bins of width {:.3}",
            row.n, e.value, e.samples, e.bins_per_axis, e.bin_width
        );
    }
    Ok(())
}
