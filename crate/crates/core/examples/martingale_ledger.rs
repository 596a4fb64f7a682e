//! Martingale parts M^N(φ) and common-noise parts M̂^N(φ): covariance
//! against the mean-field quadrature, and the M·M̂ cross-term null.

use fluctlab::scenario::{CoefficientSpec, KernelSpec, Scenario, ScenarioConfig, TestFunction};
use fluctlab::statlab::campaign::{cross_term_check, ledger_campaign, martingale_covariance, LedgerOptions};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    cfg.scenario.n_steps = 20;
    cfg.kernel = KernelSpec::Gaussian {
        amplitude: 0.5,
        width: 1.0,
        direction: None,
    };
    cfg.nu = CoefficientSpec::constant_diagonal(1, 1.0);
    cfg.test_functions = vec![
        TestFunction::bump("left", vec![-1.0], 2.0),
        TestFunction::bump("right", vec![1.0], 2.0),
    ];
    let scenario = Scenario::new(cfg)?;
    let opts = LedgerOptions {
        n: 200,
        replicas: 400,
        windows: 4,
    };
    let data = ledger_campaign(&scenario, &scenario.test_functions, &opts)?;
    for r in martingale_covariance(&data) {
        println!(
            "cov({}, {}) = {:.5} ± {:.5}   predicted {:.5}   {}",
            r.f, r.g, r.empirical.value, r.empirical.se, r.predicted,
            if r.pass { "ok" } else { "off" }
        );
    }
    for r in cross_term_check(&data) {
        println!("{} {:<8}  mean {:+.2e}  z {:.2}", r.name, r.label, r.mean.value, r.z);
    }
    Ok(())
}
