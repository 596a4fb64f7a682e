//! Euler–Maruyama simulation of N particles with a Gaussian interaction
//! and common noise; prints the running empirical mean of a bump.

use fluctlab::particles::{run_trajectory, CommonNoisePath};
use fluctlab::scenario::{CoefficientSpec, KernelSpec, Scenario, ScenarioConfig, TestFunction};

fn main() -> fluctlab::Result<()> {
    let mut cfg = ScenarioConfig::default_for(1);
    cfg.scenario.n_steps = 50;
    cfg.kernel = KernelSpec::Gaussian {
        amplitude: 0.5,
        width: 1.0,
        direction: None,
    };
    cfg.sigma = CoefficientSpec::constant_diagonal(1, 0.5);
    cfg.nu = CoefficientSpec::constant_diagonal(1, 0.5);
    cfg.test_functions = vec![TestFunction::bump("bump", vec![0.0], 2.0)];
    let scenario = Scenario::new(cfg)?;

    let path = CommonNoisePath::for_scenario(&scenario, 0);
    let fns = scenario.test_functions.clone();
    let traj = run_trajectory(&scenario, 1000, 0, &path, None, &[], 10)?;
    let w = path.cumulative(path.n_steps());
    println!("W_T = {:.4}", w[0]);
    for (ens, step) in traj.snapshots.iter().zip(&traj.snapshot_steps) {
        let m = ens.mean_of(|x| x[0]);
        let b = ens.mean_of(|x| fns[0].value(x));
        println!("step {step:>3}  t = {:.2}  mean x = {m:+.4}  <bump, mu> = {b:.4}", ens.t);
    }
    Ok(())
}
