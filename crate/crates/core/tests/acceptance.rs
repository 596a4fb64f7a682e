//! Acceptance criteria 1 to 12, one PASS/FAIL line each.
//!
//! Campaigns go through the `fluctlab` binary with the configs in
//! `configs/acceptance`; their run directories are kept under the cargo
//! target tmpdir so `fluctlab report` can be pointed at them afterwards.
//! `FLUCTLAB_ACCEPT=1,2,12` restricts the run to a subset.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use fluctlab::grid::Grid;
use fluctlab::io::RunManifest;
use fluctlab::meanfield::{solve_path, FpSolver};
use fluctlab::particles::{pairwise_drift, CommonNoisePath};
use fluctlab::scenario::{load_config, KernelSpec, Scenario, ScenarioConfig};
use fluctlab::sobolev::{empirical_fourier, h_neg_alpha_norm, interaction_spectrum, pair_test_bilinear, FrequencyLattice};
use fluctlab::statlab::{verdicts_from_json, Verdict};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance")
}

fn work() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn fluctlab(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_fluctlab"))
        .args(args)
        .env_remove("FLUCTLAB_THREADS")
        .output()
        .expect("fluctlab runs");
    let code = out.status.code().unwrap_or(-1);
    if code != 0 && code != 1 {
        panic!("fluctlab {args:?} exited {code}: {}", String::from_utf8_lossy(&out.stderr));
    }
    code
}

/// Runs a campaign from a config and returns its verdicts.
fn campaign(command: &str, config: &Path, out: &Path) -> Vec<Verdict> {
    fluctlab(&[command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    verdicts(out)
}

fn verdicts(dir: &Path) -> Vec<Verdict> {
    let text = std::fs::read_to_string(dir.join("verdicts.json")).expect("verdicts.json");
    verdicts_from_json(&text).unwrap()
}

fn summarize<'a>(vs: impl IntoIterator<Item = &'a Verdict>) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for v in vs {
        pass &= v.pass;
        parts.push(format!(
            "{} = {} in {}{}",
            v.criterion,
            num(v.value),
            v.band_text(),
            if v.pass { "" } else { " (FAIL)" }
        ));
    }
    (pass, parts.join("; "))
}

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn pick<'a>(vs: &'a [Verdict], f: impl Fn(&str) -> bool + 'a) -> impl Iterator<Item = &'a Verdict> + 'a {
    vs.iter().filter(move |v| f(&v.criterion))
}

fn budget(secs: f64, limit: f64) -> (bool, String) {
    (secs <= limit, format!("runtime {secs:.1} s (budget {limit:.0} s)"))
}

// criterion 1

fn gaussian_oracle_errors(cfg: &ScenarioConfig) -> Vec<f64> {
    let scenario = Scenario::new(cfg.clone()).unwrap();
    let solver = FpSolver::from_scenario(&scenario);
    let grid = &scenario.grid;
    let steps = scenario.n_steps();
    let t = cfg.scenario.final_time;
    (0..5)
        .map(|seed| {
            let path = CommonNoisePath::for_scenario(&scenario, seed);
            let rho = solve_path(&scenario, &solver, &path, &[], steps).unwrap();
            let rho = rho.final_field();
            let mean = 0.5 * path.cumulative(steps)[0];
            let var = 0.25 + 0.64 * t;
            let (mut err, mut norm) = (0.0, 0.0);
            for (i, v) in rho.values.iter().enumerate() {
                let x = min_image(grid.coord(i) - mean, grid.half_width());
                let exact = (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
                err += (v - exact).powi(2);
                norm += exact * exact;
            }
            (err / norm).sqrt()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let cfg = load_config(&configs().join("gaussian_oracle.toml")).unwrap();
    let start = Instant::now();
    let errors = gaussian_oracle_errors(&cfg);
    let (fast, time) = budget(start.elapsed().as_secs_f64(), 10.0);
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-3 && fast,
        detail: format!("max relative L2 error over 5 paths {worst:.2e} (<= 1e-3), {time}"),
    }
}

// criterion 2

fn two_atom_norm() -> (f64, f64) {
    let lattice = FrequencyLattice::new(1, 256.0, 1 << 16).unwrap();
    let spec = empirical_fourier(&[1.0, -1.0], &lattice).unwrap();
    let r = h_neg_alpha_norm(&spec, 1.0).unwrap();
    (r.norm_sq, r.residual_bound)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (value, residual) = two_atom_norm();
    let (fast, time) = budget(start.elapsed().as_secs_f64(), 1.0);
    let exact = (1.0 + (-2.0f64).exp()) / 4.0;
    let err = (value - exact).abs();
    Outcome {
        pass: err <= residual && err <= 1e-3 && fast,
        detail: format!("|norm - (1+e^-2)/4| = {err:.3e}, reported residual {residual:.3e}, {time}"),
    }
}

// criteria 3 to 5 share one sweep

fn converge_verdicts(dirs: &mut BTreeMap<&'static str, Vec<Verdict>>, secs: &mut f64) -> Vec<Verdict> {
    if let Some(v) = dirs.get("converge") {
        return v.clone();
    }
    let start = Instant::now();
    let v = campaign("converge", &configs().join("converge.toml"), &work().join("converge"));
    *secs = start.elapsed().as_secs_f64();
    dirs.insert("converge", v.clone());
    v
}

fn converge_outcome(vs: &[Verdict], prefix: &str, secs: f64) -> Outcome {
    let (ok, text) = summarize(pick(vs, |c| c.starts_with(prefix)));
    let (fast, time) = budget(secs, 1200.0);
    Outcome {
        pass: ok && fast,
        detail: format!("{text}; sweep {time}"),
    }
}

// criteria 6 and 7 share one ledger campaign

fn ledger_verdicts(dirs: &mut BTreeMap<&'static str, Vec<Verdict>>, secs: &mut f64) -> Vec<Verdict> {
    if let Some(v) = dirs.get("crossterms") {
        return v.clone();
    }
    let start = Instant::now();
    let v = campaign("crossterms", &configs().join("ledger.toml"), &work().join("crossterms"));
    *secs = start.elapsed().as_secs_f64();
    dirs.insert("crossterms", v.clone());
    v
}

// criterion 12: independent brute-force oracles

fn min_image(dx: f64, l: f64) -> f64 {
    dx - 2.0 * l * ((dx + l) / (2.0 * l)).floor()
}

#[derive(Clone, Copy)]
enum Brute {
    Gaussian { a: f64, w: f64, e: [f64; 2] },
    Gradient { a: f64, w: f64 },
    Bump { a: f64, r: f64, e: [f64; 2] },
}

impl Brute {
    fn spec(&self, d: usize) -> KernelSpec {
        match *self {
            Brute::Gaussian { a, w, e } => KernelSpec::Gaussian {
                amplitude: a,
                width: w,
                direction: Some(e[..d].to_vec()),
            },
            Brute::Gradient { a, w } => KernelSpec::GaussianGradient { amplitude: a, width: w },
            Brute::Bump { a, r, e } => KernelSpec::Bump {
                amplitude: a,
                radius: r,
                direction: Some(e[..d].to_vec()),
            },
        }
    }

    fn eval(&self, x: &[f64]) -> [f64; 2] {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mut out = [0.0; 2];
        match *self {
            Brute::Gaussian { a, w, e } => {
                let s = a * (-r2 / (2.0 * w * w)).exp();
                for (i, o) in out.iter_mut().enumerate().take(x.len()) {
                    *o = s * e[i];
                }
            }
            Brute::Gradient { a, w } => {
                let s = a * (-r2 / (2.0 * w * w)).exp() / w;
                for (i, o) in out.iter_mut().enumerate().take(x.len()) {
                    *o = s * x[i];
                }
            }
            Brute::Bump { a, r, e } => {
                if r2 < r * r {
                    let s = a * (1.0 - 1.0 / (1.0 - r2 / (r * r))).exp();
                    for (i, o) in out.iter_mut().enumerate().take(x.len()) {
                        *o = s * e[i];
                    }
                }
            }
        }
        out
    }

    fn at(&self, x: &[f64], y: &[f64], l: f64) -> [f64; 2] {
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| min_image(a - b, l)).collect();
        self.eval(&dx)
    }
}

fn random_kernel(rng: &mut ChaCha8Rng, d: usize) -> Brute {
    let mut e = [0.0; 2];
    let theta: f64 = rng.gen_range(0.0..2.0 * PI);
    if d == 1 {
        e[0] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    } else {
        e = [theta.cos(), theta.sin()];
    }
    let a = rng.gen_range(0.1..2.0);
    match rng.gen_range(0..3) {
        0 => Brute::Gaussian { a, w: rng.gen_range(0.3..1.5), e },
        // narrow enough that k vanishes to rounding at the box edge
        1 => Brute::Gradient { a, w: rng.gen_range(0.2..0.4) },
        _ => Brute::Bump { a, r: rng.gen_range(0.5..3.5), e },
    }
}

fn close(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// Largest relative discrepancy over the three routines for one instance.
fn oracle_instance(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.gen_range(1..=2);
    let n = rng.gen_range(1..=5);
    let l = 4.0;
    let k = random_kernel(rng, d);
    let kernel = k.spec(d).resolve(d).unwrap();
    let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-l..l)).collect();
    let pts: Vec<&[f64]> = x.chunks(d).collect();
    let mut worst = 0.0f64;

    // -(1/N) Σ_j k(X_i − X_j), j = i included
    let drift = pairwise_drift(&x, d, &kernel, l);
    let conv: Vec<[f64; 2]> = pts
        .iter()
        .map(|xi| {
            let mut s = [0.0; 2];
            for xj in &pts {
                let kv = k.at(xi, xj, l);
                for a in 0..d {
                    s[a] += kv[a] / n as f64;
                }
            }
            s
        })
        .collect();
    for i in 0..n {
        for a in 0..d {
            worst = worst.max(close(drift[i * d + a], -conv[i][a]));
        }
    }

    // (2π)^{-d/2} (i/N) Σ_j e^{-iξ·X_j} ξ·(k*μ)(X_j)
    let lattice = FrequencyLattice::new(d, 3.0, 8).unwrap();
    let spec = interaction_spectrum(&x, &kernel, l, &lattice).unwrap();
    let c = (2.0 * PI).powf(-(d as f64) / 2.0);
    for f in 0..lattice.len() {
        let xi = lattice.node(f);
        let mut want = Complex64::new(0.0, 0.0);
        for (j, xj) in pts.iter().enumerate() {
            let phase: f64 = (0..d).map(|a| xi[a] * xj[a]).sum();
            let dot: f64 = (0..d).map(|a| xi[a] * conv[j][a]).sum();
            want += Complex64::from_polar(1.0, -phase) * dot;
        }
        want *= Complex64::new(0.0, c / n as f64);
        let diff = (spec.values[f] - want).norm() / want.norm().max(1.0);
        worst = worst.max(diff);
    }

    // ∫∫ φ(x)·k(x − y) d(μ − ρ)(y) d(μ − ρ)(x) over signed atoms
    let m = if d == 1 { 16 } else { 8 };
    let grid = Grid::new(d, m, l).unwrap();
    let mut rho: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let mass: f64 = rho.iter().sum::<f64>() * grid.cell_volume();
    rho.iter_mut().for_each(|r| *r /= mass);
    let (b, th): ([f64; 2], [f64; 2]) = (
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        [rng.gen_range(0.0..PI), rng.gen_range(0.0..PI)],
    );
    let phi = move |y: &[f64], out: &mut [f64]| {
        let s: f64 = y.iter().zip(&b).map(|(u, v)| u * v).sum();
        for (a, o) in out.iter_mut().enumerate() {
            *o = (s + th[a]).cos() + 0.1 * a as f64;
        }
    };
    let got = pair_test_bilinear(&x, &grid, &rho, &phi, &kernel);
    let mut atoms: Vec<(Vec<f64>, f64)> = pts.iter().map(|p| (p.to_vec(), 1.0 / n as f64)).collect();
    let mut node = vec![0.0; d];
    for (j, r) in rho.iter().enumerate() {
        grid.node(j, &mut node);
        atoms.push((node.clone(), -r * grid.cell_volume()));
    }
    let mut want = 0.0;
    let mut p = [0.0; 2];
    for (xa, wa) in &atoms {
        phi(xa, &mut p[..d]);
        for (xb, wb) in &atoms {
            let kv = k.at(xa, xb, l);
            want += wa * wb * (0..d).map(|a| p[a] * kv[a]).sum::<f64>();
        }
    }
    worst.max(close(got, want))
}

fn oracle_errors() -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    (0..100).map(|_| oracle_instance(&mut rng)).collect()
}

fn criterion_12() -> Outcome {
    let start = Instant::now();
    let worst = oracle_errors().into_iter().fold(0.0, f64::max);
    let (fast, time) = budget(start.elapsed().as_secs_f64(), 10.0);
    Outcome {
        pass: worst <= 1e-12 && fast,
        detail: format!("100 instances, N <= 5, d in {{1, 2}}: max relative error {worst:.2e} (<= 1e-12), {time}"),
    }
}

// criterion 11

fn artifacts(dir: &Path) -> Vec<(String, String)> {
    let m = RunManifest::from_json(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let mut a: Vec<(String, String)> = m.artifacts.into_iter().map(|a| (a.path, a.sha256)).collect();
    a.sort();
    a
}

/// Runs `command` on `config`, reruns from the manifest on one thread, and
/// reports whether every artifact matched bitwise.
fn rerun_matches(command: &str, config: &Path, name: &str) -> bool {
    let (a, b) = (work().join("rerun").join(format!("{name}_a")), work().join("rerun").join(format!("{name}_b")));
    fluctlab(&[command, "--config", config.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    let manifest = a.join("manifest.json");
    fluctlab(&[
        command,
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    let (x, y) = (artifacts(&a), artifacts(&b));
    !x.is_empty() && x == y
}

fn reduced(name: &str, edit: impl FnOnce(&mut ScenarioConfig)) -> PathBuf {
    let mut cfg = load_config(&configs().join(format!("{name}.toml"))).unwrap();
    edit(&mut cfg);
    let path = work().join("rerun").join(format!("{name}_reduced.toml"));
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    cfg.save(&path).unwrap();
    path
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let mut failed = Vec::new();
    let c = configs();
    // the cheap campaigns at full size
    for (cmd, file) in [("meanfield", "gaussian_oracle"), ("clt", "clt"), ("elln", "elln")] {
        if !rerun_matches(cmd, &c.join(format!("{file}.toml")), file) {
            failed.push(file.to_string());
        }
    }
    // the sweeps at reduced size
    let converge = reduced("converge", |cfg| {
        cfg.scenario.particle_counts = vec![100, 200, 400];
        cfg.scenario.replicas = 8;
        cfg.scenario.n_steps = 4;
        cfg.scenario.snapshot_stride = 4;
    });
    let ledger = reduced("ledger", |cfg| {
        cfg.scenario.replicas = 50;
        cfg.campaign.ledger_particles = 100;
    });
    let increments = reduced("increments", |cfg| {
        cfg.scenario.replicas = 8;
        cfg.campaign.increment_particles = 200;
    });
    for (cmd, path, name) in [
        ("converge", converge, "converge"),
        ("crossterms", ledger, "ledger"),
        ("increments", increments, "increments"),
    ] {
        if !rerun_matches(cmd, &path, name) {
            failed.push(name.to_string());
        }
    }
    // in-process oracles
    let cfg = load_config(&c.join("gaussian_oracle.toml")).unwrap();
    let same = |a: Vec<f64>, b: Vec<f64>| a.iter().map(|v| v.to_bits()).eq(b.iter().map(|v| v.to_bits()));
    if !same(gaussian_oracle_errors(&cfg), gaussian_oracle_errors(&cfg)) {
        failed.push("gaussian oracle".into());
    }
    let (n1, n2) = (two_atom_norm(), two_atom_norm());
    if n1.0.to_bits() != n2.0.to_bits() {
        failed.push("two-atom norm".into());
    }
    if !same(oracle_errors(), oracle_errors()) {
        failed.push("brute-force oracles".into());
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("all artifacts bitwise identical on rerun from the manifest with one thread ({secs:.0} s)")
        } else {
            format!("differing: {}", failed.join(", "))
        },
    }
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("FLUCTLAB_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().map_or(true, |o| o.contains(&i));
    let _ = std::fs::remove_dir_all(work());
    std::fs::create_dir_all(work()).unwrap();
    println!("acceptance runs in {}", work().display());

    let mut shared = BTreeMap::new();
    let (mut sweep_secs, mut ledger_secs) = (0.0, 0.0);
    let mut failures = 0;
    for id in 1..=12u32 {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let outcome = match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => {
                let v = converge_verdicts(&mut shared, &mut sweep_secs);
                converge_outcome(&v, "plain", sweep_secs)
            }
            4 => {
                let v = converge_verdicts(&mut shared, &mut sweep_secs);
                converge_outcome(&v, "interaction", sweep_secs)
            }
            5 => {
                let v = converge_verdicts(&mut shared, &mut sweep_secs);
                converge_outcome(&v, "bilinear", sweep_secs)
            }
            6 | 7 => {
                let v = ledger_verdicts(&mut shared, &mut ledger_secs);
                let (ok, text) = if id == 6 {
                    summarize(pick(&v, |c| c.starts_with("cov(")))
                } else {
                    summarize(pick(&v, |c| c.contains("M*Mhat")))
                };
                let (fast, time) = budget(ledger_secs, 600.0);
                Outcome {
                    pass: ok && fast,
                    detail: format!("{text}; campaign {time}"),
                }
            }
            8 => {
                let v = campaign("clt", &configs().join("clt.toml"), &work().join("clt"));
                let (ok, text) = summarize(&v);
                let (fast, time) = budget(start.elapsed().as_secs_f64(), 1800.0);
                Outcome {
                    pass: ok && fast,
                    detail: format!("{text}; {time}"),
                }
            }
            9 => {
                let v = campaign("elln", &configs().join("elln.toml"), &work().join("elln"));
                let (ok, text) = summarize(&v);
                let (fast, time) = budget(start.elapsed().as_secs_f64(), 300.0);
                Outcome {
                    pass: ok && fast,
                    detail: format!("{text}; {time}"),
                }
            }
            10 => {
                let v = campaign("increments", &configs().join("increments.toml"), &work().join("increments"));
                let (ok, text) = summarize(&v);
                let (fast, time) = budget(start.elapsed().as_secs_f64(), 900.0);
                Outcome {
                    pass: ok && fast,
                    detail: format!("{text}; {time}"),
                }
            }
            11 => criterion_11(),
            12 => criterion_12(),
            _ => unreachable!(),
        };
        if !outcome.pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2}: {}  {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
