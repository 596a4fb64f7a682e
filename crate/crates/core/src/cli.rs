//! The `fluctlab` command line.
//!
//! Exit codes: 0 success, 1 a verdict failed, 2 usage / config /
//! precondition / incomplete or tampered run directory, 3 numerical abort.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluctuation::{conditional_moments, run_fluctuation, InitialFluctuation};
use crate::io::{csv_to_dat, verify_run, RunDir, RunManifest, MANIFEST};
use crate::meanfield::{solve_path, write_field, FpSolver};
use crate::particles::{run_trajectory, write_snapshot, CommonNoisePath};
use crate::scenario::{load_config, Scenario, ScenarioConfig};
use crate::statlab::campaign::{
    conditional_clt, converge_campaign, cross_term_check, fit_to_csv, increment_campaign, ledger_campaign,
    martingale_covariance, par_replicas, CltOptions, ConvergeOptions, IncrementOptions, LedgerOptions, NormKind,
};
use crate::statlab::elln::{default_kappa, elln_campaign, EllnOptions};
use crate::statlab::entropy::{entropy_campaign, entropy_to_csv};
use crate::statlab::{spearman, verdicts_from_json, verdicts_to_json, ScalingFit, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const VERDICTS: &str = "verdicts.json";

#[derive(Debug, Parser)]
#[command(name = "fluctlab", version, about = "Fluctuations of mean-field particle systems with common noise")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Scenario file (TOML) or the manifest.json of an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Default `runs/<command>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the replica / run count.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "FLUCTLAB_THREADS")]
    pub threads: Option<usize>,
    /// Overrides the snapshot stride (steps).
    #[arg(long, global = true)]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Particle trajectories: binary snapshots and test-function means.
    Simulate,
    /// Stochastic Fokker–Planck solution along the fixed common-noise path.
    Meanfield,
    /// Runs of the limiting fluctuation SPDE along the fixed path.
    Spde,
    /// Norm scaling in N (plain, interaction and bilinear).
    Converge,
    /// Exponential law of large numbers estimates.
    Elln,
    /// Conditional CLT: particle against SPDE pairings under one path.
    Clt,
    /// Fourth moments of fluctuation increments against the lag.
    Increments,
    /// Martingale covariances and the cross-term null.
    Crossterms,
    /// One-particle marginal KL proxy across N.
    Entropy,
    /// Markdown tables and gnuplot data for a directory of runs.
    Report {
        /// Directory holding run directories (or a single run).
        dir: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Meanfield => "meanfield",
            Command::Spde => "spde",
            Command::Converge => "converge",
            Command::Elln => "elln",
            Command::Clt => "clt",
            Command::Increments => "increments",
            Command::Crossterms => "crossterms",
            Command::Entropy => "entropy",
            Command::Report { .. } => "report",
        }
    }
}

/// Parses `argv` (including the program name), runs and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(verdicts) => {
            for v in &verdicts {
                println!("{} {} = {} {}", if v.pass { "PASS" } else { "FAIL" }, v.criterion, v.value, v.band_text());
            }
            if verdicts.iter().all(|v| v.pass) {
                EXIT_OK
            } else {
                EXIT_VERDICT
            }
        }
        Err(e) => {
            eprintln!("fluctlab: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Loads `--config` (TOML or a run manifest) and applies the overrides.
pub fn resolve_config(args: &GlobalArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        None => ScenarioConfig::default_for(1),
        Some(p) if p.extension().is_some_and(|e| e == "json") => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            RunManifest::from_json(&text)
                .map_err(|e| Error::Parse {
                    path: p.clone(),
                    message: e.to_string(),
                })?
                .config
        }
        Some(p) => load_config(p)?,
    };
    if let Some(seed) = args.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.scenario.replicas = runs;
    }
    if let Some(stride) = args.stride {
        cfg.scenario.snapshot_stride = stride;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command inside a pool of the requested size.
pub fn run(cli: &Cli) -> Result<Vec<Verdict>> {
    let threads = cli.global.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| execute(cli))
}

fn execute(cli: &Cli) -> Result<Vec<Verdict>> {
    let cfg = resolve_config(&cli.global)?;
    let name = cli.command.name();
    if let Command::Report { dir } = &cli.command {
        let out = cli.global.out.clone().unwrap_or_else(|| dir.join("report"));
        return emit_report(dir, &out, &cfg);
    }
    let out = cli.global.out.clone().unwrap_or_else(|| Path::new("runs").join(name));
    let scenario = Scenario::new(cfg.clone())?;
    let mut run = RunDir::create(&out, name, &cfg)?;
    let outcome = match &cli.command {
        Command::Simulate => simulate(&scenario, &mut run, cli.global.runs.unwrap_or(1)),
        Command::Meanfield => meanfield(&scenario, &mut run),
        Command::Spde => spde(&scenario, &mut run),
        Command::Converge => converge(&scenario, &mut run),
        Command::Elln => elln(&scenario, &mut run),
        Command::Clt => clt(&scenario, &mut run),
        Command::Increments => increments(&scenario, &mut run),
        Command::Crossterms => crossterms(&scenario, &mut run),
        Command::Entropy => entropy(&scenario, &mut run),
        Command::Report { .. } => unreachable!(),
    };
    let verdicts = match outcome {
        Ok(v) => v,
        Err(e) => {
            run.abandon();
            return Err(e);
        }
    };
    if !verdicts.is_empty() {
        run.write(VERDICTS, verdicts_to_json(&verdicts)?.as_bytes())?;
    }
    run.finish()?;
    Ok(verdicts)
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

#[derive(Serialize)]
struct SnapshotSidecar<'a> {
    file: &'a str,
    n: usize,
    dim: usize,
    t: f64,
    step: usize,
    replica: u64,
    layout: &'static str,
}

#[derive(Serialize)]
struct FieldSidecar<'a> {
    file: &'a str,
    dim: usize,
    size: usize,
    half_width: f64,
    t: f64,
    step: usize,
    layout: &'static str,
}

fn simulate(scenario: &Scenario, run: &mut RunDir, replicas: usize) -> Result<Vec<Verdict>> {
    let cfg = &scenario.config;
    let fns = &scenario.test_functions;
    let path = CommonNoisePath::for_scenario(scenario, cfg.campaign.fixed_path);
    let field = solve_path(scenario, &FpSolver::from_scenario(scenario), &path, fns, scenario.n_steps())?;
    let stride = cfg.scenario.snapshot_stride;
    let dt = scenario.dt();
    let mut means = String::from("n,replica,step,t,function,mean\n");
    for &n in &cfg.scenario.particle_counts {
        let trajs = par_replicas(replicas, |r| run_trajectory(scenario, n, r, &path, Some(&field), fns, stride))?;
        for (r, traj) in trajs.iter().enumerate() {
            for (ens, step) in traj.snapshots.iter().zip(&traj.snapshot_steps) {
                let file = format!("snapshots/n{n}_r{r}_s{step:06}.bin");
                std::fs::create_dir_all(run.root().join("snapshots")).map_err(|e| Error::io(run.root(), e))?;
                write_snapshot(&run.root().join(&file), ens)?;
                run.register(&file)?;
                let side = SnapshotSidecar {
                    file: &file,
                    n,
                    dim: ens.dim,
                    t: ens.t,
                    step: *step,
                    replica: r as u64,
                    layout: "LE: magic FLCTPOS1, u64 N, u32 d, u32 0, f64 t, N*d f64 row-major",
                };
                run.write(&file.replace(".bin", ".json"), &json(&side)?)?;
            }
            for (step, row) in traj.phi_means.iter().enumerate() {
                for (f, v) in fns.iter().zip(row) {
                    means.push_str(&format!("{n},{r},{step},{},{},{v}\n", step as f64 * dt, f.name));
                }
            }
        }
    }
    run.write("phi_means.csv", means.as_bytes())?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct MeanfieldSummary {
    path_id: u64,
    final_mass: f64,
    final_min: f64,
    final_max: f64,
    renormalizations: usize,
    worst_min_ratio: f64,
    worst_imaginary_residue: f64,
}

fn meanfield(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let cfg = &scenario.config;
    let fns = &scenario.test_functions;
    let grid = &scenario.grid;
    let solver = FpSolver::from_scenario(scenario);
    let path_id = cfg.campaign.fixed_path;
    let path = CommonNoisePath::for_scenario(scenario, path_id);
    let field = solve_path(scenario, &solver, &path, fns, cfg.scenario.snapshot_stride)?;
    std::fs::create_dir_all(run.root().join("fields")).map_err(|e| Error::io(run.root(), e))?;
    for (f, step) in field.snapshots.iter().zip(&field.snapshot_steps) {
        let file = format!("fields/rho_s{step:06}.bin");
        write_field(&run.root().join(&file), grid, f)?;
        run.register(&file)?;
        let side = FieldSidecar {
            file: &file,
            dim: grid.dim(),
            size: grid.size(),
            half_width: grid.half_width(),
            t: f.t,
            step: *step,
            layout: "LE: magic FLCTRHO1, u32 d, u32 M, f64 L, f64 t, M^d f64 row-major",
        };
        run.write(&file.replace(".bin", ".json"), &json(&side)?)?;
    }
    let last = field.final_field();
    let mut dat = String::from(if grid.dim() == 1 { "# x rho\n" } else { "# x y rho\n" });
    let mut x = [0.0; 2];
    for (i, v) in last.values.iter().enumerate() {
        grid.node(i, &mut x[..grid.dim()]);
        if grid.dim() == 2 && i > 0 && i % grid.size() == 0 {
            dat.push('\n');
        }
        for c in &x[..grid.dim()] {
            dat.push_str(&format!("{c} "));
        }
        dat.push_str(&format!("{v}\n"));
    }
    run.write("rho_final.dat", dat.as_bytes())?;
    let mut pairings = String::from("step,t,function,pairing\n");
    for (step, row) in field.phi_pairings.iter().enumerate() {
        for (f, v) in fns.iter().zip(row) {
            pairings.push_str(&format!("{step},{},{},{v}\n", step as f64 * field.dt, f.name));
        }
    }
    run.write("pairings.csv", pairings.as_bytes())?;
    let summary = MeanfieldSummary {
        path_id,
        final_mass: last.mass(grid),
        final_min: last.min(),
        final_max: last.max(),
        renormalizations: field.renormalizations,
        worst_min_ratio: field.worst_min_ratio,
        worst_imaginary_residue: field.worst_imaginary_residue,
    };
    run.write("summary.json", &json(&summary)?)?;
    Ok(Vec::new())
}

fn spde(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let cfg = &scenario.config;
    let fns = &scenario.test_functions;
    let solver = FpSolver::from_scenario(scenario);
    let path = CommonNoisePath::for_scenario(scenario, cfg.campaign.fixed_path);
    let field = solve_path(scenario, &solver, &path, fns, 1)?;
    let runs = cfg.scenario.replicas;
    let results = par_replicas(runs, |r| {
        run_fluctuation(scenario, &solver, &field, &path, InitialFluctuation::GaussianBridge, r, fns)
    })?;
    let stride = cfg.scenario.snapshot_stride;
    let steps = scenario.n_steps();
    let dt = scenario.dt();
    let mut csv = String::from("t,run,phi_name,pairing_value\n");
    for (r, res) in results.iter().enumerate() {
        for (step, row) in res.pairings.iter().enumerate() {
            if step % stride != 0 && step != steps {
                continue;
            }
            for (f, v) in fns.iter().zip(row) {
                csv.push_str(&format!("{},{r},{},{v}\n", step as f64 * dt, f.name));
            }
        }
    }
    run.write("pairings.csv", csv.as_bytes())?;
    if runs >= 100 {
        let mut m = String::from("t,phi_name,mean,mean_se,variance,variance_se\n");
        for (f, tf) in fns.iter().enumerate() {
            let series: Vec<Vec<f64>> = results
                .iter()
                .map(|res| res.pairings.iter().map(|row| row[f]).collect())
                .collect();
            let cm = conditional_moments(&series)?;
            for step in 0..=steps {
                m.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    step as f64 * dt,
                    tf.name,
                    cm.mean[step],
                    cm.mean_se[step],
                    cm.variance[step],
                    cm.variance_se[step]
                ));
            }
        }
        run.write("moments.csv", m.as_bytes())?;
    }
    Ok(Vec::new())
}

fn slope_verdict(name: &str, fit: &ScalingFit, lo: f64, hi: f64) -> Verdict {
    Verdict::within(name, fit.slope, Some(lo), Some(hi)).with_ci(fit.slope_ci)
}

fn converge(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let data = converge_campaign(scenario, &ConvergeOptions::from_scenario(scenario))?;
    run.write("converge.csv", data.to_csv().as_bytes())?;
    let mut verdicts = Vec::new();
    for (kind, p, band) in [
        (NormKind::Plain, 2, Some((-1.15, -0.85))),
        (NormKind::Plain, 4, None),
        (NormKind::Interaction, 2, Some((-1.15, -0.85))),
        (NormKind::Interaction, 4, None),
        (NormKind::Bilinear, 1, Some((-1.2, -0.8))),
    ] {
        let fit = data.fit(kind, p)?;
        run.write(&format!("fit_{}_p{p}.csv", kind.as_str()), fit_to_csv(&fit, "n").as_bytes())?;
        verdicts.push(match band {
            Some((lo, hi)) => slope_verdict(&format!("{} p={p} slope", kind.as_str()), &fit, lo, hi),
            None => Verdict::at_most(
                format!("{} p={p} N-scaled trend (Spearman)", kind.as_str()),
                data.scaled_trend(kind, p),
                0.3,
            ),
        });
    }
    Ok(verdicts)
}

fn elln(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let c = &scenario.config.campaign;
    let g = scenario
        .test_functions
        .first()
        .ok_or_else(|| Error::Precondition("the ELLN campaign needs a test function".into()))?;
    let kappa = match c.elln_kappa {
        Some(k) => k,
        None => default_kappa(scenario.dim(), scenario.alpha())?,
    };
    let mut csv = String::new();
    let mut verdicts = Vec::new();
    for &p in &c.elln_powers {
        let opts = EllnOptions {
            counts: c.elln_counts.clone(),
            samples: c.elln_samples,
            p,
            phi_sup: c.elln_phi_sup,
            kappa,
        };
        let report = elln_campaign(&scenario.rho0, &scenario.grid, g, &opts, &scenario.rng)?;
        let body = report.to_csv();
        if csv.is_empty() {
            csv.push_str(&body);
        } else {
            csv.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
        }
        if let (2, Some(bound)) = (p, report.bound) {
            let worst = report.rows.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max);
            verdicts.push(Verdict::at_most(format!("elln p={p} max estimate"), worst, bound));
        }
        verdicts.push(
            Verdict::at_most(format!("elln p={p} trend (Spearman)"), report.trend, 0.3).with_pass(!report.increasing),
        );
    }
    run.write("elln.csv", csv.as_bytes())?;
    Ok(verdicts)
}

fn clt(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let c = &scenario.config.campaign;
    let opts = CltOptions {
        n: c.clt_particles,
        replicas: scenario.config.scenario.replicas,
        path_id: c.fixed_path,
        initial: InitialFluctuation::GaussianBridge,
    };
    let report = conditional_clt(scenario, &scenario.test_functions, &opts)?;
    run.write("clt.csv", report.to_csv().as_bytes())?;
    let mut summary = String::from(
        "function,particle_variance,particle_variance_se,spde_variance,analytic_variance,variance_ratio,ks_normal_p,ks_two_sample_p\n",
    );
    let mut verdicts = Vec::new();
    for row in &report.rows {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.name,
            row.particle_variance.value,
            row.particle_variance.se,
            row.spde_variance.value,
            row.analytic_variance.map_or(String::new(), |v| v.to_string()),
            row.variance_ratio,
            row.normality.p_value,
            row.two_sample.p_value
        ));
        verdicts.push(Verdict::at_least(format!("{} KS normality p", row.name), row.normality.p_value, 0.01));
        verdicts.push(Verdict::within(
            format!("{} variance ratio", row.name),
            row.variance_ratio,
            Some(0.85),
            Some(1.15),
        ));
        verdicts.push(Verdict::at_least(format!("{} two-sample KS p", row.name), row.two_sample.p_value, 0.01));
    }
    run.write("clt_summary.csv", summary.as_bytes())?;
    Ok(verdicts)
}

fn increments(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let c = &scenario.config.campaign;
    let opts = IncrementOptions {
        n: c.increment_particles,
        replicas: scenario.config.scenario.replicas,
        lags: c.increment_lags.clone(),
        alpha: c.increment_alpha,
    };
    let data = increment_campaign(scenario, &opts)?;
    run.write("increments.csv", data.to_csv().as_bytes())?;
    let fit = data.fit()?;
    run.write("fit_increments.csv", fit_to_csv(&fit, "lag").as_bytes())?;
    Ok(vec![slope_verdict("increment slope", &fit, 1.6, 2.4)])
}

fn crossterms(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let c = &scenario.config.campaign;
    let opts = LedgerOptions {
        n: c.ledger_particles,
        replicas: scenario.config.scenario.replicas,
        windows: c.ledger_windows,
    };
    let data = ledger_campaign(scenario, &scenario.test_functions, &opts)?;
    run.write("ledger.csv", data.to_csv().as_bytes())?;
    let mut verdicts = Vec::new();
    let mut cov = String::from("f,g,empirical,se,predicted,band,pass\n");
    for r in martingale_covariance(&data) {
        cov.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.f, r.g, r.empirical.value, r.empirical.se, r.predicted, r.band, r.pass
        ));
        verdicts.push(Verdict::within(
            format!("cov({}, {})", r.f, r.g),
            r.empirical.value,
            Some(r.predicted - r.band),
            Some(r.predicted + r.band),
        ));
    }
    run.write("covariance.csv", cov.as_bytes())?;
    let mut cross = String::from("function,label,mean,se,z,pass\n");
    for r in cross_term_check(&data) {
        cross.push_str(&format!("{},{},{},{},{},{}\n", r.name, r.label, r.mean.value, r.mean.se, r.z, r.pass));
        verdicts.push(Verdict::at_most(format!("{} M*Mhat {} |z|", r.name, r.label), r.z, 4.0));
    }
    run.write("crossterms.csv", cross.as_bytes())?;
    Ok(verdicts)
}

fn entropy(scenario: &Scenario, run: &mut RunDir) -> Result<Vec<Verdict>> {
    let cfg = &scenario.config;
    let rows = entropy_campaign(
        scenario,
        &cfg.scenario.particle_counts,
        cfg.scenario.replicas,
        cfg.campaign.fixed_path,
    )?;
    run.write("entropy.csv", entropy_to_csv(&rows).as_bytes())?;
    let n: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let kl: Vec<f64> = rows.iter().map(|r| r.estimate.value).collect();
    let max = kl.iter().copied().fold(0.0, f64::max);
    let trend = if rows.len() >= 3 { spearman(&n, &kl) } else { 0.0 };
    Ok(vec![Verdict::at_most("marginal KL proxy trend (Spearman)", trend, 0.3)
        .with_pass(trend <= 0.3 || max <= 0.01)])
}

/// Markdown tables for every run under `dir`, plus `.dat` copies of their
/// CSVs. Refuses when any run is incomplete or fails its hash check.
/// Returns every verdict found.
pub fn emit_report(dir: &Path, out: &Path, cfg: &ScenarioConfig) -> Result<Vec<Verdict>> {
    let mut runs: Vec<PathBuf> = Vec::new();
    if dir.join(MANIFEST).exists() {
        runs.push(dir.to_path_buf());
    } else if dir.exists() {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let p = entry.map_err(|e| Error::io(dir, e))?.path();
            if p.is_dir() && p != out {
                runs.push(p);
            }
        }
        runs.sort();
    } else {
        return Err(Error::Incomplete(format!("{} does not exist", dir.display())));
    }
    let mut checked = Vec::new();
    for r in &runs {
        let manifest = verify_run(r)?;
        if manifest.command != "report" {
            checked.push((r.clone(), manifest));
        }
    }
    let mut report = RunDir::create(out, "report", cfg)?;
    let mut md = String::from("# fluctlab report\n");
    let mut tables = 0;
    let mut all = Vec::new();
    for (root, manifest) in &checked {
        let label = root.file_name().map_or_else(|| root.display().to_string(), |n| n.to_string_lossy().into_owned());
        for a in &manifest.artifacts {
            if a.path.ends_with(".csv") {
                let text = std::fs::read_to_string(root.join(&a.path)).map_err(|e| Error::io(root.join(&a.path), e))?;
                let name = format!("{label}/{}", a.path.replace(".csv", ".dat"));
                report.write(&name, csv_to_dat(&text).as_bytes())?;
            }
        }
        if manifest.artifact(VERDICTS).is_none() {
            continue;
        }
        let text = std::fs::read_to_string(root.join(VERDICTS)).map_err(|e| Error::io(root.join(VERDICTS), e))?;
        let verdicts = verdicts_from_json(&text)?;
        tables += 1;
        md.push_str(&format!(
            "\n## {label} ({}, seed {})\n\n| criterion | estimate | 95% CI | band | pass |\n|---|---|---|---|---|\n",
            manifest.command, manifest.seed_plan.master_seed
        ));
        for v in &verdicts {
            let ci = v.ci.map_or(String::from("-"), |(a, b)| format!("[{a:.4}, {b:.4}]"));
            md.push_str(&format!(
                "| {} | {:.6} | {ci} | {} | {} |\n",
                v.criterion.replace('|', "\\|"),
                v.value,
                v.band_text(),
                if v.pass { "pass" } else { "FAIL" }
            ));
        }
        all.extend(verdicts.into_iter().map(|mut v| {
            v.criterion = format!("{label}: {}", v.criterion);
            v
        }));
    }
    if tables == 0 {
        md.push_str("\nNo campaign verdicts found.\n");
    }
    report.write("report.md", md.as_bytes())?;
    report.finish()?;
    Ok(all)
}
