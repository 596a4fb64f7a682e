use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[scenario]
particle_counts = [50, 100, 200]
final_time = 0.1
n_steps = 16
half_width = 4.0
grid_size = 64
frequency_cutoff = 8.0
frequency_grid = 128
replicas = 20
snapshot_stride = 8

[campaign]
increment_particles = 100
ledger_particles = 50
elln_counts = [8, 16, 32]
elln_samples = 1000

[kernel]
kind = "gaussian"
amplitude = 0.5
width = 1.0

[sigma]
kind = "constant"
matrix = [[0.5]]

[nu]
kind = "constant"
matrix = [[0.5]]
"#;

fn fluctlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluctlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FLUCTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    fluctlab(args, cwd).status.code().expect("exit code")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = fluctlab(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["simulate", "meanfield", "spde", "converge", "elln", "clt", "increments", "crossterms", "entropy", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(code(&["--version"], dir.path()), 0);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["converge", "--config", "missing.toml"], dir.path()), 2);
    assert_eq!(code(&["converge", "--no-such-flag"], dir.path()), 2);
    assert_eq!(code(&["frobnicate"], dir.path()), 2);
    assert_eq!(code(&[], dir.path()), 2);
    std::fs::write(dir.path().join("bad.toml"), "[scenario]\nn_steps = 0\n").unwrap();
    assert_eq!(code(&["meanfield", "--config", "bad.toml"], dir.path()), 2);
    let out = fluctlab(&["converge", "--no-such-flag"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn precondition_failure_exits_two_and_leaves_no_directory() {
    let dir = setup();
    // 20 replicas are too few for distributional claims
    assert_eq!(code(&["clt", "--config", "tiny.toml", "--out", "clt"], dir.path()), 2);
    assert!(!dir.path().join("clt").exists());
}

#[test]
fn numerical_abort_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\nn_steps = 1\nfinal_time = 1.0\n\n[kernel]\nkind = \"gaussian\"\namplitude = 1e6\nwidth = 1.0\n";
    std::fs::write(dir.path().join("unstable.toml"), cfg).unwrap();
    assert_eq!(code(&["meanfield", "--config", "unstable.toml", "--out", "mf"], dir.path()), 3);
}

#[test]
fn verdict_failure_exits_one() {
    let dir = setup();
    // without noise the increments are smooth in time: fourth moments grow
    // like lag^4, well outside the diffusive band
    let cfg = TINY
        .replace("[sigma]\nkind = \"constant\"\nmatrix = [[0.5]]", "[sigma]\nkind = \"constant\"\nmatrix = [[0.0]]")
        .replace("[nu]\nkind = \"constant\"\nmatrix = [[0.5]]", "[nu]\nkind = \"constant\"\nmatrix = [[0.0]]");
    assert!(cfg.contains("[[0.0]]"));
    std::fs::write(dir.path().join("still.toml"), cfg).unwrap();
    let out = fluctlab(&["increments", "--config", "still.toml", "--out", "inc"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("inc/verdicts.json")).unwrap()).unwrap();
    assert_eq!(v[0]["pass"], false);
    assert!(v[0]["value"].as_f64().unwrap() > 3.0);
    assert!(dir.path().join("inc/manifest.json").exists());
}

#[test]
fn campaign_outputs_manifest_and_verdicts() {
    let dir = setup();
    assert_eq!(code(&["converge", "--config", "tiny.toml", "--out", "conv"], dir.path()), 0);
    let root = dir.path().join("conv");
    for f in ["manifest.json", "verdicts.json", "converge.csv", "fit_plain_p2.csv", "fit_bilinear_p1.csv"] {
        assert!(root.join(f).exists(), "{f}");
    }
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("verdicts.json")).unwrap()).unwrap();
    for row in v.as_array().unwrap() {
        for key in ["criterion", "value", "band", "pass"] {
            assert!(row.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn rerun_from_manifest_reproduces_hashes() {
    let dir = setup();
    assert_eq!(code(&["crossterms", "--config", "tiny.toml", "--out", "a", "--seed", "9"], dir.path()), 0);
    assert_eq!(
        code(&["crossterms", "--config", "a/manifest.json", "--out", "b", "--threads", "1"], dir.path()),
        0
    );
    let m = |p: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(p).join("manifest.json")).unwrap()).unwrap()
    };
    let (a, b) = (m("a"), m("b"));
    assert_eq!(a["artifacts"], b["artifacts"]);
    assert_eq!(a["config"]["scenario"]["seed"], 9);
}

#[test]
fn simulate_meanfield_spde_emit_documented_files() {
    let dir = setup();
    let p = dir.path();
    assert_eq!(code(&["simulate", "--config", "tiny.toml", "--out", "sim"], p), 0);
    assert!(p.join("sim/phi_means.csv").exists());
    assert!(p.join("sim/snapshots/n200_r0_s000016.bin").exists());
    assert!(p.join("sim/snapshots/n200_r0_s000016.json").exists());
    let ens = fluctlab::particles::read_snapshot(&p.join("sim/snapshots/n50_r0_s000008.bin")).unwrap();
    assert_eq!(ens.len(), 50);

    assert_eq!(code(&["meanfield", "--config", "tiny.toml", "--out", "mf"], p), 0);
    let (grid, field) = fluctlab::meanfield::read_field(&p.join("mf/fields/rho_s000016.bin")).unwrap();
    assert!((field.mass(&grid) - 1.0).abs() < 1e-6);
    assert!(p.join("mf/summary.json").exists() && p.join("mf/rho_final.dat").exists());

    assert_eq!(code(&["spde", "--config", "tiny.toml", "--out", "spde", "--runs", "100"], p), 0);
    let csv = std::fs::read_to_string(p.join("spde/pairings.csv")).unwrap();
    assert!(csv.starts_with("t,run,phi_name,pairing_value\n"));
    assert!(p.join("spde/moments.csv").exists());
}

#[test]
fn report_tables_and_integrity() {
    let dir = setup();
    let p = dir.path();
    std::fs::create_dir(p.join("empty")).unwrap();
    assert_eq!(code(&["report", "empty"], p), 0);
    let md = std::fs::read_to_string(p.join("empty/report/report.md")).unwrap();
    assert!(!md.contains("| criterion"));

    assert_eq!(code(&["converge", "--config", "tiny.toml", "--out", "runs/converge"], p), 0);
    assert_eq!(code(&["report", "runs"], p), 0);
    let md = std::fs::read_to_string(p.join("runs/report/report.md")).unwrap();
    assert!(md.contains("plain p=2 slope") && md.contains("95% CI"));
    assert!(p.join("runs/report/converge/converge.dat").exists());

    let csv = p.join("runs/converge/converge.csv");
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push_str("0,0,0,0,0,0\n");
    std::fs::write(&csv, text).unwrap();
    let out = fluctlab(&["report", "runs"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("converge.csv"));

    std::fs::remove_file(&csv).unwrap();
    let out = fluctlab(&["report", "runs"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing converge.csv"));
}
