//! Artifacts written through a run directory are hashed into its manifest;
//! editing one afterwards is caught by the verifier.

use fluctlab::io::{verify_run, RunDir};
use fluctlab::scenario::ScenarioConfig;

fn main() -> fluctlab::Result<()> {
    let root = std::env::temp_dir().join("fluctlab-manifest-example");
    let _ = std::fs::remove_dir_all(&root);
    let cfg = ScenarioConfig::default_for(1);
    let mut run = RunDir::create(&root, "example", &cfg)?;
    run.write("numbers.csv", b"n,value\n1,0.5\n2,0.25\n")?;
    let manifest = run.finish()?;
    for a in &manifest.artifacts {
        println!("{}  {}  {} bytes", a.sha256, a.path, a.bytes);
    }
    println!("verify: {:?}", verify_run(&root).map(|_| "ok"));
    std::fs::write(root.join("numbers.csv"), b"n,value\n1,0.5\n2,0.3\n").unwrap();
    println!("after edit: {}", verify_run(&root).unwrap_err());
    Ok(())
}
