//! Parse a scenario from TOML, fill defaults, and print the resolved config
//! and seed plan as they appear in run manifests.

use std::path::Path;

use fluctlab::scenario::ScenarioConfig;

const TEXT: &str = r#"
[scenario]
particle_counts = [250, 500, 1000]
n_steps = 64

[kernel]
kind = "gaussian"
amplitude = 0.5
width = 1.0

[nu]
kind = "constant"
matrix = [[0.5]]

[[test_functions]]
name = "left"
kind = "bump"
center = [-1.0]
radius = 2.0
"#;

fn main() -> fluctlab::Result<()> {
    let cfg = ScenarioConfig::from_toml_str(TEXT, Path::new("inline.toml"))?;
    println!("{}", cfg.to_toml_string()?);
    println!("{}", cfg.manifest().to_json()?);

    let bad = "[scenario]\ndimension = 2\nalpha = 1.0\n";
    match ScenarioConfig::from_toml_str(bad, Path::new("bad.toml")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
