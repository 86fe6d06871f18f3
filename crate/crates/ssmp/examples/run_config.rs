//! Drives a run from a JSON document, as the `ssmp` binary does.

use ssmp::cli::{run, Mode, RunConfig};

fn main() -> ssmp::Result<()> {
    let doc = r#"{
        "quintuple": {"psi1": 1, "sigma2": 4, "v": {"atoms": [{"location": -0.5, "mass": 0.5}]}},
        "sde": {"n_paths": 100, "seed": 42},
        "output": {"dir": "target/example-run", "formats": ["csv", "json"]}
    }"#;
    let cfg = RunConfig::from_str(doc, Some(Mode::SimulateApprox))?;
    let outcome = run(&cfg)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
