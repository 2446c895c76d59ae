//! Drive a sweep from TOML, the same way the command-line tool does.

use ib_distill::experiment::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
experiment = "batch-gaussian"
k_values = [5, 20]
beta_grid = { min = 1.0, max = 1000.0, points = 12 }
units = "bits"

[model]
kind = "gaussian"
dim = 4
seed = 2

[output]
path = "gaussian.csv"
"#;

fn main() -> ib_distill::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let dir = std::env::temp_dir().join("ib-distill-example");
    let report = run_experiment(&cfg, Some(CONFIG), &dir.join(&cfg.output.path))?;
    println!("{} rows -> {}", report.rows.len(), report.data_path.display());
    println!("metadata -> {}", report.sidecar_path.display());
    print!("{}", std::fs::read_to_string(&report.data_path)?.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    std::process::exit(report.exit_code());
}
