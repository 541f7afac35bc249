//! Loads a preset, applies dotted-path overrides and prints the resulting
//! TOML, which can be saved and passed back to `icd-pcac run`.
//!
//! ```text
//! cargo run --example config_overrides -- example3_track mpc.horizon=50 plant.seed=4
//! ```

use icd_pcac::ExperimentConfig;

fn main() -> icd_pcac::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "example1_sat".into());
    let overrides: Vec<String> = args.collect();
    let mut cfg = ExperimentConfig::resolve(&name)?;
    cfg.apply_overrides(&overrides)?;
    print!("{}", cfg.to_toml()?);
    Ok(())
}
