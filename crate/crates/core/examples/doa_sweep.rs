//! Domain-of-attraction sweep on a coarse grid of initial conditions for
//! several horizons, printed as maps.
//!
//! ```text
//! cargo run --release --example doa_sweep -- [grid size] [workers]
//! ```

use icd_pcac::experiments::ExperimentConfig;
use icd_pcac::sim::doa_sweep;

fn main() -> icd_pcac::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(5, |s| s.parse().expect("grid size must be an integer"));
    let workers: usize = args.next().map_or(0, |s| s.parse().expect("workers must be an integer"));

    let cfg = ExperimentConfig::example5_doa();
    let doa = cfg.doa.clone().expect("sweep preset").with_grid(n, -10.0, 10.0);
    let map = doa_sweep(&cfg.plant, &cfg.identifier, &cfg.mpc, &cfg.nonlinearity, &doa, workers)?;
    for (h, l) in map.horizons.iter().enumerate() {
        println!("horizon {l}: {} of {} converged", map.converged_count(h), n * n);
        for (i2, row) in map.converged[h].iter().enumerate().rev() {
            let cells: String = row.iter().map(|c| if *c { " #" } else { " ." }).collect();
            println!("  x2 = {:>6.1} |{cells}", map.x2[i2]);
        }
    }
    print!("{}", map.summary());
    Ok(())
}
