//! Domain-of-attraction sweeps over a grid of initial conditions.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closed_loop::run_closed_loop;
use super::plant::{shift_coordinates, PlantConfig};
use super::trace::SimTrace;
use crate::error::{Error, Result};
use crate::mpc::MpcConfig;
use crate::nonlinearity::Nonlinearity;
use crate::rls::IdentifierConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaConfig {
    /// Values of the first shifted state component.
    pub x1: Vec<f64>,
    /// Values of the second shifted state component.
    pub x2: Vec<f64>,
    pub horizons: Vec<usize>,
    /// First sample included in the convergence sum.
    pub from_step: usize,
    /// A run converges when `sum ||x_k||` over the final samples is below this.
    pub threshold: f64,
}

impl DoaConfig {
    /// `n x n` grid spread evenly over `[lo, hi]` in both coordinates.
    pub fn with_grid(mut self, n: usize, lo: f64, hi: f64) -> Self {
        let axis: Vec<f64> = if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        self.x1 = axis.clone();
        self.x2 = axis;
        self
    }
}

/// Boolean convergence map per horizon, indexed `[horizon][i2][i1]`.
#[derive(Debug, Clone, Serialize)]
pub struct DoaMap {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub horizons: Vec<usize>,
    pub converged: Vec<Vec<Vec<bool>>>,
    /// The convergence sums, `INFINITY` for failed runs.
    pub scores: Vec<Vec<Vec<f64>>>,
}

impl DoaMap {
    pub fn converged_count(&self, horizon_index: usize) -> usize {
        self.converged[horizon_index].iter().flatten().filter(|c| **c).count()
    }

    /// Matrix CSV: header `x2\x1,<x1 values>`, one row per `x2` value with 0/1 entries.
    pub fn write_csv<W: Write>(&self, horizon_index: usize, mut out: W) -> Result<()> {
        let head: Vec<String> = self.x1.iter().map(|v| v.to_string()).collect();
        writeln!(out, "x2\\x1,{}", head.join(","))?;
        for (i2, row) in self.converged[horizon_index].iter().enumerate() {
            let cells: Vec<&str> = row.iter().map(|c| if *c { "1" } else { "0" }).collect();
            writeln!(out, "{},{}", self.x2[i2], cells.join(","))?;
        }
        Ok(())
    }

    /// One line per horizon: `horizon=<l> converged=<count>/<total>`.
    pub fn summary(&self) -> String {
        let total = self.x1.len() * self.x2.len();
        self.horizons
            .iter()
            .enumerate()
            .map(|(h, l)| format!("horizon={l} converged={}/{total}\n", self.converged_count(h)))
            .collect()
    }
}

/// `sum_{k >= from_step} ||x_k - x_*(r_k)||` over the recorded states.
pub fn convergence_score(trace: &SimTrace, plant: &PlantConfig, from_step: usize) -> Result<f64> {
    let c: Vec<f64> = plant.c.row(0).iter().copied().collect();
    let mut sum = 0.0;
    for rec in trace.records.iter().filter(|r| r.k >= from_step) {
        let shift = if rec.command.amax() == 0.0 {
            DVector::zeros(rec.x.len())
        } else {
            shift_coordinates(rec.command[0], &c)?
        };
        sum += (&rec.x - shift).norm();
    }
    Ok(sum)
}

/// Runs every grid point for every horizon. `workers = 0` uses rayon's default pool.
pub fn doa_sweep(
    plant: &PlantConfig,
    identifier: &IdentifierConfig,
    controller: &MpcConfig,
    nl: &Nonlinearity,
    doa: &DoaConfig,
    workers: usize,
) -> Result<DoaMap> {
    if plant.state_dim() < 2 {
        return Err(Error::Config("domain-of-attraction sweep needs at least two states".into()));
    }
    let r0 = plant.command_at(0.0);
    let shift = if r0.amax() == 0.0 {
        DVector::zeros(plant.state_dim())
    } else {
        let c: Vec<f64> = plant.c.row(0).iter().copied().collect();
        shift_coordinates(r0[0], &c)?
    };
    let jobs: Vec<(usize, usize, usize)> = (0..doa.horizons.len())
        .flat_map(|h| (0..doa.x2.len()).flat_map(move |i2| (0..doa.x1.len()).map(move |i1| (h, i2, i1))))
        .collect();

    let run_one = |&(h, i2, i1): &(usize, usize, usize)| -> f64 {
        let mut p = plant.clone();
        let mut x0 = vec![0.0; p.state_dim()];
        x0[0] = doa.x1[i1];
        x0[1] = doa.x2[i2];
        p.x0 = x0.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
        let mut mpc = controller.clone();
        mpc.horizon = doa.horizons[h];
        match run_closed_loop(&p, identifier, &mpc, nl) {
            Ok(trace) if trace.records.iter().all(|r| !r.failed) => {
                convergence_score(&trace, &p, doa.from_step).unwrap_or(f64::INFINITY)
            }
            _ => f64::INFINITY,
        }
    };

    let scores: Vec<f64> = if workers == 1 {
        jobs.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_one).collect())
    };

    let mut grid = vec![vec![vec![f64::INFINITY; doa.x1.len()]; doa.x2.len()]; doa.horizons.len()];
    for (&(h, i2, i1), s) in jobs.iter().zip(scores) {
        grid[h][i2][i1] = if s.is_nan() { f64::INFINITY } else { s };
    }
    let converged = grid
        .iter()
        .map(|g| g.iter().map(|row| row.iter().map(|s| *s < doa.threshold).collect()).collect())
        .collect();
    Ok(DoaMap {
        x1: doa.x1.clone(),
        x2: doa.x2.clone(),
        horizons: doa.horizons.clone(),
        converged,
        scores: grid,
    })
}
