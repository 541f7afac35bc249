//! Named experiment bundles, TOML loading with dotted overrides, and the
//! artifact writer used by the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpc::{MpcConfig, Weight};
use crate::nonlinearity::Nonlinearity;
use crate::rls::{IdentifierConfig, InitialTheta};
use crate::sim::{doa_sweep, run_closed_loop, CommandSegment, DisturbanceSegment, DoaConfig, DoaMap, Harmonic};
use crate::sim::{PlantConfig, SimTrace};

/// Version of the field set written to `summary.json`.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ICD_PCAC_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub plant: PlantConfig,
    pub identifier: IdentifierConfig,
    pub mpc: MpcConfig,
    pub nonlinearity: Nonlinearity,
    /// Present only for domain-of-attraction sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doa: Option<DoaConfig>,
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: &[(&str, &str)] = &[
    ("example1_sat", "triple integrator stabilization under saturation"),
    ("example1_sat_no_icd", "same plant with the plain input matrix (expected to fail)"),
    ("example3_track", "command following with harmonic disturbance and sensor noise"),
    ("example4_deadzone", "deadzone saturation with command and disturbance switch at 50 s"),
    ("example5_doa", "domain-of-attraction sweep over initial conditions"),
];

fn sine(omega: f64, amplitude: f64) -> Harmonic {
    Harmonic { omega, cos: vec![0.0], sin: vec![amplitude] }
}

impl ExperimentConfig {
    /// The nonminimum-phase triple integrator stabilization setup.
    pub fn example1_sat() -> Self {
        let plant = PlantConfig::chain_of_integrators(&[-2.0, -1.0, 1.0], &[50.0, 0.0, 0.0], 0.1, 60.0);
        let identifier = IdentifierConfig {
            n_hat: 5,
            p: 1,
            m: 1,
            psi0_scale: 1e6,
            theta0: InitialTheta::Fill(0.1),
            tau_d: 80,
            tau_n: 10,
            alpha: 0.01,
            zeta: 1.0,
            forgetting: true,
        };
        let mpc = MpcConfig {
            horizon: 200,
            max_iterations: 30,
            tolerance: 1e-3,
            q: Weight::Diagonal(vec![1e10, 0.0, 0.0, 0.0, 0.0]),
            q_terminal: None,
            r: Weight::Scalar(1.0),
            constraints: Default::default(),
            formulation: Default::default(),
            u0: vec![0.0],
            icd: true,
            qp_tol: crate::qp::DEFAULT_TOL,
            riccati: true,
        };
        ExperimentConfig {
            name: "example1_sat".into(),
            plant,
            identifier,
            mpc,
            nonlinearity: Nonlinearity::Saturation { u_min: -1.0, u_max: 1.0 },
            doa: None,
        }
    }

    /// Example 1 with the plain input matrix and a single QP per step.
    pub fn example1_sat_no_icd() -> Self {
        let mut cfg = Self::example1_sat();
        cfg.name = "example1_sat_no_icd".into();
        cfg.mpc.icd = false;
        cfg
    }

    /// Command `r = 100`, disturbance `sin 10t`, sensor noise std `1e-3`.
    pub fn example3_track() -> Self {
        let mut cfg = Self::example1_sat();
        cfg.name = "example3_track".into();
        cfg.plant.command = vec![CommandSegment { start: 0.0, value: vec![100.0] }];
        cfg.plant.disturbance = vec![DisturbanceSegment { start: 0.0, harmonics: vec![sine(10.0, 1.0)] }];
        cfg.plant.noise_std = 1e-3;
        cfg.plant.seed = 1;
        cfg
    }

    /// Deadzone saturation; at 50 s the command flips to `-100` and the
    /// disturbance becomes `2 sin 5t`.
    pub fn example4_deadzone() -> Self {
        let mut cfg = Self::example3_track();
        cfg.name = "example4_deadzone".into();
        cfg.plant.duration = 100.0;
        cfg.plant.command.push(CommandSegment { start: 50.0, value: vec![-100.0] });
        cfg.plant.disturbance.push(DisturbanceSegment { start: 50.0, harmonics: vec![sine(5.0, 2.0)] });
        cfg.nonlinearity = Nonlinearity::DeadzoneSaturation { dead_halfwidth: 1.0, sat_level: 2.0 };
        cfg
    }

    /// Grid `x1, x2 in {-10, ..., 10}`, `x3 = 0`, horizons 50, 100 and 200.
    pub fn example5_doa() -> Self {
        let mut cfg = Self::example1_sat();
        cfg.name = "example5_doa".into();
        let axis: Vec<f64> = (-10..=10).map(f64::from).collect();
        cfg.doa = Some(DoaConfig {
            x1: axis.clone(),
            x2: axis,
            horizons: vec![50, 100, 200],
            from_step: 580,
            threshold: 0.01,
        });
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "example1_sat" => Ok(Self::example1_sat()),
            "example1_sat_no_icd" => Ok(Self::example1_sat_no_icd()),
            "example3_track" => Ok(Self::example3_track()),
            "example4_deadzone" => Ok(Self::example4_deadzone()),
            "example5_doa" => Ok(Self::example5_doa()),
            _ => Err(Error::Config(format!("unknown preset `{name}`"))),
        }
    }

    /// A preset name, or else a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if PRESETS.iter().any(|(n, _)| *n == name_or_path) {
            return Self::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::load(path);
        }
        Err(Error::Config(format!("`{name_or_path}` is neither a preset nor a readable file")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.identifier.validate()?;
        self.nonlinearity.validate()?;
        self.mpc.weights(self.identifier.n_hat * self.identifier.p, self.identifier.m)?;
        if self.identifier.p != self.plant.output_dim() || self.identifier.m != self.plant.input_dim() {
            return Err(Error::Config("identifier dimensions do not match the plant".into()));
        }
        if let Some(doa) = &self.doa {
            if doa.horizons.is_empty() || doa.x1.is_empty() || doa.x2.is_empty() {
                return Err(Error::Config("domain-of-attraction grid and horizons must be non-empty".into()));
            }
        }
        Ok(())
    }

    /// Applies `path.to.field=value`. The value is parsed as a TOML value
    /// and falls back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        self.apply_overrides(&[assignment])
    }

    /// Applies several assignments and validates once at the end, so that
    /// coupled fields (model order and weight size, say) can change together.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, assignments: &[S]) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Parse(e.to_string()))?;
        for a in assignments {
            set_dotted(&mut root, a.as_ref())?;
        }
        let updated: Self = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn set_dotted(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = parse_toml_value(raw.trim());
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = root;
    for key in parents {
        node = match node {
            toml::Value::Table(t) => t
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default())),
            toml::Value::Array(a) => {
                let i: usize = key.parse().map_err(|_| Error::Config(format!("bad index `{key}` in `{path}`")))?;
                a.get_mut(i).ok_or_else(|| Error::Config(format!("index {i} out of range in `{path}`")))?
            }
            _ => return Err(Error::Config(format!("`{path}` descends into a scalar"))),
        };
    }
    match node {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| Error::Config(format!("bad index `{last}` in `{path}`")))?;
            *a.get_mut(i).ok_or_else(|| Error::Config(format!("index {i} out of range in `{path}`")))? = value;
        }
        _ => return Err(Error::Config(format!("`{path}` descends into a scalar"))),
    }
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Default output root: `$ICD_PCAC_OUT`, else `./out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Statistics of the tracking error `y = y_true - r` over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub from_time: f64,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub rms: f64,
}

impl ErrorStats {
    /// Over the records with `t >= from_time`, using the first output channel.
    pub fn from_trace(trace: &SimTrace, from_time: f64) -> Self {
        let errs: Vec<f64> = trace
            .records
            .iter()
            .filter(|r| r.t >= from_time - 1e-9)
            .map(|r| (r.y_true[0] - r.command[0]).abs())
            .collect();
        let n = errs.len().max(1) as f64;
        ErrorStats {
            from_time,
            max_abs: errs.iter().copied().fold(0.0, f64::max),
            mean_abs: errs.iter().sum::<f64>() / n,
            rms: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub name: String,
    pub overrides: Vec<String>,
    pub steps: usize,
    /// Error statistics over the final 10 s (or the whole run if shorter).
    pub terminal_error: Option<ErrorStats>,
    pub mean_rho: Option<f64>,
    pub total_qp_solves: usize,
    pub controller_failures: usize,
    /// Converged grid points per horizon for sweeps.
    pub doa_converged: Option<Vec<(usize, usize)>>,
    pub wall_time_s: f64,
}

/// Outcome of [`run`]: the summary and whichever artifact was produced.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Option<SimTrace>,
    pub doa: Option<DoaMap>,
}

/// Runs one experiment. A sweep is run when `doa` is set, a single closed
/// loop otherwise. When `out_dir` is given, artifacts are written there.
pub fn run(config: &ExperimentConfig, overrides: &[String], out_dir: Option<&Path>, workers: usize) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let mut summary = RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        name: config.name.clone(),
        overrides: overrides.to_vec(),
        steps: config.plant.steps(),
        terminal_error: None,
        mean_rho: None,
        total_qp_solves: 0,
        controller_failures: 0,
        doa_converged: None,
        wall_time_s: 0.0,
    };
    let mut output = RunOutput { summary: summary.clone(), trace: None, doa: None };

    if let Some(doa) = &config.doa {
        let map = doa_sweep(&config.plant, &config.identifier, &config.mpc, &config.nonlinearity, doa, workers)?;
        summary.doa_converged = Some(
            map.horizons.iter().enumerate().map(|(h, l)| (*l, map.converged_count(h))).collect(),
        );
        output.doa = Some(map);
    } else {
        let trace = run_closed_loop(&config.plant, &config.identifier, &config.mpc, &config.nonlinearity)?;
        let from = (config.plant.duration - 10.0).max(0.0);
        summary.terminal_error = Some(ErrorStats::from_trace(&trace, from));
        let active: Vec<&_> = trace.records.iter().filter(|r| r.rho_k > 0).collect();
        summary.mean_rho =
            Some(active.iter().map(|r| r.rho_k as f64).sum::<f64>() / active.len().max(1) as f64);
        summary.total_qp_solves = trace.records.iter().map(|r| r.qp_solves).sum();
        summary.controller_failures = trace.records.iter().filter(|r| r.failed).count();
        output.trace = Some(trace);
    }
    summary.wall_time_s = started.elapsed().as_secs_f64();

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), config.to_toml()?)?;
        if let Some(trace) = &output.trace {
            trace.save_csv(&dir.join("trace.csv"))?;
        }
        if let Some(map) = &output.doa {
            for (h, l) in map.horizons.iter().enumerate() {
                map.write_csv(h, fs::File::create(dir.join(format!("doa_l{l}.csv")))?)?;
            }
            fs::write(dir.join("doa_summary.txt"), map.summary())?;
        }
        let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("summary.json"), json + "\n")?;
    }
    output.summary = summary;
    Ok(output)
}
