use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::plant::{integrate_sample_interval, PlantConfig};
use super::trace::{SimTrace, StepRecord};
use crate::bocf::BocfModel;
use crate::error::{Error, Result};
use crate::mpc::{IcdController, MpcConfig};
use crate::nonlinearity::Nonlinearity;
use crate::rls::{IdentifierConfig, Rls};

/// ChaCha stream reserved for sensor noise; other streams are free for
/// future random inputs without disturbing the noise sequence.
pub const NOISE_STREAM: u64 = 1;

fn check_dims(plant: &PlantConfig, identifier: &IdentifierConfig) -> Result<()> {
    plant.validate()?;
    identifier.validate()?;
    if identifier.p != plant.output_dim() || identifier.m != plant.input_dim() {
        return Err(Error::Dimension(format!(
            "identifier (p={}, m={}) does not match plant (p={}, m={})",
            identifier.p,
            identifier.m,
            plant.output_dim(),
            plant.input_dim()
        )));
    }
    Ok(())
}

/// Runs the sampled-data loop for `plant.steps()` intervals and records the
/// `steps + 1` sample instants `t_k = k T_s`.
///
/// At each sample: measure, update the identifier, rebuild the realization,
/// plan `u_{k+1}`, then hold `u_k` over the coming interval. The control
/// computed at step `k` reaches the plant one interval later.
pub fn run_closed_loop(
    plant: &PlantConfig,
    identifier: &IdentifierConfig,
    controller: &MpcConfig,
    nl: &Nonlinearity,
) -> Result<SimTrace> {
    check_dims(plant, identifier)?;
    nl.validate()?;
    let steps = plant.steps();
    let m = plant.input_dim();
    let p = plant.output_dim();

    let mut rng = ChaCha8Rng::seed_from_u64(plant.seed);
    rng.set_stream(NOISE_STREAM);
    let noise = Normal::new(0.0, plant.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut rls = Rls::new(identifier.clone())?;
    let mut ctrl = IcdController::new(controller.clone(), *nl);
    let mut x = DVector::from_column_slice(&plant.x0);
    let mut u = controller.initial_control(m)?;
    let mut trace = SimTrace { records: Vec::with_capacity(steps + 1) };

    for k in 0..=steps {
        let t = k as f64 * plant.sample_time;
        let y_true = &plant.c * &x;
        let command = plant.command_at(t);
        let mut y = &y_true - &command;
        if plant.noise_std > 0.0 {
            for i in 0..p {
                y[i] += noise.sample(&mut rng);
            }
        }

        let rls_diag = rls.update(&y, nl).map_err(|e| Error::Controller { step: k, reason: e.to_string() })?;
        let model = BocfModel::from_data(&rls.coefficients(), &y, &rls.state().history, nl)?;
        let (u_next, rho_k, u_change, qp_solves, qp_iterations, objective, failed) = match ctrl.step(&model, &u) {
            Ok(plan) => (
                plan.applied_control.clone(),
                plan.rho_k,
                plan.final_change,
                plan.qp_solves,
                plan.qp_iterations,
                plan.objective(),
                false,
            ),
            Err(Error::Infeasible) => (u.clone(), 0, f64::NAN, 0, 0, f64::NAN, true),
            Err(e) => return Err(Error::Controller { step: k, reason: e.to_string() }),
        };

        trace.records.push(StepRecord {
            k,
            t,
            x: x.clone(),
            y_true,
            y_meas: y.clone(),
            command,
            sigma_u: nl.evaluate(&u),
            u: u.clone(),
            disturbance: plant.disturbance_at(t),
            rls: rls_diag,
            rho_k,
            u_change,
            qp_solves,
            qp_iterations,
            objective,
            failed,
        });

        if k < steps {
            x = integrate_sample_interval(plant, &x, &u, t, nl)?;
        }
        rls.push(y, u);
        u = u_next;
    }
    Ok(trace)
}
