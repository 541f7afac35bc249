//! Adaptive model predictive control for Hammerstein systems.
//!
//! The controller identifies an ARX model online with recursive least
//! squares and variable-rate forgetting, realizes it in block observable
//! canonical form, and handles the known input nonlinearity by iterating a
//! sequence of quadratic programs in which the input matrix is replaced by a
//! control-dependent coefficient.

pub mod bocf;
pub mod error;
pub mod experiments;
pub mod history;
pub mod mpc;
pub mod nonlinearity;
pub mod qp;
pub mod rls;
mod serde_mat;
pub mod sim;

pub use bocf::BocfModel;
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, RunSummary};
pub use history::IoHistory;
pub use mpc::{IcdController, IcdPlan, MpcConfig};
pub use nonlinearity::Nonlinearity;
pub use qp::{QpProblem, QpSolution, QpStatus};
pub use rls::{IdentifierConfig, Rls};
pub use sim::{run_closed_loop, PlantConfig, SimTrace};
