//! Pulse-level simulation, Nelder–Mead pulse optimization and benchmarking
//! analysis for all-microwave CZ gates on two transmons joined by a tunable
//! coupler.
//!
//! * [`device`]: static Hamiltonian of the qubit–coupler–qubit chain and its
//!   labeled eigensystem.
//! * [`pulse`]: λ-basis envelopes and the carrier-modulated drive.
//! * [`propagation`] and [`gate`]: lab-frame propagation, projection onto the
//!   computational subspace, leakage, conditional phase and CZ fidelity.
//! * [`optimizer`] and [`cz`]: Nelder–Mead, the CZ optimization protocol and
//!   detuning scans.
//! * [`xeb`]: random circuits, XEB and speckle-purity estimators, decay fits,
//!   readout correction and the leak metric.
//! * [`config`] and [`io`]: run configuration, presets and result files.

pub mod config;
pub mod cz;
pub mod device;
pub mod gate;
pub mod io;
pub mod optimizer;
pub mod propagation;
pub mod pulse;
pub mod seed;
pub mod xeb;

pub use device::{BareState, DeviceParams, EigenSystem, StaticHamiltonian};
pub use gate::GateResult;
pub use propagation::{EvolutionTrace, PropagationOptions};
pub use pulse::{DrivePulse, DriveTarget, Envelope};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Device(#[from] device::DeviceError),
    #[error(transparent)]
    Pulse(#[from] pulse::PulseError),
    #[error(transparent)]
    Propagation(#[from] propagation::PropagationError),
    #[error(transparent)]
    Gate(#[from] gate::GateError),
    #[error(transparent)]
    Optimize(#[from] optimizer::OptimizeError),
    #[error(transparent)]
    Cz(#[from] cz::CzError),
    #[error(transparent)]
    Xeb(#[from] xeb::XebError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
