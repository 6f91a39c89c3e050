//! Cross-entropy and speckle-purity benchmarking of two-qubit random circuits,
//! exponential decay fits, readout confusion-matrix correction and the leak
//! metric.

mod circuit;
mod estimators;
mod fit;
mod readout;

pub use circuit::{generate_random_circuit, ideal_probs, sample_frequencies, simulate_measured, Cycle, RandomCircuit, SingleQubitGate};
pub use estimators::{leak_metric, spb_purity, xeb_alpha, SpbEstimate, XebRecord, LEAK_OUTCOMES};
pub use fit::{fit_decay, DecayFit};
pub use readout::{apply_confusion, correct_readout, joint_confusion, ConfusionMatrix, JointConfusion, ReadoutCorrection};

use thiserror::Error;

/// Number of qubits the benchmarking routines support.
pub const N_QUBITS: usize = 2;

/// Two-qubit computational outcome count.
pub const D: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XebError {
    #[error("only {N_QUBITS}-qubit circuits are supported, got {0}")]
    UnsupportedQubitCount(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("need at least {need} records, got {got}")]
    TooFewRecords { need: usize, got: usize },
    #[error("records mix cycle counts or dimensions")]
    InconsistentRecords,
    #[error("XEB denominator {0:.3e} vanishes; ensemble is not scrambling")]
    UndefinedAlpha(f64),
    #[error("empty probability pool")]
    EmptyPool,
    #[error("decay fit needs at least 3 positive points, {0} remain")]
    TooFewPoints(usize),
    #[error("expected {expected} outcomes, got {got}")]
    OutcomeCount { expected: usize, got: usize },
    #[error("confusion matrix row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("confusion matrix entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("confusion matrix is not square: {rows}×{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("confusion matrix is singular")]
    Singular,
    #[error("cannot parse confusion matrix: {0}")]
    Parse(String),
}
