//! CZ pulse optimization: initial guess, Nelder–Mead over pulse parameters,
//! detuning scans with best-k aggregation and collision bookkeeping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{
    build_static_hamiltonian, diagonalize_and_label, transition_frequency, BareState, DeviceError,
    DeviceParams, EigenSystem, StaticHamiltonian,
};
use crate::gate::{GateError, GateResult};
use crate::optimizer::{nelder_mead, NelderMeadOptions, OptimizeError};
use crate::propagation::{converged_dt, propagate_computational, PropagationError, PropagationOptions};
use crate::pulse::{DrivePulse, DriveTarget, Envelope, PulseError, STANDARD_LAMBDA};

/// Default gate duration (ns).
pub const DEFAULT_DURATION: f64 = 60.0;

/// Default half-width of the window used to flag drive-activated collisions (GHz).
pub const COLLISION_WINDOW: f64 = 0.003;

#[derive(Debug, Error)]
pub enum CzError {
    #[error("invalid optimization problem: {0}")]
    InvalidProblem(String),
    #[error("cannot aggregate the best {k} of {n} results")]
    AggregateTooLarge { k: usize, n: usize },
    #[error("aggregation needs k >= 1")]
    ZeroAggregate,
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

/// Second-excitation state `|11⟩` is driven towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TargetTransition {
    #[default]
    #[serde(rename = "20")]
    To20,
    #[serde(rename = "02")]
    To02,
}

impl TargetTransition {
    pub fn state(self) -> BareState {
        match self {
            TargetTransition::To20 => BareState::qubits(2, 0),
            TargetTransition::To02 => BareState::qubits(0, 2),
        }
    }
}

/// Initial pulse: standard λ ratio, `ω_d = |ω(11) − ω(target)|`, `Ā = amp`.
pub fn initial_guess(eig: &EigenSystem, target: TargetTransition, amp: f64) -> Result<DrivePulse, CzError> {
    let wd = transition_frequency(eig, BareState::qubits(1, 1), target.state())?.abs();
    Ok(DrivePulse::new(STANDARD_LAMBDA, amp, wd, DEFAULT_DURATION))
}

/// Pulse parameter exposed to the optimizer. `λ₂` is pinned to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    Lambda1,
    Lambda3,
    Lambda4,
    /// Offset added to the base carrier frequency (GHz).
    CarrierOffset,
    MeanAmp,
    Duration,
}

impl FreeParam {
    pub const DEFAULT: [FreeParam; 4] =
        [FreeParam::Lambda1, FreeParam::Lambda3, FreeParam::Lambda4, FreeParam::CarrierOffset];

    fn lambda_slot(self) -> Option<usize> {
        match self {
            FreeParam::Lambda1 => Some(0),
            FreeParam::Lambda3 => Some(2),
            FreeParam::Lambda4 => Some(3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub device: DeviceParams,
    pub base_pulse: DrivePulse,
    pub free_params: Vec<FreeParam>,
    pub budget: usize,
    pub propagation: PropagationOptions,
}

impl OptimizationProblem {
    pub fn new(
        device: DeviceParams,
        base_pulse: DrivePulse,
        free_params: Vec<FreeParam>,
        budget: usize,
        propagation: PropagationOptions,
    ) -> Result<Self, CzError> {
        if budget == 0 {
            return Err(CzError::InvalidProblem("budget must be at least 1".into()));
        }
        if free_params.is_empty() {
            return Err(CzError::InvalidProblem("no free parameters".into()));
        }
        for (i, p) in free_params.iter().enumerate() {
            if free_params[..i].contains(p) {
                return Err(CzError::InvalidProblem(format!("duplicate free parameter {p:?}")));
            }
            if p.lambda_slot().is_some() && base_pulse.lambda().is_none() {
                return Err(CzError::InvalidProblem("λ parameters need a λ envelope".into()));
            }
        }
        device.validate()?;
        base_pulse.validate()?;
        let mut base_pulse = base_pulse;
        if let Envelope::Lambda { lambda } = base_pulse.envelope {
            if lambda[1] == 0.0 {
                return Err(CzError::InvalidProblem("λ₂ must be nonzero to pin the ratio".into()));
            }
            // Shape is a ratio; normalize so that λ₂ = 1.
            base_pulse.envelope = Envelope::Lambda { lambda: lambda.map(|l| l / lambda[1]) };
        }
        Ok(Self { device, base_pulse, free_params, budget, propagation })
    }

    pub fn x0(&self) -> Vec<f64> {
        let lambda = self.base_pulse.lambda().unwrap_or([0.0; 4]);
        self.free_params
            .iter()
            .map(|p| match p {
                FreeParam::CarrierOffset => 0.0,
                FreeParam::MeanAmp => self.base_pulse.mean_amp,
                FreeParam::Duration => self.base_pulse.duration,
                l => lambda[l.lambda_slot().unwrap_or(0)],
            })
            .collect()
    }

    /// Initial simplex steps.
    pub fn steps(&self) -> Vec<f64> {
        self.free_params
            .iter()
            .zip(self.x0())
            .map(|(p, x)| match p {
                FreeParam::CarrierOffset => 0.002,
                FreeParam::MeanAmp => (0.05 * x.abs()).max(0.001),
                FreeParam::Duration => (0.05 * x.abs()).max(1.0),
                _ => (0.05 * x.abs()).max(0.005),
            })
            .collect()
    }

    pub fn pulse_at(&self, x: &[f64]) -> DrivePulse {
        let mut pulse = self.base_pulse;
        let mut lambda = pulse.lambda();
        for (p, &v) in self.free_params.iter().zip(x) {
            match p {
                FreeParam::CarrierOffset => pulse.carrier_freq = self.base_pulse.carrier_freq + v,
                FreeParam::MeanAmp => pulse.mean_amp = v,
                FreeParam::Duration => pulse.duration = v,
                l => {
                    if let (Some(lam), Some(slot)) = (lambda.as_mut(), l.lambda_slot()) {
                        lam[slot] = v;
                    }
                }
            }
        }
        if let Some(lambda) = lambda {
            pulse.envelope = Envelope::Lambda { lambda };
        }
        pulse
    }
}

/// Outcome of one CZ optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzRun {
    pub initial_pulse: DrivePulse,
    pub optimized_pulse: DrivePulse,
    pub initial_result: GateResult,
    pub result: GateResult,
    /// Best-so-far CZ error per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub dt: f64,
}

impl CzRun {
    pub fn best_error(&self) -> f64 {
        self.result.error()
    }
}

struct Model {
    h: StaticHamiltonian,
    eig: EigenSystem,
}

impl Model {
    fn new(device: &DeviceParams) -> Result<Self, CzError> {
        let h = build_static_hamiltonian(device)?;
        let eig = diagonalize_and_label(&h)?;
        Ok(Self { h, eig })
    }

    fn gate(&self, pulse: &DrivePulse, opts: &PropagationOptions) -> Result<GateResult, CzError> {
        let evo = propagate_computational(&self.eig, &self.h, pulse, opts)?;
        Ok(GateResult::from_evolution(&evo, &self.eig)?)
    }
}

/// Runs Nelder–Mead on `problem`, minimizing `1 − F`.
pub fn optimize_problem(problem: &OptimizationProblem) -> Result<CzRun, CzError> {
    let model = Model::new(&problem.device)?;
    let mut opts = problem.propagation;
    let dt = match opts.dt {
        Some(dt) => dt,
        None => converged_dt(&model.eig, &model.h, &problem.base_pulse, None, 1e-6, 6)?,
    };
    opts.dt = Some(dt);
    opts.stride = usize::MAX;

    let initial_result = model.gate(&problem.base_pulse, &opts)?;
    let objective = |x: &[f64]| -> f64 {
        let pulse = problem.pulse_at(x);
        match model.gate(&pulse, &opts) {
            Ok(g) => g.error(),
            Err(_) => f64::NAN,
        }
    };
    let nm = NelderMeadOptions { max_iterations: problem.budget, ..Default::default() };
    let run = nelder_mead(objective, &problem.x0(), &problem.steps(), &nm)?;

    let optimized_pulse = problem.pulse_at(&run.x_best);
    let result = model.gate(&optimized_pulse, &opts)?;
    Ok(CzRun {
        initial_pulse: problem.base_pulse,
        optimized_pulse,
        initial_result,
        result,
        trace: run.trace,
        iterations: run.iterations,
        evaluations: run.evaluations,
        dt,
    })
}

/// Knobs of the optimization protocol besides device, target, amplitude and budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzSettings {
    pub duration: f64,
    pub drive_target: DriveTarget,
    /// Initial λ; the λ₂ entry sets the normalization only.
    pub initial_lambda: [f64; 4],
    pub free_params: Vec<FreeParam>,
    pub propagation: PropagationOptions,
}

impl Default for CzSettings {
    fn default() -> Self {
        Self {
            duration: DEFAULT_DURATION,
            drive_target: DriveTarget::Q1,
            initial_lambda: STANDARD_LAMBDA,
            free_params: FreeParam::DEFAULT.to_vec(),
            propagation: PropagationOptions::default(),
        }
    }
}

pub fn build_problem(
    device: &DeviceParams,
    target: TargetTransition,
    amp: f64,
    budget: usize,
    settings: &CzSettings,
) -> Result<OptimizationProblem, CzError> {
    let eig = diagonalize_and_label(&build_static_hamiltonian(device)?)?;
    let mut pulse = initial_guess(&eig, target, amp)?;
    pulse.envelope = Envelope::Lambda { lambda: settings.initial_lambda };
    pulse.duration = settings.duration;
    pulse.target = settings.drive_target;
    OptimizationProblem::new(*device, pulse, settings.free_params.clone(), budget, settings.propagation)
}

pub fn optimize_cz(
    device: &DeviceParams,
    target: TargetTransition,
    amp: f64,
    budget: usize,
    settings: &CzSettings,
) -> Result<CzRun, CzError> {
    optimize_problem(&build_problem(device, target, amp, budget, settings)?)
}

/// Mean of the `k` smallest values.
pub fn aggregate_best_k(errors: &[f64], k: usize) -> Result<f64, CzError> {
    if k == 0 {
        return Err(CzError::ZeroAggregate);
    }
    if k > errors.len() {
        return Err(CzError::AggregateTooLarge { k, n: errors.len() });
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn delta_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Transition competing with the intended `|11⟩ ↔ target` process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spectator {
    /// `|01⟩ ↔ |10⟩`.
    Swap01To10,
    /// `|11⟩ ↔ |02⟩`.
    Swap11To02,
    /// `|11⟩ ↔ |20⟩`.
    Swap11To20,
}

impl Spectator {
    pub fn frequency(self, eig: &EigenSystem) -> Result<f64, DeviceError> {
        let (a, b) = match self {
            Spectator::Swap01To10 => (BareState::qubits(1, 0), BareState::qubits(0, 1)),
            Spectator::Swap11To02 => (BareState::qubits(1, 1), BareState::qubits(0, 2)),
            Spectator::Swap11To20 => (BareState::qubits(1, 1), BareState::qubits(2, 0)),
        };
        Ok(transition_frequency(eig, a, b)?.abs())
    }

    fn is_target(self, target: TargetTransition) -> bool {
        matches!(
            (self, target),
            (Spectator::Swap11To20, TargetTransition::To20) | (Spectator::Swap11To02, TargetTransition::To02)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub spectator: Spectator,
    pub harmonic: u32,
    /// `harmonic · ω_d − ω_spectator` (GHz).
    pub mismatch: f64,
}

/// `harmonic · ω_d − ω_spectator` with `ω_d` from the initial-guess rule.
pub fn collision_mismatch(
    eig: &EigenSystem,
    target: TargetTransition,
    spectator: Spectator,
    harmonic: u32,
) -> Result<f64, DeviceError> {
    let wd = transition_frequency(eig, BareState::qubits(1, 1), target.state())?.abs();
    Ok(harmonic as f64 * wd - spectator.frequency(eig)?)
}

/// Spectator transitions within `window` of the first or second carrier harmonic.
pub fn detect_collisions(eig: &EigenSystem, target: TargetTransition, window: f64) -> Vec<Collision> {
    let mut found = Vec::new();
    for spectator in [Spectator::Swap01To10, Spectator::Swap11To02, Spectator::Swap11To20] {
        if spectator.is_target(target) {
            continue;
        }
        for harmonic in 1..=2 {
            if let Ok(mismatch) = collision_mismatch(eig, target, spectator, harmonic) {
                if mismatch.abs() < window {
                    found.push(Collision { spectator, harmonic, mismatch });
                }
            }
        }
    }
    found
}

/// Dressed detuning in `[lo, hi]` where `harmonic · ω_d` meets `spectator`,
/// found by bisection over the family `base.with_dressed_detuning(Δ)`.
pub fn find_collision_detuning(
    base: &DeviceParams,
    target: TargetTransition,
    spectator: Spectator,
    harmonic: u32,
    lo: f64,
    hi: f64,
) -> Result<f64, CzError> {
    let mismatch = |delta: f64| -> Result<f64, CzError> {
        let p = base.with_dressed_detuning(delta)?;
        let eig = diagonalize_and_label(&build_static_hamiltonian(&p)?)?;
        Ok(collision_mismatch(&eig, target, spectator, harmonic)?)
    };
    let (mut a, mut b) = (lo, hi);
    let mut fa = mismatch(a)?;
    let fb = mismatch(b)?;
    if fa.signum() == fb.signum() {
        return Err(DeviceError::NoRoot("collision detuning").into());
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = mismatch(m)?;
        if fm == 0.0 || b - a < 1e-12 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delta: f64,
    pub best_error: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<f64>,
    pub collision: bool,
    /// Set when the optimization could not run at this Δ; the error is then 1.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    /// Sorted ascending by Δ.
    pub points: Vec<ScanPoint>,
    pub k: usize,
    /// Mean of the `k` smallest best errors.
    pub aggregate: f64,
}

impl ScanResult {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.best_error).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSettings {
    pub target: TargetTransition,
    pub amp: f64,
    pub budget: usize,
    pub k: usize,
    pub collision_window: f64,
    pub cz: CzSettings,
}

/// Optimizes the CZ gate at every Δ of `deltas` on the device family `family`
/// and aggregates the `k` best errors. Per-Δ runs execute in parallel; results
/// are ordered by Δ.
pub fn delta_scan<F>(family: F, deltas: &[f64], settings: &ScanSettings) -> Result<ScanResult, CzError>
where
    F: Fn(f64) -> Result<DeviceParams, DeviceError> + Sync,
{
    if settings.k == 0 {
        return Err(CzError::ZeroAggregate);
    }
    if settings.k > deltas.len() {
        return Err(CzError::AggregateTooLarge { k: settings.k, n: deltas.len() });
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);

    let points: Vec<ScanPoint> = sorted
        .par_iter()
        .map(|&delta| scan_point(&family, delta, settings))
        .collect();
    let aggregate = aggregate_best_k(&points.iter().map(|p| p.best_error).collect::<Vec<_>>(), settings.k)?;
    Ok(ScanResult { points, k: settings.k, aggregate })
}

fn scan_point<F>(family: &F, delta: f64, settings: &ScanSettings) -> ScanPoint
where
    F: Fn(f64) -> Result<DeviceParams, DeviceError>,
{
    let attempt = || -> Result<(CzRun, bool), CzError> {
        let device = family(delta)?;
        let eig = diagonalize_and_label(&build_static_hamiltonian(&device)?)?;
        let collision = !detect_collisions(&eig, settings.target, settings.collision_window).is_empty();
        let run = optimize_cz(&device, settings.target, settings.amp, settings.budget, &settings.cz)?;
        Ok((run, collision))
    };
    match attempt() {
        Ok((run, collision)) => ScanPoint {
            delta,
            best_error: run.best_error(),
            iterations: run.iterations,
            evaluations: run.evaluations,
            trace: run.trace,
            collision,
            failure: None,
        },
        Err(e) => {
            log::warn!("scan point Δ = {delta} GHz failed: {e}");
            ScanPoint {
                delta,
                best_error: 1.0,
                iterations: 0,
                evaluations: 0,
                trace: Vec::new(),
                collision: true,
                failure: Some(e.to_string()),
            }
        }
    }
}
