//! Time-dependent Schrödinger propagation of the driven chain in the lab frame.
//!
//! The drive Hamiltonian is `H(t) = H₀ + f(t) Σ_m (a_m + a_m†)` with
//! `f(t) = E(t) cos(2π ω_d t + φ₀)`, held piecewise constant at step midpoints.
//! Two integrators are available:
//!
//! * [`Integrator::Split`] (default): symmetric splitting
//!   `e^{−iH₀dt/2} e^{−i f X dt} e^{−iH₀dt/2}`, where both factors are exact
//!   exponentials built from precomputed eigen-decompositions. Unitary by
//!   construction and second-order accurate in `dt`.
//! * [`Integrator::Exact`]: dense Padé exponential of the full piecewise-constant
//!   Hamiltonian every step. Much slower; used as a reference.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{quadrature_operator, BareState, EigenSystem, Mode, StaticHamiltonian, COMPUTATIONAL};
use crate::gate::wrap_phase;
use crate::pulse::{DrivePulse, PulseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("time step {dt} ns is too coarse; at most {max} ns resolves the carrier")]
    StepTooCoarse { dt: f64, max: f64 },
    #[error("non-positive time step {0}")]
    NonPositiveStep(f64),
    #[error("unitarity drift {deviation:.3e} exceeds {tolerance:.1e} at t = {time} ns (dt = {dt} ns)")]
    UnitarityDrift { deviation: f64, tolerance: f64, time: f64, dt: f64 },
    #[error("self-convergence not reached after {halvings} halvings (change {change:.3e})")]
    NotConverged { halvings: usize, change: f64 },
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Device(#[from] crate::device::DeviceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Split,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Step in ns; `None` picks [`default_dt`].
    pub dt: Option<f64>,
    /// Record a trace sample every `stride` steps (the final time is always kept).
    pub stride: usize,
    pub integrator: Integrator,
    pub unitarity_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { dt: None, stride: 100, integrator: Integrator::Split, unitarity_tol: 1e-8 }
    }
}

/// Mode frequencies recovered from the Hamiltonian diagonal.
fn mode_frequencies(h: &StaticHamiltonian) -> [f64; 3] {
    let l = h.levels;
    let ground = h.matrix[(0, 0)];
    Mode::ALL.map(|m| {
        let mut s = BareState::new(0, 0, 0);
        match m {
            Mode::Q1 => s.n1 = 1,
            Mode::Coupler => s.nc = 1,
            Mode::Q2 => s.n2 = 1,
        }
        h.matrix[(s.index(l), s.index(l))] - ground
    })
}

fn fastest_frequency(h: &StaticHamiltonian, pulse: &DrivePulse) -> f64 {
    mode_frequencies(h)
        .into_iter()
        .fold(pulse.carrier_freq.abs(), f64::max)
}

/// `1/(40·max(ω_d, max mode frequency))` ns.
pub fn default_dt(h: &StaticHamiltonian, pulse: &DrivePulse) -> f64 {
    1.0 / (40.0 * fastest_frequency(h, pulse))
}

/// Largest admissible step, `1/(20·max(ω_d, max mode frequency))` ns.
pub fn max_dt(h: &StaticHamiltonian, pulse: &DrivePulse) -> f64 {
    1.0 / (20.0 * fastest_frequency(h, pulse))
}

/// Population and phase record of a propagation, in the static eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// Computational labels the traced states started from.
    pub initial_labels: Vec<BareState>,
    /// Label of each eigen index.
    pub eigen_labels: Vec<BareState>,
    /// `populations[i][s][k]`: probability in eigenstate `k` at sample `s`
    /// for initial state `i`.
    pub populations: Vec<Vec<Vec<f64>>>,
    /// Probability in eigenstates with a coupler excitation, per initial state.
    pub coupler_leakage: Vec<Vec<f64>>,
    /// φ_c(t) in rad; NaN where a diagonal amplitude has vanished.
    pub conditional_phase: Vec<f64>,
}

impl EvolutionTrace {
    /// Writes one row per sample with per-state probabilities, coupler leakage
    /// and the conditional phase.
    pub fn write_csv<W: Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dests: Vec<(usize, String)> = self
            .eigen_labels
            .iter()
            .enumerate()
            .filter_map(|(k, l)| l.qubit_name().map(|n| (k, n)))
            .collect();
        let init_names: Vec<String> = self
            .initial_labels
            .iter()
            .map(|l| l.qubit_name().unwrap_or_else(|| l.to_string()))
            .collect();

        let mut header = vec!["t_ns".to_string()];
        for name in &init_names {
            for (_, d) in &dests {
                header.push(format!("p_{name}_to_{d}"));
            }
            header.push(format!("p_{name}_coupler"));
        }
        header.push("cphase_rad".into());
        w.write_record(&header)?;

        for (s, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.6}")];
            for i in 0..self.initial_labels.len() {
                for (k, _) in &dests {
                    row.push(format!("{:.12e}", self.populations[i][s][*k]));
                }
                row.push(format!("{:.12e}", self.coupler_leakage[i][s]));
            }
            row.push(format!("{:.12e}", self.conditional_phase[s]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of a propagation.
#[derive(Debug, Clone)]
pub struct Evolution {
    /// Final states in the static eigenbasis; column `j` started in eigenstate
    /// `initial[j]`. For [`propagate`] this is the full unitary `U(T)`.
    pub states: DMatrix<C64>,
    pub initial: Vec<usize>,
    pub trace: EvolutionTrace,
    pub dt: f64,
    pub steps: usize,
}

impl Evolution {
    /// `‖S†S − I‖_max` over the propagated columns.
    pub fn unitarity_deviation(&self) -> f64 {
        gram_deviation(&self.states)
    }
}

fn gram_deviation(states: &DMatrix<C64>) -> f64 {
    let gram = states.adjoint() * states;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Full-space propagation: `U(T)` in the eigenbasis plus the trace of the
/// computational states.
pub fn propagate(
    eig: &EigenSystem,
    h: &StaticHamiltonian,
    pulse: &DrivePulse,
    opts: &PropagationOptions,
) -> Result<Evolution, PropagationError> {
    let all: Vec<usize> = (0..eig.dimension()).collect();
    evolve(eig, h, pulse, opts, &all)
}

/// Propagates only the four computational eigenstates.
pub fn propagate_computational(
    eig: &EigenSystem,
    h: &StaticHamiltonian,
    pulse: &DrivePulse,
    opts: &PropagationOptions,
) -> Result<Evolution, PropagationError> {
    let cols = COMPUTATIONAL
        .iter()
        .map(|&s| eig.index_of(s))
        .collect::<Result<Vec<_>, _>>()?;
    evolve(eig, h, pulse, opts, &cols)
}

/// Propagates the eigenstates `initial` (eigen indices).
pub fn evolve(
    eig: &EigenSystem,
    h: &StaticHamiltonian,
    pulse: &DrivePulse,
    opts: &PropagationOptions,
    initial: &[usize],
) -> Result<Evolution, PropagationError> {
    pulse.validate()?;
    let dt_req = opts.dt.unwrap_or_else(|| default_dt(h, pulse));
    if !(dt_req > 0.0) {
        return Err(PropagationError::NonPositiveStep(dt_req));
    }
    let limit = max_dt(h, pulse);
    if dt_req > limit * (1.0 + 1e-12) {
        return Err(PropagationError::StepTooCoarse { dt: dt_req, max: limit });
    }
    let steps = (pulse.duration / dt_req).ceil().max(1.0) as usize;
    let dt = pulse.duration / steps as f64;
    let stride = opts.stride.max(1);

    let dim = eig.dimension();
    let levels = eig.levels;
    let v = eig.vectors.map(|x| C64::new(x, 0.0));
    let v_adj = v.adjoint();

    let mut psi = DMatrix::<C64>::zeros(dim, initial.len());
    for (j, &k) in initial.iter().enumerate() {
        psi.set_column(j, &v.column(k));
    }

    // Columns that feed the trace: the computational states when present.
    let traced: Vec<(BareState, usize)> = COMPUTATIONAL
        .iter()
        .filter_map(|&s| {
            let k = eig.index_of(s).ok()?;
            let j = initial.iter().position(|&i| i == k)?;
            Some((s, j))
        })
        .collect();
    let eigen_labels: Vec<BareState> = (0..dim).map(|k| eig.label_of(k)).collect();
    let mut recorder = Recorder::new(eig, &traced, eigen_labels);

    let drive_modes = pulse.target.modes();
    let inv_sum = pulse.inverse_lambda_sum();
    let field_at = |k: usize| pulse.drive_field_unchecked((k as f64 + 0.5) * dt, inv_sum);

    recorder.sample(0.0, &v_adj, &psi);
    let check = |time: f64, psi: &DMatrix<C64>| -> Result<(), PropagationError> {
        let deviation = gram_deviation(psi);
        if deviation > opts.unitarity_tol {
            return Err(PropagationError::UnitarityDrift {
                deviation,
                tolerance: opts.unitarity_tol,
                time,
                dt,
            });
        }
        Ok(())
    };

    match opts.integrator {
        Integrator::Split => {
            let half = static_exponential(eig, 0.5 * dt);
            let full = static_exponential(eig, dt);
            let locals: Vec<LocalDrive> =
                drive_modes.iter().map(|&m| LocalDrive::new(m, levels)).collect();
            let mut scratch = DMatrix::<C64>::zeros(dim, initial.len());

            // ψ ← U_half ψ, then alternate K(f_k) and U_full, closing with U_half.
            half.mul_to(&psi, &mut scratch);
            std::mem::swap(&mut psi, &mut scratch);
            for k in 0..steps {
                let f = field_at(k);
                for local in &locals {
                    local.apply(f * dt, &mut psi);
                }
                let last = k + 1 == steps;
                if last || (k + 1) % stride == 0 {
                    half.mul_to(&psi, &mut scratch);
                    let t = (k + 1) as f64 * dt;
                    recorder.sample(t, &v_adj, &scratch);
                    check(t, &scratch)?;
                    if last {
                        std::mem::swap(&mut psi, &mut scratch);
                        break;
                    }
                }
                full.mul_to(&psi, &mut scratch);
                std::mem::swap(&mut psi, &mut scratch);
            }
        }
        Integrator::Exact => {
            let h0 = h.matrix.map(|x| C64::new(x, 0.0));
            let mut x = DMatrix::<C64>::zeros(dim, dim);
            for &m in drive_modes {
                x += quadrature_operator(m, levels).map(|v| C64::new(v, 0.0));
            }
            let mut scratch = DMatrix::<C64>::zeros(dim, initial.len());
            let factor = C64::new(0.0, -TAU * dt);
            for k in 0..steps {
                let hk = &h0 + &x * C64::new(field_at(k), 0.0);
                let u = (hk * factor).exp();
                u.mul_to(&psi, &mut scratch);
                std::mem::swap(&mut psi, &mut scratch);
                let last = k + 1 == steps;
                if last || (k + 1) % stride == 0 {
                    let t = (k + 1) as f64 * dt;
                    recorder.sample(t, &v_adj, &psi);
                    check(t, &psi)?;
                }
            }
        }
    }

    let states = &v_adj * &psi;
    Ok(Evolution {
        states,
        initial: initial.to_vec(),
        trace: recorder.finish(),
        dt,
        steps,
    })
}

/// `V diag(e^{−i2πE τ}) V†` in the product basis.
fn static_exponential(eig: &EigenSystem, tau: f64) -> DMatrix<C64> {
    let v = eig.vectors.map(|x| C64::new(x, 0.0));
    let mut scaled = v.clone();
    for (k, e) in eig.energies.iter().enumerate() {
        let phase = C64::from_polar(1.0, -TAU * e * tau);
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// `a + a†` on one mode, diagonalized once so that `exp(−i2π θ (a + a†))` is
/// an `L × L` product for any `θ`.
struct LocalDrive {
    levels: usize,
    stride: usize,
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

impl LocalDrive {
    fn new(mode: Mode, levels: usize) -> Self {
        let mut x = DMatrix::<f64>::zeros(levels, levels);
        for n in 0..levels - 1 {
            let amp = ((n + 1) as f64).sqrt();
            x[(n, n + 1)] = amp;
            x[(n + 1, n)] = amp;
        }
        let eig = SymmetricEigen::new(x);
        let stride = match mode {
            Mode::Q1 => levels * levels,
            Mode::Coupler => levels,
            Mode::Q2 => 1,
        };
        Self { levels, stride, vectors: eig.eigenvectors, values: eig.eigenvalues.as_slice().to_vec() }
    }

    fn kernel(&self, theta: f64) -> DMatrix<C64> {
        let l = self.levels;
        let mut k = DMatrix::<C64>::zeros(l, l);
        for (e, &x) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -TAU * theta * x);
            for r in 0..l {
                for c in 0..l {
                    k[(r, c)] += phase * (self.vectors[(r, e)] * self.vectors[(c, e)]);
                }
            }
        }
        k
    }

    fn apply(&self, theta: f64, psi: &mut DMatrix<C64>) {
        let l = self.levels;
        let kernel = self.kernel(theta);
        let dim = psi.nrows();
        let mut buf = vec![C64::new(0.0, 0.0); l];
        for col in 0..psi.ncols() {
            let mut column = psi.column_mut(col);
            for base in 0..dim {
                if !(base / self.stride).is_multiple_of(l) {
                    continue;
                }
                for (n, b) in buf.iter_mut().enumerate() {
                    *b = column[base + n * self.stride];
                }
                for r in 0..l {
                    let mut acc = C64::new(0.0, 0.0);
                    for (c, b) in buf.iter().enumerate() {
                        acc += kernel[(r, c)] * b;
                    }
                    column[base + r * self.stride] = acc;
                }
            }
        }
    }
}

struct Recorder {
    traced: Vec<(BareState, usize)>,
    own_index: Vec<usize>,
    coupler_mask: Vec<bool>,
    times: Vec<f64>,
    populations: Vec<Vec<Vec<f64>>>,
    coupler: Vec<Vec<f64>>,
    cphase: Vec<f64>,
    eigen_labels: Vec<BareState>,
}

impl Recorder {
    fn new(eig: &EigenSystem, traced: &[(BareState, usize)], eigen_labels: Vec<BareState>) -> Self {
        let own_index = traced.iter().map(|(s, _)| eig.index_of(*s).unwrap_or(0)).collect();
        let coupler_mask = eigen_labels.iter().map(|l| l.nc >= 1).collect();
        Self {
            traced: traced.to_vec(),
            own_index,
            coupler_mask,
            times: Vec::new(),
            populations: vec![Vec::new(); traced.len()],
            coupler: vec![Vec::new(); traced.len()],
            cphase: Vec::new(),
            eigen_labels,
        }
    }

    fn sample(&mut self, t: f64, v_adj: &DMatrix<C64>, psi: &DMatrix<C64>) {
        self.times.push(t);
        let mut diag = [C64::new(0.0, 0.0); 4];
        for (i, &(_, j)) in self.traced.iter().enumerate() {
            let amps = v_adj * psi.column(j);
            let pops: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
            let coupler = pops
                .iter()
                .zip(&self.coupler_mask)
                .filter(|(_, &m)| m)
                .map(|(p, _)| p)
                .sum::<f64>()
                .clamp(0.0, 1.0);
            if i < 4 {
                diag[i] = amps[self.own_index[i]];
            }
            self.populations[i].push(pops);
            self.coupler[i].push(coupler);
        }
        let phase = if self.traced.len() == 4 && diag.iter().all(|d| d.norm() > 1e-6) {
            wrap_phase(diag[0].arg() + diag[3].arg() - diag[1].arg() - diag[2].arg())
        } else {
            f64::NAN
        };
        self.cphase.push(phase);
    }

    fn finish(self) -> EvolutionTrace {
        EvolutionTrace {
            times: self.times,
            initial_labels: self.traced.iter().map(|(s, _)| *s).collect(),
            eigen_labels: self.eigen_labels,
            populations: self.populations,
            coupler_leakage: self.coupler,
            conditional_phase: self.cphase,
        }
    }
}

/// Halves `dt` until halving once more changes the final computational
/// populations by less than `tol`. Returns the accepted step.
pub fn converged_dt(
    eig: &EigenSystem,
    h: &StaticHamiltonian,
    pulse: &DrivePulse,
    start: Option<f64>,
    tol: f64,
    max_halvings: usize,
) -> Result<f64, PropagationError> {
    let mut dt = start.unwrap_or_else(|| default_dt(h, pulse));
    let run = |dt: f64| -> Result<DMatrix<f64>, PropagationError> {
        let opts = PropagationOptions { dt: Some(dt), stride: usize::MAX, ..Default::default() };
        Ok(propagate_computational(eig, h, pulse, &opts)?.states.map(|a| a.norm_sqr()))
    };
    let mut coarse = run(dt)?;
    let mut change = f64::INFINITY;
    for _ in 0..=max_halvings {
        let fine = run(0.5 * dt)?;
        change = (&coarse - &fine).amax();
        if change < tol {
            return Ok(dt);
        }
        dt *= 0.5;
        coarse = fine;
    }
    Err(PropagationError::NotConverged { halvings: max_halvings, change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{build_static_hamiltonian, diagonalize_and_label, DeviceParams};
    use crate::pulse::STANDARD_LAMBDA;
    use approx::assert_abs_diff_eq;

    fn setup(p: &DeviceParams) -> (StaticHamiltonian, EigenSystem) {
        let h = build_static_hamiltonian(p).unwrap();
        let e = diagonalize_and_label(&h).unwrap();
        (h, e)
    }

    #[test]
    fn zero_drive_is_stationary() {
        let (h, eig) = setup(&DeviceParams::default());
        let pulse = DrivePulse::new(STANDARD_LAMBDA, 0.0, 0.1, 10.0);
        let evo = propagate(&eig, &h, &pulse, &PropagationOptions::default()).unwrap();
        let t = pulse.duration;
        for k in 0..27 {
            for j in 0..27 {
                let u = evo.states[(k, j)];
                if k == j {
                    let expected = C64::from_polar(1.0, -TAU * eig.energies[k] * t);
                    assert!((u - expected).norm() < 1e-8, "{k}: {u} vs {expected}");
                } else {
                    assert!(u.norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn split_matches_exact_reference() {
        let (h, eig) = setup(&DeviceParams::default());
        let pulse = DrivePulse::new(STANDARD_LAMBDA, 0.4, 0.1, 2.0);
        let split = propagate_computational(&eig, &h, &pulse, &PropagationOptions::default()).unwrap();
        let exact = propagate_computational(
            &eig,
            &h,
            &pulse,
            &PropagationOptions { integrator: Integrator::Exact, ..Default::default() },
        )
        .unwrap();
        let diff = (split.states.map(|a| a.norm_sqr()) - exact.states.map(|a| a.norm_sqr())).amax();
        assert!(diff < 1e-6, "population difference {diff}");
    }

    #[test]
    fn coarse_step_is_rejected() {
        let (h, eig) = setup(&DeviceParams::default());
        let pulse = DrivePulse::new(STANDARD_LAMBDA, 0.05, 0.1, 5.0);
        let opts = PropagationOptions { dt: Some(0.05), ..Default::default() };
        assert!(matches!(
            propagate(&eig, &h, &pulse, &opts),
            Err(PropagationError::StepTooCoarse { .. })
        ));
    }

    #[test]
    fn trace_final_sample_matches_states() {
        let (h, eig) = setup(&DeviceParams::default());
        let pulse = DrivePulse::new(STANDARD_LAMBDA, 0.4, 0.1, 5.0);
        let opts = PropagationOptions { stride: 37, ..Default::default() };
        let evo = propagate(&eig, &h, &pulse, &opts).unwrap();
        assert_abs_diff_eq!(*evo.trace.times.last().unwrap(), 5.0, epsilon = 1e-12);
        for (i, &label) in evo.trace.initial_labels.iter().enumerate() {
            let col = eig.index_of(label).unwrap();
            let last = evo.trace.populations[i].last().unwrap();
            for k in 0..27 {
                assert_abs_diff_eq!(last[k], evo.states[(k, col)].norm_sqr(), epsilon = 1e-9);
            }
        }
        for pops in &evo.trace.populations {
            for sample in pops {
                assert_abs_diff_eq!(sample.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
            }
        }
    }

}
