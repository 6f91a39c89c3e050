//! Computational-subspace projection, leakage bookkeeping, conditional phase
//! and CZ gate fidelity.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{BareState, DeviceError, EigenSystem, COMPUTATIONAL};
use crate::optimizer::{nelder_mead, NelderMeadOptions};
use crate::propagation::Evolution;

pub type Matrix4 = [[C64; 4]; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("diagonal entry {index} has magnitude {magnitude:.3e}; conditional phase undefined")]
    VanishingDiagonal { index: usize, magnitude: f64 },
    #[error("propagated states do not include computational state {0}")]
    MissingColumn(BareState),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Distance between two phases on the circle, in `[0, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Where population that left the computational subspace went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageChannel {
    To02,
    To20,
    Coupler,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelLeakage {
    pub to_02: f64,
    pub to_20: f64,
    pub coupler: f64,
    pub other: f64,
}

impl ChannelLeakage {
    pub fn total(&self) -> f64 {
        self.to_02 + self.to_20 + self.coupler + self.other
    }

    pub fn get(&self, channel: LeakageChannel) -> f64 {
        match channel {
            LeakageChannel::To02 => self.to_02,
            LeakageChannel::To20 => self.to_20,
            LeakageChannel::Coupler => self.coupler,
            LeakageChannel::Other => self.other,
        }
    }

    fn add(&mut self, channel: LeakageChannel, p: f64) {
        match channel {
            LeakageChannel::To02 => self.to_02 += p,
            LeakageChannel::To20 => self.to_20 += p,
            LeakageChannel::Coupler => self.coupler += p,
            LeakageChannel::Other => self.other += p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    /// `⟨label_i|U|label_j⟩` over `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub u_projected: Matrix4,
    pub fidelity: f64,
    /// Single-qubit Z phases `(φ₁, φ₂)` that maximize the fidelity.
    pub virtual_z: (f64, f64),
    /// `None` when a diagonal amplitude vanished.
    pub conditional_phase: Option<f64>,
    /// Leakage out of each computational column.
    pub leakage: [ChannelLeakage; 4],
}

impl GateResult {
    pub fn error(&self) -> f64 {
        1.0 - self.fidelity
    }

    /// Leakage averaged over the four computational input states.
    pub fn mean_leakage(&self) -> f64 {
        self.leakage.iter().map(ChannelLeakage::total).sum::<f64>() / 4.0
    }

    pub fn column_norm_sqr(&self, j: usize) -> f64 {
        (0..4).map(|i| self.u_projected[i][j].norm_sqr()).sum()
    }

    /// Builds the result from a propagation containing at least the four
    /// computational columns.
    pub fn from_evolution(evo: &Evolution, eig: &EigenSystem) -> Result<Self, GateError> {
        let mut columns = Vec::with_capacity(4);
        for s in COMPUTATIONAL {
            let k = eig.index_of(s)?;
            let j = evo
                .initial
                .iter()
                .position(|&i| i == k)
                .ok_or(GateError::MissingColumn(s))?;
            columns.push(j);
        }
        project_columns(&evo.states, &columns, eig)
    }
}

/// Leakage channel of eigenstate `k`, or `None` for computational states.
pub fn channel_of(eig: &EigenSystem, k: usize) -> Option<LeakageChannel> {
    if COMPUTATIONAL.iter().any(|&s| eig.index_of(s) == Ok(k)) {
        return None;
    }
    let label = if eig.index_of(BareState::qubits(0, 2)) == Ok(k) {
        BareState::qubits(0, 2)
    } else if eig.index_of(BareState::qubits(2, 0)) == Ok(k) {
        BareState::qubits(2, 0)
    } else {
        eig.dominant_bare(k)
    };
    Some(match label {
        l if l.nc >= 1 => LeakageChannel::Coupler,
        l if l == BareState::qubits(0, 2) => LeakageChannel::To02,
        l if l == BareState::qubits(2, 0) => LeakageChannel::To20,
        _ => LeakageChannel::Other,
    })
}

/// Projects a full unitary (eigenbasis) onto the computational eigenlabels.
pub fn project_computational(u_full: &DMatrix<C64>, eig: &EigenSystem) -> Result<GateResult, GateError> {
    let columns = COMPUTATIONAL
        .iter()
        .map(|&s| eig.index_of(s))
        .collect::<Result<Vec<_>, _>>()?;
    project_columns(u_full, &columns, eig)
}

/// `states` holds eigenbasis amplitudes; `columns[j]` is the column that
/// started in the `j`-th computational state.
fn project_columns(states: &DMatrix<C64>, columns: &[usize], eig: &EigenSystem) -> Result<GateResult, GateError> {
    let rows = COMPUTATIONAL
        .iter()
        .map(|&s| eig.index_of(s))
        .collect::<Result<Vec<_>, _>>()?;
    let channels: Vec<Option<LeakageChannel>> = (0..eig.dimension()).map(|k| channel_of(eig, k)).collect();

    let mut u = [[C64::new(0.0, 0.0); 4]; 4];
    let mut leakage = [ChannelLeakage::default(); 4];
    for (j, &col) in columns.iter().enumerate() {
        for (i, &row) in rows.iter().enumerate() {
            u[i][j] = states[(row, col)];
        }
        for (k, ch) in channels.iter().enumerate() {
            if let Some(ch) = ch {
                leakage[j].add(*ch, states[(k, col)].norm_sqr());
            }
        }
    }
    let (fidelity, virtual_z) = gate_fidelity_with_phases(&u);
    Ok(GateResult {
        u_projected: u,
        fidelity,
        virtual_z,
        conditional_phase: conditional_phase(&u).ok(),
        leakage,
    })
}

/// `arg u₀₀ + arg u₁₁ − arg u₀₁ − arg u₁₀`, wrapped to `(−π, π]`.
pub fn conditional_phase(u: &Matrix4) -> Result<f64, GateError> {
    for i in 0..4 {
        let magnitude = u[i][i].norm();
        if magnitude <= 1e-6 {
            return Err(GateError::VanishingDiagonal { index: i, magnitude });
        }
    }
    Ok(wrap_phase(u[0][0].arg() + u[3][3].arg() - u[1][1].arg() - u[2][2].arg()))
}

/// `|Tr(CZ† · Z(φ₁)⊗Z(φ₂) · u)|²`; only the diagonal of `u` contributes.
fn overlap_sqr(d: &[C64; 4], phi1: f64, phi2: f64) -> f64 {
    let z1 = C64::from_polar(1.0, phi1);
    let z2 = C64::from_polar(1.0, phi2);
    (d[0] + z2 * d[1] + z1 * d[2] - z1 * z2 * d[3]).norm_sqr()
}

/// Average gate fidelity against CZ, maximized over virtual Z phases.
pub fn gate_fidelity(u: &Matrix4) -> f64 {
    gate_fidelity_with_phases(u).0
}

pub fn gate_fidelity_with_phases(u: &Matrix4) -> (f64, (f64, f64)) {
    let d = [u[0][0], u[1][1], u[2][2], u[3][3]];
    let trace_uu: f64 = u.iter().flatten().map(|x| x.norm_sqr()).sum();

    const GRID: usize = 64;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for a in 0..GRID {
        let phi1 = TAU * a as f64 / GRID as f64;
        for b in 0..GRID {
            let phi2 = TAU * b as f64 / GRID as f64;
            let v = overlap_sqr(&d, phi1, phi2);
            if v > best.0 {
                best = (v, phi1, phi2);
            }
        }
    }

    let opts = NelderMeadOptions { max_iterations: 400, diameter_tol: 1e-10, ..Default::default() };
    let step = TAU / GRID as f64 / 2.0;
    let refined = nelder_mead(
        |x: &[f64]| -overlap_sqr(&d, x[0], x[1]),
        &[best.1, best.2],
        &[step, step],
        &opts,
    );
    let (mut top, mut phi1, mut phi2) = best;
    if let Ok(r) = refined {
        if -r.f_best > top {
            top = -r.f_best;
            phi1 = r.x_best[0];
            phi2 = r.x_best[1];
        }
    }
    let f = ((top + trace_uu) / 20.0).clamp(0.0, 1.0);
    (f, (wrap_phase(phi1), wrap_phase(phi2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{eigensystem, DeviceParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn phase_distance_wraps() {
        assert_abs_diff_eq!(phase_distance(PI, -PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phase_distance(0.1, -0.1), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(phase_distance(3.0, -3.0), TAU - 6.0, epsilon = 1e-12);
    }

    fn diag(d: [C64; 4]) -> Matrix4 {
        let mut u = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            u[i][i] = d[i];
        }
        u
    }

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn cz_phases() {
        let cz = diag([one(), one(), one(), -one()]);
        assert_abs_diff_eq!(conditional_phase(&cz).unwrap(), PI, epsilon = 1e-15);
        let id = diag([one(); 4]);
        assert_eq!(conditional_phase(&id).unwrap(), 0.0);
    }

    #[test]
    fn conditional_phase_arithmetic() {
        for theta in [-3.0, -1.0, 0.0, 0.5, 2.0, 3.1] {
            let u = diag([
                one(),
                C64::from_polar(1.0, PI / 4.0),
                C64::from_polar(1.0, PI / 3.0),
                C64::from_polar(1.0, theta),
            ]);
            let expected = wrap_phase(theta - 7.0 * PI / 12.0);
            assert_abs_diff_eq!(conditional_phase(&u).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn vanishing_diagonal_errors() {
        let u = diag([one(), one(), C64::new(1e-7, 0.0), one()]);
        assert!(matches!(
            conditional_phase(&u),
            Err(GateError::VanishingDiagonal { index: 2, .. })
        ));
    }

    #[test]
    fn fidelity_reference_points() {
        let cz = diag([one(), one(), one(), -one()]);
        assert_abs_diff_eq!(gate_fidelity(&cz), 1.0, epsilon = 1e-12);
        let zero = [[C64::new(0.0, 0.0); 4]; 4];
        assert_eq!(gate_fidelity(&zero), 0.0);
        // Exhaustive fine-grid oracle for the identity.
        let id = diag([one(); 4]);
        let d = [one(); 4];
        let mut best = 0.0f64;
        let n = 720;
        for a in 0..n {
            for b in 0..n {
                let (p1, p2) = (TAU * a as f64 / n as f64, TAU * b as f64 / n as f64);
                best = best.max(overlap_sqr(&d, p1, p2));
            }
        }
        let oracle = (best + 4.0) / 20.0;
        assert_abs_diff_eq!(oracle, 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(gate_fidelity(&id), oracle, epsilon = 1e-9);
    }

    #[test]
    fn fidelity_ignores_local_z() {
        let u = diag([
            C64::from_polar(1.0, 0.3),
            C64::from_polar(1.0, 0.3 + 1.1),
            C64::from_polar(1.0, 0.3 - 0.4),
            C64::from_polar(1.0, 0.3 + 1.1 - 0.4 + PI),
        ]);
        assert_abs_diff_eq!(gate_fidelity(&u), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_abs_diff_eq!(wrap_phase(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_projection() {
        let eig = eigensystem(&DeviceParams::default()).unwrap();
        let u = DMatrix::<C64>::identity(27, 27);
        let g = project_computational(&u, &eig).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_eq!(g.u_projected[i][j], C64::new(expected, 0.0));
            }
            assert_eq!(g.leakage[i].total(), 0.0);
        }
    }

    #[test]
    fn swap_11_with_02_is_full_leakage() {
        let eig = eigensystem(&DeviceParams::default()).unwrap();
        let a = eig.index_of(BareState::qubits(1, 1)).unwrap();
        let b = eig.index_of(BareState::qubits(0, 2)).unwrap();
        let mut u = DMatrix::<C64>::identity(27, 27);
        u.swap_columns(a, b);
        let g = project_computational(&u, &eig).unwrap();
        assert_eq!(g.column_norm_sqr(3), 0.0);
        assert_eq!(g.leakage[3].to_02, 1.0);
        assert_eq!(g.leakage[3].total(), 1.0);
        assert_eq!(g.leakage[0].total(), 0.0);
    }
}
