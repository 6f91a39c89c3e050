//! Static Hamiltonian of the qubit–coupler–qubit chain and its labeled
//! eigensystem.
//!
//! The chain is modeled as three Duffing oscillators with exchange couplings,
//!
//! ```text
//! H/2π = Σ_j [ω_j n_j + (η_j/2) n_j (n_j − 1)] + Σ_{j<k} g_jk (a_j† a_k + a_j a_k†)
//! ```
//!
//! in a truncated Fock space. Basis states are ordered `(n1, nc, n2)` with `n2`
//! fastest. All frequencies are ordinary frequencies in GHz.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest Hilbert-space dimension the dense routines will build.
pub const MAX_DIMENSION: usize = 4096;

/// Overlap gap below which a label assignment is considered ambiguous.
pub const AMBIGUITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid device parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("Hilbert space dimension {dim} exceeds the budget of {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("eigen-decomposition failed to converge")]
    Diagonalization,
    #[error("label {0} is ambiguous (near-degenerate overlap)")]
    AmbiguousLabel(BareState),
    #[error("label {0} is outside the truncated space")]
    UnknownLabel(BareState),
    #[error("could not bracket a root for {0}")]
    NoRoot(&'static str),
}

/// One of the three oscillator modes of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Q1,
    Coupler,
    Q2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Q1, Mode::Coupler, Mode::Q2];

    /// Position of the mode in the `(n1, nc, n2)` tensor ordering.
    pub fn slot(self) -> usize {
        match self {
            Mode::Q1 => 0,
            Mode::Coupler => 1,
            Mode::Q2 => 2,
        }
    }
}

/// Bare product state `|n1, nc, n2⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BareState {
    pub n1: usize,
    pub nc: usize,
    pub n2: usize,
}

impl BareState {
    pub const fn new(n1: usize, nc: usize, n2: usize) -> Self {
        Self { n1, nc, n2 }
    }

    /// Two-qubit ket `|n1 n2⟩` with the coupler in its ground state.
    pub const fn qubits(n1: usize, n2: usize) -> Self {
        Self { n1, nc: 0, n2 }
    }

    pub fn index(&self, levels: usize) -> usize {
        (self.n1 * levels + self.nc) * levels + self.n2
    }

    pub fn from_index(index: usize, levels: usize) -> Self {
        Self {
            n1: index / (levels * levels),
            nc: (index / levels) % levels,
            n2: index % levels,
        }
    }

    pub fn get(&self, mode: Mode) -> usize {
        match mode {
            Mode::Q1 => self.n1,
            Mode::Coupler => self.nc,
            Mode::Q2 => self.n2,
        }
    }

    fn set(&mut self, mode: Mode, n: usize) {
        match mode {
            Mode::Q1 => self.n1 = n,
            Mode::Coupler => self.nc = n,
            Mode::Q2 => self.n2 = n,
        }
    }

    pub fn excitations(&self) -> usize {
        self.n1 + self.nc + self.n2
    }

    /// Short two-index name such as `11`, only for coupler-ground states.
    pub fn qubit_name(&self) -> Option<String> {
        (self.nc == 0).then(|| format!("{}{}", self.n1, self.n2))
    }
}

impl fmt::Display for BareState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}⟩", self.n1, self.nc, self.n2)
    }
}

/// The four computational states in `|00⟩, |01⟩, |10⟩, |11⟩` order.
pub const COMPUTATIONAL: [BareState; 4] = [
    BareState::qubits(0, 0),
    BareState::qubits(0, 1),
    BareState::qubits(1, 0),
    BareState::qubits(1, 1),
];

/// Mode frequencies, anharmonicities and couplings of the chain (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega_q1: f64,
    pub omega_q2: f64,
    pub omega_c: f64,
    pub eta_q1: f64,
    pub eta_q2: f64,
    pub eta_c: f64,
    pub g_1c: f64,
    pub g_2c: f64,
    pub g_12: f64,
    pub levels: usize,
}

/// Bare detuning the default device is built with.
pub const DEFAULT_DETUNING: f64 = 0.11724;

impl Default for DeviceParams {
    fn default() -> Self {
        let omega_q1 = 5.20;
        Self {
            omega_q1,
            omega_q2: omega_q1 - DEFAULT_DETUNING,
            omega_c: 6.30,
            eta_q1: -0.22,
            eta_q2: -0.22,
            eta_c: -0.10,
            g_1c: 0.090,
            g_2c: 0.090,
            g_12: 0.006,
            levels: 3,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let freqs = [
            ("omega_q1", self.omega_q1),
            ("omega_q2", self.omega_q2),
            ("omega_c", self.omega_c),
        ];
        for (name, value) in freqs {
            if !(value.is_finite() && value > 0.0) {
                return Err(DeviceError::InvalidParam {
                    name,
                    reason: format!("frequency must be finite and positive, got {value}"),
                });
            }
        }
        let finite = [
            ("eta_q1", self.eta_q1),
            ("eta_q2", self.eta_q2),
            ("eta_c", self.eta_c),
            ("g_1c", self.g_1c),
            ("g_2c", self.g_2c),
            ("g_12", self.g_12),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(DeviceError::InvalidParam {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        if self.levels < 2 {
            return Err(DeviceError::InvalidParam {
                name: "levels",
                reason: format!("need at least 2 levels per mode, got {}", self.levels),
            });
        }
        let dim = self.levels.checked_pow(3).unwrap_or(usize::MAX);
        if dim > MAX_DIMENSION {
            return Err(DeviceError::DimensionOverflow { dim, max: MAX_DIMENSION });
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.levels.pow(3)
    }

    pub fn frequency(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Q1 => self.omega_q1,
            Mode::Coupler => self.omega_c,
            Mode::Q2 => self.omega_q2,
        }
    }

    pub fn anharmonicity(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Q1 => self.eta_q1,
            Mode::Coupler => self.eta_c,
            Mode::Q2 => self.eta_q2,
        }
    }

    pub fn max_mode_frequency(&self) -> f64 {
        self.omega_q1.max(self.omega_q2).max(self.omega_c)
    }

    /// `ω_q1 − ω_q2` before dressing by the couplings.
    pub fn bare_detuning(&self) -> f64 {
        self.omega_q1 - self.omega_q2
    }

    /// Same device with every coupling multiplied by `scale`.
    pub fn scaled_couplings(&self, scale: f64) -> Self {
        Self {
            g_1c: self.g_1c * scale,
            g_2c: self.g_2c * scale,
            g_12: self.g_12 * scale,
            ..*self
        }
    }

    /// Moves `omega_q2` so that the dressed detuning equals `target`.
    pub fn with_dressed_detuning(&self, target: f64) -> Result<Self, DeviceError> {
        let residual = |omega_q2: f64| -> Result<f64, DeviceError> {
            let p = Self { omega_q2, ..*self };
            Ok(detune(&p)? - target)
        };
        let guess = self.omega_q1 - target;
        // The dressing shift is a few MHz for dispersive parameters.
        let half_width = 0.02;
        let (mut lo, mut hi) = (guess - half_width, guess + half_width);
        let (mut f_lo, f_hi) = (residual(lo)?, residual(hi)?);
        if f_lo.signum() == f_hi.signum() {
            return Err(DeviceError::NoRoot("dressed detuning"));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let f_mid = residual(mid)?;
            if f_mid == 0.0 || (hi - lo) < 1e-13 {
                lo = mid;
                hi = mid;
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self { omega_q2: 0.5 * (lo + hi), ..*self })
    }
}

/// Real symmetric static Hamiltonian in the number basis (GHz).
#[derive(Debug, Clone, PartialEq)]
pub struct StaticHamiltonian {
    pub matrix: DMatrix<f64>,
    pub levels: usize,
}

impl StaticHamiltonian {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Matrix of `a + a†` acting on `mode`, in the full product basis.
pub fn quadrature_operator(mode: Mode, levels: usize) -> DMatrix<f64> {
    let dim = levels.pow(3);
    let mut x = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let s = BareState::from_index(i, levels);
        let n = s.get(mode);
        if n + 1 < levels {
            let mut up = s;
            up.set(mode, n + 1);
            let amp = ((n + 1) as f64).sqrt();
            x[(up.index(levels), i)] = amp;
            x[(i, up.index(levels))] = amp;
        }
    }
    x
}

pub fn build_static_hamiltonian(params: &DeviceParams) -> Result<StaticHamiltonian, DeviceError> {
    params.validate()?;
    let levels = params.levels;
    let dim = params.dimension();
    let mut h = DMatrix::zeros(dim, dim);

    for i in 0..dim {
        let s = BareState::from_index(i, levels);
        h[(i, i)] = Mode::ALL
            .iter()
            .map(|&m| {
                let n = s.get(m) as f64;
                params.frequency(m) * n + 0.5 * params.anharmonicity(m) * n * (n - 1.0)
            })
            .sum();
    }

    let pairs = [
        (Mode::Q1, Mode::Coupler, params.g_1c),
        (Mode::Q2, Mode::Coupler, params.g_2c),
        (Mode::Q1, Mode::Q2, params.g_12),
    ];
    for (j, k, g) in pairs {
        if g == 0.0 {
            continue;
        }
        // g (a_j† a_k + h.c.): move one quantum from k to j.
        for i in 0..dim {
            let s = BareState::from_index(i, levels);
            let (nj, nk) = (s.get(j), s.get(k));
            if nk == 0 || nj + 1 >= levels {
                continue;
            }
            let mut t = s;
            t.set(j, nj + 1);
            t.set(k, nk - 1);
            let amp = g * ((nk as f64) * (nj as f64 + 1.0)).sqrt();
            let target = t.index(levels);
            h[(target, i)] += amp;
            h[(i, target)] += amp;
        }
    }

    Ok(StaticHamiltonian { matrix: h, levels })
}

/// Label assignment of one bare state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub eigen_index: usize,
    pub overlap: f64,
    pub runner_up: f64,
    pub ambiguous: bool,
}

/// Eigen-decomposition of the static Hamiltonian with bare-state labels.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub levels: usize,
    /// Ascending eigenvalues (GHz).
    pub energies: Vec<f64>,
    /// Eigenvectors as columns in the product basis.
    pub vectors: DMatrix<f64>,
    /// Assignment per bare state, indexed by [`BareState::index`].
    pub assignments: Vec<Assignment>,
}

impl EigenSystem {
    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    pub fn assignment(&self, state: BareState) -> Result<&Assignment, DeviceError> {
        if state.n1 >= self.levels || state.nc >= self.levels || state.n2 >= self.levels {
            return Err(DeviceError::UnknownLabel(state));
        }
        Ok(&self.assignments[state.index(self.levels)])
    }

    /// Eigen index carrying `state`'s label; fails on ambiguous assignments.
    pub fn index_of(&self, state: BareState) -> Result<usize, DeviceError> {
        let a = self.assignment(state)?;
        if a.ambiguous {
            return Err(DeviceError::AmbiguousLabel(state));
        }
        Ok(a.eigen_index)
    }

    pub fn energy_of(&self, state: BareState) -> Result<f64, DeviceError> {
        Ok(self.energies[self.index_of(state)?])
    }

    pub fn is_ambiguous(&self, state: BareState) -> bool {
        self.assignment(state).map(|a| a.ambiguous).unwrap_or(true)
    }

    /// Bare state with the largest weight in eigenvector `k`.
    pub fn dominant_bare(&self, k: usize) -> BareState {
        let col = self.vectors.column(k);
        let (idx, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, v)| if v * v > best.1 { (i, v * v) } else { best });
        BareState::from_index(idx, self.levels)
    }

    /// Label of eigenvector `k`: the bare state assigned to it, falling back to
    /// its dominant component.
    pub fn label_of(&self, k: usize) -> BareState {
        self.assignments
            .iter()
            .enumerate()
            .find(|(_, a)| a.eigen_index == k && !a.ambiguous)
            .map(|(i, _)| BareState::from_index(i, self.levels))
            .unwrap_or_else(|| self.dominant_bare(k))
    }
}

pub fn diagonalize_and_label(h: &StaticHamiltonian) -> Result<EigenSystem, DeviceError> {
    let dim = h.dimension();
    let eig = SymmetricEigen::try_new(h.matrix.clone(), 1e-15, 100_000)
        .ok_or(DeviceError::Diagonalization)?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (new, &old) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(old).into_owned();
        // Fix the sign so the largest component is positive.
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(new, &col);
    }

    let mut assignments: Vec<Assignment> = (0..dim)
        .map(|bare| {
            let row = vectors.row(bare);
            let (mut best, mut best_ov, mut second) = (0, -1.0, -1.0);
            for (k, v) in row.iter().enumerate() {
                let ov = v * v;
                if ov > best_ov {
                    second = best_ov;
                    best_ov = ov;
                    best = k;
                } else if ov > second {
                    second = ov;
                }
            }
            let second = second.max(0.0);
            Assignment {
                eigen_index: best,
                overlap: best_ov,
                runner_up: second,
                ambiguous: best_ov - second < AMBIGUITY_THRESHOLD,
            }
        })
        .collect();

    // Injectivity: bare states competing for one eigenvector are all flagged.
    let mut claims = vec![0usize; dim];
    for a in &assignments {
        claims[a.eigen_index] += 1;
    }
    for a in &mut assignments {
        if claims[a.eigen_index] > 1 {
            a.ambiguous = true;
        }
    }

    Ok(EigenSystem { levels: h.levels, energies, vectors, assignments })
}

/// Builds and labels the static eigensystem of `params`.
pub fn eigensystem(params: &DeviceParams) -> Result<EigenSystem, DeviceError> {
    diagonalize_and_label(&build_static_hamiltonian(params)?)
}

/// Dressed detuning `ω(|10⟩) − ω(|01⟩)`, in GHz.
pub fn detune(params: &DeviceParams) -> Result<f64, DeviceError> {
    let eig = eigensystem(params)?;
    transition_frequency(&eig, BareState::qubits(1, 0), BareState::qubits(0, 1))
}

/// `ω(from) − ω(to)` between two labeled eigenstates (GHz).
pub fn transition_frequency(
    eig: &EigenSystem,
    from: BareState,
    to: BareState,
) -> Result<f64, DeviceError> {
    Ok(eig.energy_of(from)? - eig.energy_of(to)?)
}
