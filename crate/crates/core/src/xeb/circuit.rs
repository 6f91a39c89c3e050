use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{XebError, D, N_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SingleQubitGate {
    SqrtX,
    SqrtY,
    /// Square root of `W = (X + Y)/√2`.
    SqrtW,
}

impl SingleQubitGate {
    pub const ALL: [SingleQubitGate; 3] = [Self::SqrtX, Self::SqrtY, Self::SqrtW];

    /// `cos(π/4) I − i sin(π/4) n·σ` for the gate's rotation axis `n`.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let (nx, ny) = match self {
            Self::SqrtX => (1.0, 0.0),
            Self::SqrtY => (0.0, 1.0),
            Self::SqrtW => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        };
        let c = C64::new(FRAC_1_SQRT_2, 0.0);
        let s = FRAC_1_SQRT_2;
        // n·σ = [[0, nx − i ny], [nx + i ny, 0]]
        let off_upper = C64::new(0.0, -s) * C64::new(nx, -ny);
        let off_lower = C64::new(0.0, -s) * C64::new(nx, ny);
        [[c, off_upper], [off_lower, c]]
    }
}

/// One cycle: a single-qubit gate on each qubit, then CZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub gates: [SingleQubitGate; N_QUBITS],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomCircuit {
    pub seed: u64,
    pub cycles: Vec<Cycle>,
}

pub fn generate_random_circuit(n_qubits: usize, cycles: usize, seed: u64) -> Result<RandomCircuit, XebError> {
    if n_qubits != N_QUBITS {
        return Err(XebError::UnsupportedQubitCount(n_qubits));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = Uniform::new(0, SingleQubitGate::ALL.len()).expect("non-empty range");
    let cycles = (0..cycles)
        .map(|_| Cycle {
            gates: [
                SingleQubitGate::ALL[pick.sample(&mut rng)],
                SingleQubitGate::ALL[pick.sample(&mut rng)],
            ],
        })
        .collect();
    Ok(RandomCircuit { seed, cycles })
}

/// Applies a single-qubit gate to `qubit` (0 is the most significant bit).
fn apply_single(state: &mut [C64; D], gate: SingleQubitGate, qubit: usize) {
    let m = gate.matrix();
    let bit = 1 << (N_QUBITS - 1 - qubit);
    for base in 0..D {
        if base & bit != 0 {
            continue;
        }
        let (a, b) = (state[base], state[base | bit]);
        state[base] = m[0][0] * a + m[0][1] * b;
        state[base | bit] = m[1][0] * a + m[1][1] * b;
    }
}

fn final_state(circuit: &RandomCircuit) -> [C64; D] {
    let mut state = [C64::new(0.0, 0.0); D];
    state[0] = C64::new(1.0, 0.0);
    for cycle in &circuit.cycles {
        for (q, g) in cycle.gates.iter().enumerate() {
            apply_single(&mut state, *g, q);
        }
        state[D - 1] = -state[D - 1];
    }
    state
}

/// Exact output distribution of `circuit` started from `|00⟩`, indexed by the
/// bitstring `2·b₁ + b₂`.
pub fn ideal_probs(circuit: &RandomCircuit) -> [f64; D] {
    final_state(circuit).map(|a| a.norm_sqr())
}

/// Measured distribution under a two-qubit depolarizing channel
/// `ρ → (1 − p)ρ + p I/D` after every cycle.
///
/// `shots = 0` returns the exact mixture; otherwise empirical frequencies of
/// `shots` samples drawn with `seed`.
pub fn simulate_measured(circuit: &RandomCircuit, p_dep: f64, shots: usize, seed: u64) -> Result<Vec<f64>, XebError> {
    if !(0.0..=1.0).contains(&p_dep) {
        return Err(XebError::InvalidArgument(format!("depolarizing probability {p_dep} outside [0, 1]")));
    }
    // The channel is unital and commutes with the cycle unitaries, so after m
    // cycles the state is f ρ_ideal + (1 − f) I/D with f = (1 − p)^m.
    let f = (1.0 - p_dep).powi(circuit.cycles.len() as i32);
    let exact: Vec<f64> = ideal_probs(circuit)
        .iter()
        .map(|p| f * p + (1.0 - f) / D as f64)
        .collect();
    if shots == 0 {
        return Ok(exact);
    }
    sample_frequencies(&exact, shots, seed)
}

/// Empirical frequencies of `shots` outcomes drawn from `p` with `seed`.
pub fn sample_frequencies(p: &[f64], shots: usize, seed: u64) -> Result<Vec<f64>, XebError> {
    if shots == 0 {
        return Err(XebError::InvalidArgument("at least one shot is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = rand::distr::weighted::WeightedIndex::new(p)
        .map_err(|e| XebError::InvalidArgument(e.to_string()))?;
    let mut counts = vec![0usize; p.len()];
    for _ in 0..shots {
        counts[dist.sample(&mut rng)] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / shots as f64).collect())
}
