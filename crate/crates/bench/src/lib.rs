//! Fixtures shared by the benchmarks.

use mwcz_core::device::{build_static_hamiltonian, diagonalize_and_label, EigenSystem};
use mwcz_core::pulse::{DrivePulse, STANDARD_LAMBDA};
use mwcz_core::xeb::{generate_random_circuit, ideal_probs, simulate_measured, XebRecord};
use mwcz_core::{DeviceParams, StaticHamiltonian};

pub fn default_model() -> (StaticHamiltonian, EigenSystem) {
    let h = build_static_hamiltonian(&DeviceParams::default()).expect("default device is valid");
    let eig = diagonalize_and_label(&h).expect("default device labels are unambiguous");
    (h, eig)
}

pub fn short_pulse(duration: f64) -> DrivePulse {
    DrivePulse::new(STANDARD_LAMBDA, 0.05, 0.1, duration)
}

/// `n` noisy exact-mode records at `cycles` cycles.
pub fn xeb_records(cycles: usize, n: usize) -> Vec<XebRecord> {
    (0..n as u64)
        .map(|seed| {
            let c = generate_random_circuit(2, cycles, seed).expect("two qubits");
            XebRecord {
                cycles,
                circuit_seed: seed,
                p_ideal: ideal_probs(&c).to_vec(),
                p_measured: simulate_measured(&c, 0.01, 0, seed).expect("valid noise"),
                p_measured_qutrit: None,
            }
        })
        .collect()
}
