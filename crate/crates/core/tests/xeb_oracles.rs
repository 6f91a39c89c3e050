use approx::assert_abs_diff_eq;
use mwcz_core::xeb::{
    fit_decay, generate_random_circuit, ideal_probs, simulate_measured, spb_purity, xeb_alpha, XebRecord, D,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn records_at(cycles: usize, n: usize, p_dep: f64, shots: usize, seed: u64) -> Vec<XebRecord> {
    (0..n as u64)
        .map(|i| {
            let c = generate_random_circuit(2, cycles, seed + i).unwrap();
            XebRecord {
                cycles,
                circuit_seed: seed + i,
                p_ideal: ideal_probs(&c).to_vec(),
                p_measured: simulate_measured(&c, p_dep, shots, 1_000_000 + seed + i).unwrap(),
                p_measured_qutrit: None,
            }
        })
        .collect()
}

#[test]
fn exact_depolarized_alpha_equals_survival() {
    for (m, p) in [(3, 0.05), (5, 0.02), (12, 0.01)] {
        let recs = records_at(m, 30, p, 0, 7 * m as u64);
        let alpha = xeb_alpha(&recs).unwrap();
        assert_abs_diff_eq!(alpha, (1.0f64 - p).powi(m as i32), epsilon = 1e-12);
    }
}

#[test]
fn sampled_alpha_tracks_survival() {
    let recs = records_at(8, 200, 0.02, 5000, 99);
    let alpha = xeb_alpha(&recs).unwrap();
    let f = 0.98f64.powi(8);
    assert!((alpha - f).abs() < 0.03, "{alpha} vs {f}");
}

#[test]
fn porter_thomas_samples_give_unit_purity() {
    // Haar-random states in dimension D have |ψ_q|² ∝ i.i.d. Exp(1).
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let recs: Vec<XebRecord> = (0..4000)
        .map(|i| {
            let w: Vec<f64> = (0..D).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / s).collect();
            XebRecord { cycles: 10, circuit_seed: i, p_ideal: p.clone(), p_measured: p, p_measured_qutrit: None }
        })
        .collect();
    let est = spb_purity(&recs).unwrap();
    assert!((est.sqrt_purity - 1.0).abs() < 0.02, "{}", est.sqrt_purity);
}

#[test]
fn deep_random_circuits_approach_porter_thomas() {
    let recs = records_at(30, 1500, 0.0, 0, 5);
    let est = spb_purity(&recs).unwrap();
    assert!((est.sqrt_purity - 1.0).abs() < 0.05, "{}", est.sqrt_purity);
}

#[test]
fn decay_fit_over_depolarized_sequence() {
    let p = 0.015;
    let points: Vec<(f64, f64)> = [0, 3, 5, 8, 12, 20, 30]
        .iter()
        .map(|&m| (m as f64, xeb_alpha(&records_at(m, 40, p, 0, 1000 + m as u64)).unwrap()))
        .collect();
    let fit = fit_decay(&points).unwrap();
    assert_abs_diff_eq!(fit.fidelity, 1.0 - p, epsilon = 1e-10);
    assert_abs_diff_eq!(fit.amplitude, 1.0, epsilon = 1e-10);
}
