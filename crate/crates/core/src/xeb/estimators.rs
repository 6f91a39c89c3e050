use serde::{Deserialize, Serialize};

use super::XebError;

/// Measured and ideal probabilities of one random circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XebRecord {
    pub cycles: usize,
    pub circuit_seed: u64,
    /// Ideal probabilities over the `D = 2^N` bitstrings.
    pub p_ideal: Vec<f64>,
    /// Raw two-level measured probabilities over the same bitstrings.
    pub p_measured: Vec<f64>,
    /// Raw three-level readout over `3^N` outcomes, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_measured_qutrit: Option<Vec<f64>>,
}

fn check_records(records: &[XebRecord]) -> Result<usize, XebError> {
    if records.len() < 2 {
        return Err(XebError::TooFewRecords { need: 2, got: records.len() });
    }
    let (m, d) = (records[0].cycles, records[0].p_ideal.len());
    if d == 0 {
        return Err(XebError::EmptyPool);
    }
    if records
        .iter()
        .any(|r| r.cycles != m || r.p_ideal.len() != d || r.p_measured.len() != d)
    {
        return Err(XebError::InconsistentRecords);
    }
    Ok(d)
}

/// Sequence fidelity
///
/// ```text
/// α = mean_c[Σ_q p_m(q)(D p_s(q) − 1)] / (D · mean_c[Σ_q p_s(q)²] − 1)
/// ```
///
/// with numerator and denominator averaged over circuits separately.
pub fn xeb_alpha(records: &[XebRecord]) -> Result<f64, XebError> {
    let d = check_records(records)? as f64;
    let n = records.len() as f64;
    let numerator = records
        .iter()
        .map(|r| {
            r.p_measured
                .iter()
                .zip(&r.p_ideal)
                .map(|(pm, ps)| pm * (d * ps - 1.0))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    let mean_sq = records
        .iter()
        .map(|r| r.p_ideal.iter().map(|p| p * p).sum::<f64>())
        .sum::<f64>()
        / n;
    let denominator = d * mean_sq - 1.0;
    if denominator.abs() < 1e-12 {
        return Err(XebError::UndefinedAlpha(denominator));
    }
    Ok(numerator / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpbEstimate {
    /// `√P`.
    pub sqrt_purity: f64,
    /// Pooled population variance of the measured probabilities.
    pub variance: f64,
    /// Set when `√P > 1`, which signals an ensemble that is not scrambling.
    pub exceeds_one: bool,
}

/// Speckle purity `√P = √(Var(p_m) · D²(D + 1)/(D − 1))`, with `Var` the
/// population variance over all bitstrings of all circuits.
pub fn spb_purity(records: &[XebRecord]) -> Result<SpbEstimate, XebError> {
    let d = check_records(records)? as f64;
    let pool: Vec<f64> = records.iter().flat_map(|r| r.p_measured.iter().copied()).collect();
    if pool.is_empty() {
        return Err(XebError::EmptyPool);
    }
    let n = pool.len() as f64;
    let mean = pool.iter().sum::<f64>() / n;
    let variance = pool.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    let sqrt_purity = (variance * d * d * (d + 1.0) / (d - 1.0)).sqrt();
    let exceeds_one = sqrt_purity > 1.0;
    if exceeds_one {
        log::warn!("speckle purity {sqrt_purity:.4} exceeds 1; ensemble may not be scrambling");
    }
    Ok(SpbEstimate { sqrt_purity, variance, exceeds_one })
}

/// Indices of `|02⟩, |12⟩, |20⟩, |21⟩, |22⟩` in the base-3 ordering `3·n₁ + n₂`.
pub const LEAK_OUTCOMES: [usize; 5] = [2, 5, 6, 7, 8];

/// `P(02) + P(12) + P(20) + P(21) + P(22)` of a nine-outcome distribution.
pub fn leak_metric(p: &[f64]) -> Result<f64, XebError> {
    if p.len() != 9 {
        return Err(XebError::OutcomeCount { expected: 9, got: p.len() });
    }
    Ok(LEAK_OUTCOMES.iter().map(|&i| p[i]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(ps: Vec<f64>, pm: Vec<f64>) -> XebRecord {
        XebRecord { cycles: 3, circuit_seed: 0, p_ideal: ps, p_measured: pm, p_measured_qutrit: None }
    }

    #[test]
    fn alpha_limits() {
        let a = vec![0.5, 0.3, 0.15, 0.05];
        let b = vec![0.1, 0.6, 0.2, 0.1];
        let ideal = [rec(a.clone(), a.clone()), rec(b.clone(), b.clone())];
        assert_abs_diff_eq!(xeb_alpha(&ideal).unwrap(), 1.0, epsilon = 1e-12);
        let uniform = [rec(a, vec![0.25; 4]), rec(b, vec![0.25; 4])];
        assert_abs_diff_eq!(xeb_alpha(&uniform).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_errors() {
        let u = vec![0.25; 4];
        assert!(matches!(
            xeb_alpha(&[rec(u.clone(), u.clone())]),
            Err(XebError::TooFewRecords { .. })
        ));
        assert!(matches!(
            xeb_alpha(&[rec(u.clone(), u.clone()), rec(u.clone(), u.clone())]),
            Err(XebError::UndefinedAlpha(_))
        ));
        let mut other = rec(u.clone(), u.clone());
        other.cycles = 4;
        assert_eq!(xeb_alpha(&[rec(u.clone(), u), other]), Err(XebError::InconsistentRecords));
    }

    #[test]
    fn uniform_speckle_is_zero() {
        let u = vec![0.25; 4];
        let s = spb_purity(&[rec(u.clone(), u.clone()), rec(u.clone(), u)]).unwrap();
        assert_eq!(s.sqrt_purity, 0.0);
        assert!(!s.exceeds_one);
    }

    #[test]
    fn leak_reference_values() {
        assert_eq!(leak_metric(&[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        let mut p = [0.0; 9];
        p[8] = 1.0;
        assert_eq!(leak_metric(&p).unwrap(), 1.0);
        assert_abs_diff_eq!(leak_metric(&[1.0 / 9.0; 9]).unwrap(), 5.0 / 9.0, epsilon = 1e-15);
        assert!(matches!(leak_metric(&[0.25; 4]), Err(XebError::OutcomeCount { .. })));
    }
}
