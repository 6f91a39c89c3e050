use serde::{Deserialize, Serialize};

use super::XebError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Per-cycle fidelity `f`.
    pub fidelity: f64,
    /// Amplitude `A` at `m = 0`.
    pub amplitude: f64,
    /// Points rejected for nonpositive values.
    pub rejected: usize,
}

/// Least-squares fit of `value = A·f^m` on `ln(value)`.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit, XebError> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(m, v)| m.is_finite() && v.is_finite() && *v > 0.0)
        .map(|&(m, v)| (m, v.ln()))
        .collect();
    if used.len() < 3 {
        return Err(XebError::TooFewPoints(used.len()));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(XebError::InvalidArgument("all points share one cycle count".into()));
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(DecayFit {
        fidelity: slope.exp(),
        amplitude: intercept.exp(),
        rejected: points.len() - used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_models() {
        let pts: Vec<(f64, f64)> = (0..20).map(|m| (m as f64, 0.95f64.powi(m))).collect();
        let fit = fit_decay(&pts).unwrap();
        assert_abs_diff_eq!(fit.fidelity, 0.95, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.amplitude, 1.0, epsilon = 1e-9);

        let pts: Vec<(f64, f64)> = (0..20).map(|m| (m as f64, 0.8 * 0.99f64.powi(m))).collect();
        let fit = fit_decay(&pts).unwrap();
        assert_abs_diff_eq!(fit.fidelity, 0.99, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.amplitude, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_points() {
        let pts = [(0.0, 1.0), (1.0, -0.1), (2.0, 0.81), (3.0, 0.0), (4.0, 0.6561)];
        let fit = fit_decay(&pts).unwrap();
        assert_eq!(fit.rejected, 2);
        assert_abs_diff_eq!(fit.fidelity, 0.9, epsilon = 1e-12);
        assert_eq!(fit_decay(&pts[..4]), Err(XebError::TooFewPoints(2)));
    }
}
