use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::XebError;

/// Row-stochastic readout matrix: `F_ij` is the probability of measuring `j`
/// after preparing `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub entries: DMatrix<f64>,
    /// Qubits covered, in tensor order.
    pub qubit_ids: Vec<String>,
    /// Outcome alphabet size per qubit.
    pub alphabet: Vec<usize>,
}

const ROW_TOL: f64 = 1e-6;

impl ConfusionMatrix {
    pub fn new(qubit_id: impl Into<String>, entries: DMatrix<f64>) -> Result<Self, XebError> {
        let alphabet = entries.nrows();
        let m = Self { qubit_ids: vec![qubit_id.into()], alphabet: vec![alphabet], entries };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(qubit_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self, XebError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(XebError::NotSquare { rows: n, cols: bad.len() });
        }
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(qubit_id, entries)
    }

    pub fn identity(qubit_id: impl Into<String>, levels: usize) -> Self {
        Self {
            qubit_ids: vec![qubit_id.into()],
            alphabet: vec![levels],
            entries: DMatrix::identity(levels, levels),
        }
    }

    /// Parses whitespace- or comma-separated rows; `#` starts a comment.
    pub fn parse(qubit_id: impl Into<String>, text: &str) -> Result<Self, XebError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| XebError::Parse(format!("line {}: `{t}`: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(XebError::Parse("no rows".into()));
        }
        Self::from_rows(qubit_id, &rows)
    }

    pub fn load(qubit_id: impl Into<String>, path: &Path) -> Result<Self, XebError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| XebError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(qubit_id, &text)
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn validate(&self) -> Result<(), XebError> {
        let (rows, cols) = self.entries.shape();
        if rows != cols {
            return Err(XebError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = self.entries[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(XebError::EntryOutOfRange { row: i, col: j, value: v });
                }
            }
            let sum = self.entries.row(i).sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(XebError::NotStochastic { row: i, sum });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfusion {
    pub matrix: ConfusionMatrix,
    /// Inputs used different outcome alphabets (e.g. 2- and 3-level readout).
    pub mixed_alphabet: bool,
}

/// Kronecker product of single-qubit readout matrices in qubit order.
pub fn joint_confusion(per_qubit: &[ConfusionMatrix]) -> Result<JointConfusion, XebError> {
    let first = per_qubit
        .first()
        .ok_or_else(|| XebError::InvalidArgument("no confusion matrices given".into()))?;
    let mut joint = first.clone();
    for m in &per_qubit[1..] {
        joint.entries = joint.entries.kronecker(&m.entries);
        joint.qubit_ids.extend(m.qubit_ids.iter().cloned());
        joint.alphabet.extend(m.alphabet.iter().copied());
    }
    let mixed_alphabet = joint.alphabet.windows(2).any(|w| w[0] != w[1]);
    if mixed_alphabet {
        log::warn!("joint readout matrix mixes outcome alphabets {:?}", joint.alphabet);
    }
    Ok(JointConfusion { matrix: joint, mixed_alphabet })
}

fn check_len(p: &[f64], m: &ConfusionMatrix) -> Result<(), XebError> {
    if p.len() != m.dimension() {
        return Err(XebError::OutcomeCount { expected: m.dimension(), got: p.len() });
    }
    Ok(())
}

/// Readout-distorted distribution `Mᵀ p_true`.
pub fn apply_confusion(p_true: &[f64], m: &ConfusionMatrix) -> Result<Vec<f64>, XebError> {
    check_len(p_true, m)?;
    let v = m.entries.transpose() * DVector::from_column_slice(p_true);
    Ok(v.as_slice().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutCorrection {
    /// Clipped and renormalized distribution.
    pub p: Vec<f64>,
    /// Direct solution of `Mᵀ p = p_raw` before clipping.
    pub unclipped: Vec<f64>,
    /// Total negative mass removed by clipping.
    pub clipped_mass: f64,
    /// 2-norm condition number of `M`.
    pub condition_number: f64,
}

/// Solves `Mᵀ p_true = p_raw`, clips negative entries to zero and renormalizes.
pub fn correct_readout(p_raw: &[f64], m: &ConfusionMatrix) -> Result<ReadoutCorrection, XebError> {
    check_len(p_raw, m)?;
    let sv = m.entries.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-14 * smax) {
        return Err(XebError::Singular);
    }
    let lu = m.entries.transpose().lu();
    let x = lu
        .solve(&DVector::from_column_slice(p_raw))
        .ok_or(XebError::Singular)?;
    let unclipped: Vec<f64> = x.as_slice().to_vec();
    let clipped_mass: f64 = unclipped.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let mut p: Vec<f64> = unclipped.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if clipped_mass > 0.0 && total > 0.0 {
        p.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ReadoutCorrection { p, unclipped, clipped_mass, condition_number: smax / smin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q1() -> ConfusionMatrix {
        ConfusionMatrix::from_rows("Q1", &[vec![0.9551, 0.0449], vec![0.1581, 0.8419]]).unwrap()
    }

    fn q2() -> ConfusionMatrix {
        ConfusionMatrix::from_rows("Q2", &[vec![0.9475, 0.0525], vec![0.1517, 0.8483]]).unwrap()
    }

    #[test]
    fn joint_entry_is_product() {
        let j = joint_confusion(&[q1(), q2()]).unwrap();
        assert_abs_diff_eq!(j.matrix.entries[(0, 0)], 0.9551 * 0.9475, epsilon = 1e-15);
        assert_abs_diff_eq!(j.matrix.entries[(0, 0)], 0.90495725, epsilon = 1e-12);
        assert!(!j.mixed_alphabet);
        for r in 0..4 {
            assert_abs_diff_eq!(j.matrix.entries.row(r).sum(), 1.0, epsilon = 1e-9);
        }
        let single = joint_confusion(&[q1()]).unwrap();
        assert_eq!(single.matrix, q1());
        let ids = joint_confusion(&[
            ConfusionMatrix::identity("a", 3),
            ConfusionMatrix::identity("b", 3),
        ])
        .unwrap();
        assert_eq!(ids.matrix.entries, DMatrix::identity(9, 9));
    }

    #[test]
    fn mixed_alphabets_are_flagged() {
        let j = joint_confusion(&[q1(), ConfusionMatrix::identity("Q2", 3)]).unwrap();
        assert!(j.mixed_alphabet);
        assert_eq!(j.matrix.dimension(), 6);
    }

    #[test]
    fn prepared_row_inverts_to_basis_vector() {
        let c = correct_readout(&[0.9551, 0.0449], &q1()).unwrap();
        assert_abs_diff_eq!(c.p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.p[1], 0.0, epsilon = 1e-12);
        let id = ConfusionMatrix::identity("x", 2);
        assert_eq!(correct_readout(&[0.3, 0.7], &id).unwrap().p, vec![0.3, 0.7]);
    }

    #[test]
    fn clipping_is_reported() {
        // Far below the |1⟩ fidelity: the inverse produces a negative entry.
        let c = correct_readout(&[0.99, 0.01], &q1()).unwrap();
        assert!(c.clipped_mass > 0.0);
        assert_abs_diff_eq!(c.p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(c.p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn invalid_matrices() {
        assert!(matches!(
            ConfusionMatrix::from_rows("x", &[vec![0.9, 0.2], vec![0.1, 0.9]]),
            Err(XebError::NotStochastic { row: 0, .. })
        ));
        assert!(matches!(
            ConfusionMatrix::from_rows("x", &[vec![1.1, -0.1], vec![0.1, 0.9]]),
            Err(XebError::EntryOutOfRange { .. })
        ));
        let singular = ConfusionMatrix::from_rows("x", &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(correct_readout(&[0.5, 0.5], &singular), Err(XebError::Singular));
        assert!(matches!(correct_readout(&[1.0], &q1()), Err(XebError::OutcomeCount { .. })));
    }

    #[test]
    fn parses_text_layout() {
        let text = "# Q1 readout\n0.9551 0.0449\n0.1581, 0.8419\n";
        assert_eq!(ConfusionMatrix::parse("Q1", text).unwrap(), q1());
        assert!(ConfusionMatrix::parse("Q1", "0.5 x\n0.5 0.5").is_err());
    }
}
