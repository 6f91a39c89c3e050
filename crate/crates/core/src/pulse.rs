//! Microwave drive: λ-basis envelope, mean-amplitude normalization and the
//! carrier-modulated field.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::Mode;

/// Initial λ ratio used by the optimization protocol.
pub const STANDARD_LAMBDA: [f64; 4] = [-0.0760, 1.0000, 0.4222, -0.1636];

/// Single-harmonic flattop initialization, `λ = (0, 1, 0, 0)`.
pub const FLATTOP_LAMBDA: [f64; 4] = [0.0, 1.0, 0.0, 0.0];

/// Mean-amplitude presets (GHz).
pub const AMP_PRESETS: [f64; 3] = [0.4, 0.045, 0.05];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("time {t} ns is outside the pulse window [0, {duration}] ns")]
    OutOfWindow { t: f64, duration: f64 },
    #[error("λ coefficients sum to zero; the envelope normalization is undefined")]
    ZeroLambdaSum,
    #[error("invalid pulse parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

/// Envelope family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Envelope {
    /// `Σ λₙ (1 − cos(2πnt/T)) / Σ λₙ`, n = 1..4.
    Lambda { lambda: [f64; 4] },
    /// Constant unit envelope. Not zero at the window edges; used for
    /// calibration runs such as Rabi oscillations.
    Flat,
}

/// Which mode(s) the drive's `a + a†` term acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriveTarget {
    #[default]
    Q1,
    Q2,
    Both,
}

impl DriveTarget {
    pub fn modes(self) -> &'static [Mode] {
        match self {
            DriveTarget::Q1 => &[Mode::Q1],
            DriveTarget::Q2 => &[Mode::Q2],
            DriveTarget::Both => &[Mode::Q1, Mode::Q2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    pub envelope: Envelope,
    /// Ā, the time-averaged envelope amplitude (GHz).
    pub mean_amp: f64,
    /// ω_d (GHz).
    pub carrier_freq: f64,
    /// φ₀ (rad).
    pub carrier_phase: f64,
    /// T (ns).
    pub duration: f64,
    pub target: DriveTarget,
}

impl DrivePulse {
    pub fn new(lambda: [f64; 4], mean_amp: f64, carrier_freq: f64, duration: f64) -> Self {
        Self {
            envelope: Envelope::Lambda { lambda },
            mean_amp,
            carrier_freq,
            carrier_phase: 0.0,
            duration,
            target: DriveTarget::Q1,
        }
    }

    pub fn flat(amp: f64, carrier_freq: f64, duration: f64) -> Self {
        Self {
            envelope: Envelope::Flat,
            mean_amp: amp,
            carrier_freq,
            carrier_phase: 0.0,
            duration,
            target: DriveTarget::Q1,
        }
    }

    pub fn lambda(&self) -> Option<[f64; 4]> {
        match self.envelope {
            Envelope::Lambda { lambda } => Some(lambda),
            Envelope::Flat => None,
        }
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(PulseError::InvalidParam {
                name: "duration",
                reason: format!("must be positive, got {}", self.duration),
            });
        }
        for (name, v) in [
            ("mean_amp", self.mean_amp),
            ("carrier_freq", self.carrier_freq),
            ("carrier_phase", self.carrier_phase),
        ] {
            if !v.is_finite() {
                return Err(PulseError::InvalidParam { name, reason: format!("got {v}") });
            }
        }
        if let Envelope::Lambda { lambda } = self.envelope {
            if lambda.iter().any(|l| !l.is_finite()) {
                return Err(PulseError::InvalidParam {
                    name: "lambda",
                    reason: "coefficients must be finite".into(),
                });
            }
            if lambda.iter().sum::<f64>() == 0.0 {
                return Err(PulseError::ZeroLambdaSum);
            }
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<(), PulseError> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(PulseError::OutOfWindow { t, duration: self.duration });
        }
        Ok(())
    }

    /// Envelope `E(t)` in GHz.
    pub fn envelope_value(&self, t: f64) -> Result<f64, PulseError> {
        self.check_time(t)?;
        match self.envelope {
            Envelope::Flat => Ok(self.mean_amp),
            Envelope::Lambda { lambda } => {
                let sum: f64 = lambda.iter().sum();
                if sum == 0.0 {
                    return Err(PulseError::ZeroLambdaSum);
                }
                let x = t / self.duration;
                let shaped: f64 = lambda
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l * basis(i + 1, x))
                    .sum();
                Ok(self.mean_amp * shaped / sum)
            }
        }
    }

    /// `dE/dt` in GHz/ns.
    pub fn envelope_slope(&self, t: f64) -> Result<f64, PulseError> {
        self.check_time(t)?;
        match self.envelope {
            Envelope::Flat => Ok(0.0),
            Envelope::Lambda { lambda } => {
                let sum: f64 = lambda.iter().sum();
                if sum == 0.0 {
                    return Err(PulseError::ZeroLambdaSum);
                }
                let x = t / self.duration;
                let slope: f64 = lambda
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let n = (i + 1) as f64;
                        l * TAU * n / self.duration * (TAU * (n * x).fract()).sin()
                    })
                    .sum();
                Ok(self.mean_amp * slope / sum)
            }
        }
    }

    /// Instantaneous drive coefficient `E(t) cos(2π ω_d t + φ₀)` in GHz.
    pub fn drive_field(&self, t: f64) -> Result<f64, PulseError> {
        Ok(self.envelope_value(t)? * self.carrier(t))
    }

    /// Unchecked fast path for the propagator; `t` must lie in the window.
    pub(crate) fn drive_field_unchecked(&self, t: f64, inv_sum: f64) -> f64 {
        let env = match self.envelope {
            Envelope::Flat => self.mean_amp,
            Envelope::Lambda { lambda } => {
                let x = t / self.duration;
                let shaped: f64 = lambda
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l * basis(i + 1, x))
                    .sum();
                self.mean_amp * shaped * inv_sum
            }
        };
        env * self.carrier(t)
    }

    pub(crate) fn inverse_lambda_sum(&self) -> f64 {
        match self.envelope {
            Envelope::Flat => 1.0,
            Envelope::Lambda { lambda } => 1.0 / lambda.iter().sum::<f64>(),
        }
    }

    fn carrier(&self, t: f64) -> f64 {
        (TAU * self.carrier_freq * t + self.carrier_phase).cos()
    }

    /// Samples the drive field on `samples` evenly spaced points over `[0, T]`.
    pub fn waveform(&self, samples: usize) -> Result<Vec<(f64, f64)>, PulseError> {
        self.validate()?;
        let samples = samples.max(2);
        (0..samples)
            .map(|i| {
                let t = if i + 1 == samples {
                    self.duration
                } else {
                    self.duration * i as f64 / (samples - 1) as f64
                };
                Ok((t, self.drive_field(t)?))
            })
            .collect()
    }

    /// Writes the waveform as `t_ns,amplitude_GHz` CSV.
    pub fn write_waveform_csv<W: Write>(&self, out: W, samples: usize) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_ns", "amplitude_GHz"])?;
        for (t, a) in self.waveform(samples)? {
            w.write_record([format!("{t:.6}"), format!("{a:.12e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `bₙ(x) = 1 − cos(2π n x)` for `x = t/T`, evaluated on the fractional
/// phase so that both endpoints give exactly zero.
fn basis(n: usize, x: f64) -> f64 {
    1.0 - (TAU * (n as f64 * x).fract()).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn standard_pulse(t_total: f64) -> DrivePulse {
        DrivePulse::new(STANDARD_LAMBDA, 0.045, 0.1, t_total)
    }

    /// Composite Gauss–Legendre (5-point) quadrature.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let nodes = [
            (0.0, 128.0 / 225.0),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let mid = a + h * (p as f64 + 0.5);
                nodes.iter().map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn endpoints_vanish_exactly() {
        let p = standard_pulse(60.0);
        assert_eq!(p.envelope_value(0.0).unwrap(), 0.0);
        assert_eq!(p.envelope_value(60.0).unwrap(), 0.0);
        assert_eq!(p.envelope_slope(0.0).unwrap(), 0.0);
        assert_eq!(p.envelope_slope(60.0).unwrap(), 0.0);
        assert_eq!(p.drive_field(0.0).unwrap(), 0.0);
    }

    #[test]
    fn single_basis_quarter_point() {
        let p = DrivePulse::new([0.0, 1.0, 0.0, 0.0], 0.05, 0.0, 40.0);
        assert_abs_diff_eq!(p.envelope_value(10.0).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn standard_ratio_midpoint() {
        // bₙ(T/2) = 2 for odd n and 0 for even n.
        let [l1, l2, l3, l4] = STANDARD_LAMBDA;
        let expected = 2.0 * (l1 + l3) / (l1 + l2 + l3 + l4);
        assert_abs_diff_eq!(expected, 0.5855, epsilon = 5e-5);
        let p = DrivePulse::new(STANDARD_LAMBDA, 1.0, 0.0, 60.0);
        assert_abs_diff_eq!(p.envelope_value(30.0).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn out_of_window_and_zero_sum() {
        let p = standard_pulse(60.0);
        assert!(matches!(p.envelope_value(-1e-9), Err(PulseError::OutOfWindow { .. })));
        assert!(matches!(p.drive_field(60.1), Err(PulseError::OutOfWindow { .. })));
        let z = DrivePulse::new([1.0, -1.0, 0.5, -0.5], 0.05, 0.1, 60.0);
        assert_eq!(z.envelope_value(1.0), Err(PulseError::ZeroLambdaSum));
        assert_eq!(z.validate(), Err(PulseError::ZeroLambdaSum));
    }

    #[test]
    fn dc_carrier_equals_envelope() {
        let p = DrivePulse::new(STANDARD_LAMBDA, 0.4, 0.0, 60.0);
        for i in 0..=60 {
            let t = i as f64;
            assert_eq!(p.drive_field(t).unwrap(), p.envelope_value(t).unwrap());
        }
    }

    #[test]
    fn flat_carrier_period_averages_out() {
        let wd = 0.2;
        let period = 1.0 / wd;
        let p = DrivePulse::flat(0.05, wd, period);
        let n = 1001;
        let mean: f64 = (0..n)
            .map(|i| p.drive_field(period * i as f64 / (n - 1) as f64).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 1e-3 * 0.05, "mean {mean}");
    }

    #[test]
    fn waveform_csv_has_header() {
        let mut buf = Vec::new();
        standard_pulse(60.0).write_waveform_csv(&mut buf, 11).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_ns,amplitude_GHz"));
        assert_eq!(lines.count(), 11);
    }

    proptest! {
        #[test]
        fn mean_equals_mean_amp(l in prop::array::uniform4(-2.0f64..2.0), amp in 0.01f64..1.0) {
            prop_assume!(l.iter().sum::<f64>().abs() > 0.1);
            let p = DrivePulse::new(l, amp, 0.0, 60.0);
            let avg = integrate(|t| p.envelope_value(t).unwrap(), 0.0, 60.0, 64) / 60.0;
            prop_assert!((avg - amp).abs() < 1e-9, "avg {} amp {}", avg, amp);
        }

        #[test]
        fn shape_is_scale_invariant(l in prop::array::uniform4(-2.0f64..2.0), c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], t in 0.0f64..60.0) {
            prop_assume!(l.iter().sum::<f64>().abs() > 0.1);
            let a = DrivePulse::new(l, 0.05, 0.1, 60.0);
            let b = DrivePulse::new(l.map(|x| x * c), 0.05, 0.1, 60.0);
            let (ea, eb) = (a.envelope_value(t).unwrap(), b.envelope_value(t).unwrap());
            prop_assert!((ea - eb).abs() <= 1e-12 * (1.0 + ea.abs()));
        }
    }
}
