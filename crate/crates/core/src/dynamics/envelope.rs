use thiserror::Error;

use super::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("n_e neither decays monotonically nor has enough maxima ({found} found, 5 needed)")]
    TooFewExtrema { found: usize },
    #[error("log-linear fit failed: {0}")]
    FitFailure(String),
}

/// Decay rate of the n_e envelope.
///
/// Oscillating traces are fitted through their local maxima (refined by a
/// parabola through the three samples around each), monotone ones through
/// every positive sample.
pub fn envelope_decay_rate(traj: &Trajectory) -> Result<f64, EnvelopeError> {
    let t = traj.times();
    let y = traj.n_e();
    let maxima = local_maxima(&t, &y);
    let points: Vec<(f64, f64)> = if maxima.len() >= 5 {
        maxima
    } else if y.windows(2).all(|w| w[1] <= w[0]) {
        t.iter().copied().zip(y.iter().copied()).filter(|(_, v)| *v > 0.0).collect()
    } else {
        return Err(EnvelopeError::TooFewExtrema { found: maxima.len() });
    };
    if points.len() < 2 {
        return Err(EnvelopeError::FitFailure("fewer than two positive samples".into()));
    }
    if points.iter().any(|(_, v)| *v <= 0.0) {
        return Err(EnvelopeError::FitFailure("non-positive maximum".into()));
    }
    let slope = log_slope(&points);
    if !slope.is_finite() || slope >= 0.0 {
        return Err(EnvelopeError::FitFailure(format!("non-decaying slope {slope}")));
    }
    Ok(-slope)
}

fn local_maxima(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] {
            out.push(refine(&t[i - 1..=i + 1], &y[i - 1..=i + 1]));
        }
    }
    out
}

/// Vertex of the parabola through three points.
fn refine(t: &[f64], y: &[f64]) -> (f64, f64) {
    let (t0, t1, t2) = (t[0], t[1], t[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    if a >= 0.0 {
        return (t1, y1);
    }
    let b = d01 - a * (t0 + t1);
    let tv = (-b / (2.0 * a)).clamp(t0, t2);
    let yv = y1 + (tv - t1) * (d01 + a * (tv - t0));
    (tv, yv.max(y1))
}

fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BlochTriple;
    use crate::ode::{Stepper, Tolerances};
    use crate::params::SystemParams;
    use crate::rates::linspace;
    use num_complex::Complex64;

    fn synthetic(f: impl Fn(f64) -> f64, end: f64, n: usize) -> Trajectory {
        Trajectory {
            samples: linspace(0.0, end, n)
                .into_iter()
                .map(|t| (t, BlochTriple { n_e: f(t), n_c: 0.0, pol: Complex64::new(0.0, 0.0) }))
                .collect(),
            integrator: Stepper::DormandPrince,
            tolerances: Tolerances::default(),
            params: SystemParams::default(),
        }
    }

    #[test]
    fn pure_exponential() {
        let r = envelope_decay_rate(&synthetic(|t| (-0.3 * t).exp(), 20.0, 500)).unwrap();
        assert!((r - 0.3).abs() < 1e-6);
    }

    #[test]
    fn modulated_exponential() {
        let r =
            envelope_decay_rate(&synthetic(|t| (-0.3 * t).exp() * (1.0 + (10.0 * t).cos()) / 2.0, 15.0, 3000)).unwrap();
        assert!((r - 0.3).abs() < 0.02 * 0.3, "rate {r}");
    }

    #[test]
    fn distinguishes_failures() {
        // one bump: not monotone, one maximum
        let e = envelope_decay_rate(&synthetic(|t| (-(t - 1.0).powi(2)).exp(), 4.0, 100)).unwrap_err();
        assert_eq!(e, EnvelopeError::TooFewExtrema { found: 1 });
        // constant: monotone but no decay
        let e = envelope_decay_rate(&synthetic(|_| 0.5, 4.0, 100)).unwrap_err();
        assert!(matches!(e, EnvelopeError::FitFailure(_)));
    }
}
