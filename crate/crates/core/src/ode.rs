//! Initial-value integrators for the (linear, autonomous) evolution
//! equations used by [`crate::dynamics`].
//!
//! Three steppers are provided:
//!
//! * Dormand–Prince 5(4) with embedded error control, for any right-hand side;
//! * a 3-stage Radau IIA (order 5, L-stable) stepper for `y' = J y` with
//!   step-doubling error control, used when the span is long compared with
//!   the fastest time scale;
//! * classical RK4 on a fixed step, for bit-reproducible output.
//!
//! All of them land exactly on every requested output time.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {steps} exhausted at t = {t}")]
    TooManySteps { t: f64, steps: usize },
    #[error("output times must be finite and strictly increasing")]
    BadGrid,
    #[error("fixed step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("linear solve failed at t = {t}")]
    Singular { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12 }
    }
}

impl Tolerances {
    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Method {
    /// Dormand–Prince unless the problem is stiff over the requested span.
    #[default]
    Auto,
    DormandPrince,
    Radau,
    FixedRk4 {
        dt: f64,
    },
}

/// The stepper that actually produced a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepper {
    DormandPrince,
    Radau,
    FixedRk4 { dt: f64 },
}

impl std::fmt::Display for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stepper::DormandPrince => write!(f, "dopri5"),
            Stepper::Radau => write!(f, "radau5"),
            Stepper::FixedRk4 { dt } => write!(f, "rk4(dt={dt:e})"),
        }
    }
}

const MAX_STEPS: usize = 20_000_000;

/// Span × spectral-radius bound above which `Auto` picks the implicit stepper.
const STIFF_WORK: f64 = 2e4;

fn check_grid(grid: &[f64]) -> Result<(), OdeError> {
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OdeError::BadGrid);
    }
    Ok(())
}

/// Infinity norm, an upper bound on the spectral radius.
fn inf_norm(j: &DMatrix<f64>) -> f64 {
    j.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Integrates `y' = J y` from `grid[0]` and returns the state at every grid time.
pub fn integrate_linear(
    jac: &DMatrix<f64>,
    y0: &DVector<f64>,
    grid: &[f64],
    method: Method,
    tol: Tolerances,
) -> Result<(Vec<DVector<f64>>, Stepper), OdeError> {
    check_grid(grid)?;
    let span = grid.last().copied().unwrap_or(0.0) - grid.first().copied().unwrap_or(0.0);
    let method = match method {
        Method::Auto if span * inf_norm(jac) > STIFF_WORK => Method::Radau,
        Method::Auto => Method::DormandPrince,
        m => m,
    };
    match method {
        Method::DormandPrince | Method::Auto => {
            let ys = dopri5(|_, y| jac * y, y0, grid, tol)?;
            Ok((ys, Stepper::DormandPrince))
        }
        Method::Radau => Ok((radau_linear(jac, y0, grid, tol)?, Stepper::Radau)),
        Method::FixedRk4 { dt } => Ok((rk4_fixed(|_, y| jac * y, y0, grid, dt)?, Stepper::FixedRk4 { dt })),
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Adaptive Dormand–Prince 5(4) with RMS error norm.
pub fn dopri5<F>(mut f: F, y0: &DVector<f64>, grid: &[f64], tol: Tolerances) -> Result<Vec<DVector<f64>>, OdeError>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    let Some(&t0) = grid.first() else {
        return Ok(out);
    };
    out.push(y0.clone());
    let n = y0.len().max(1) as f64;
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);

    // Initial step from the size of the derivative.
    let d0 = y.iter().map(|v| (v / tol.scale(*v, 0.0)).powi(2)).sum::<f64>().sqrt() / n.sqrt();
    let d1 = y.iter().zip(k1.iter()).map(|(v, dv)| (dv / tol.scale(*v, 0.0)).powi(2)).sum::<f64>().sqrt() / n.sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut steps = 0usize;

    for &target in &grid[1..] {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(OdeError::TooManySteps { t, steps: MAX_STEPS });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            if hs <= 1e-15 * t.abs().max(1.0) && !last {
                return Err(OdeError::StepUnderflow { t, h: hs });
            }

            let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
            k.push(k1.clone());
            for s in 1..7 {
                let mut ys = y.clone();
                for (a, kk) in A[s].iter().zip(k.iter()) {
                    if *a != 0.0 {
                        ys.axpy(hs * a, kk, 1.0);
                    }
                }
                k.push(f(t + C[s] * hs, &ys));
            }
            // Row 6 of A holds the 5th-order weights, so stage 7 was evaluated
            // at the new solution (FSAL).
            let mut y_new = y.clone();
            for (a, kk) in A[6].iter().zip(k.iter()) {
                if *a != 0.0 {
                    y_new.axpy(hs * a, kk, 1.0);
                }
            }
            let mut err = 0.0;
            for i in 0..y.len() {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * hs;
                err += (e / tol.scale(y[i], y_new[i])).powi(2);
            }
            let err = (err / n).sqrt();

            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y = y_new;
                k1 = k.swap_remove(6);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = hs * fac;
                }
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
                h = hs * fac;
                if h <= 1e-15 * t.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Classical RK4 on a fixed step `dt`, shortened only to hit output times.
pub fn rk4_fixed<F>(mut f: F, y0: &DVector<f64>, grid: &[f64], dt: f64) -> Result<Vec<DVector<f64>>, OdeError>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    check_grid(grid)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OdeError::BadStep(dt));
    }
    let mut out = Vec::with_capacity(grid.len());
    let Some(&t0) = grid.first() else {
        return Ok(out);
    };
    out.push(y0.clone());
    let mut t = t0;
    let mut y = y0.clone();
    let mut steps = 0usize;
    for &target in &grid[1..] {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(OdeError::TooManySteps { t, steps: MAX_STEPS });
            }
            let h = dt.min(target - t);
            let k1 = f(t, &y);
            let k2 = f(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
            let k3 = f(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
            let k4 = f(t + h, &(&y + &k3 * h));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t = if h == target - t { target } else { t + h };
        }
        out.push(y.clone());
    }
    Ok(out)
}

// For y' = J y a Radau IIA (s = 3) step is y ← R(hJ) y with R the (2,3)
// Padé approximant of exp: R(z) = −3 (z − p)(z − p̄) / ((z − r)(z − c)(z − c̄)).
// Applying it as a product of shifted solves keeps the slow modes accurate
// even when h‖J‖ is many orders of magnitude above one.
const PADE_REAL_POLE: f64 = 3.637_834_252_744_496;
const PADE_COMPLEX_POLE: Complex64 = Complex64::new(2.681_082_873_627_752, 3.050_430_199_247_410_6);
const PADE_ZERO: Complex64 = Complex64::new(-4.0, 2.0);

struct RadauStep {
    real: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    complex: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl RadauStep {
    fn new(jac: &DMatrix<f64>, h: f64) -> Option<Self> {
        let n = jac.nrows();
        let hj = jac * h;
        let real = (&hj - DMatrix::<f64>::identity(n, n) * PADE_REAL_POLE).lu();
        let hjc = hj.map(|v| Complex64::new(v, 0.0));
        let complex = (hjc - DMatrix::<Complex64>::identity(n, n) * PADE_COMPLEX_POLE).lu();
        if !real.is_invertible() || !complex.is_invertible() {
            return None;
        }
        Some(Self { real, complex })
    }

    fn apply(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        let x = self.real.solve(y)?;
        let mut xc = x.map(|v| Complex64::new(v, 0.0));
        let s = self.complex.solve(&xc)?;
        xc += s * (PADE_COMPLEX_POLE - PADE_ZERO);
        // (hJ − c̄)⁻¹ x = conj((hJ − c)⁻¹ conj(x)) because J is real.
        let s = self.complex.solve(&xc.map(|v| v.conj()))?.map(|v| v.conj());
        xc += s * (PADE_COMPLEX_POLE - PADE_ZERO).conj();
        Some(xc.map(|v| -3.0 * v.re))
    }
}

/// Radau IIA(5) for `y' = J y` with step-doubling error estimates.
pub fn radau_linear(
    jac: &DMatrix<f64>,
    y0: &DVector<f64>,
    grid: &[f64],
    tol: Tolerances,
) -> Result<Vec<DVector<f64>>, OdeError> {
    check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    let Some(&t0) = grid.first() else {
        return Ok(out);
    };
    out.push(y0.clone());
    let n = y0.len().max(1) as f64;
    let mut cache: HashMap<u64, RadauStep> = HashMap::new();
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = {
        let rho = inf_norm(jac);
        if rho > 0.0 {
            0.05 / rho
        } else {
            1.0
        }
    };
    let mut steps = 0usize;

    for &target in &grid[1..] {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(OdeError::TooManySteps { t, steps: MAX_STEPS });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            if hs <= 1e-15 * t.abs().max(1.0) && !last {
                return Err(OdeError::StepUnderflow { t, h: hs });
            }
            if cache.len() > 64 {
                cache.clear();
            }
            ensure_factored(&mut cache, jac, hs, t)?;
            ensure_factored(&mut cache, jac, 0.5 * hs, t)?;
            let full = cache[&hs.to_bits()].apply(&y).ok_or(OdeError::Singular { t })?;
            let halves = {
                let op = &cache[&(0.5 * hs).to_bits()];
                let mid = op.apply(&y).ok_or(OdeError::Singular { t })?;
                op.apply(&mid).ok_or(OdeError::Singular { t })?
            };
            // Local error of the two half steps: (halves − full)/(2⁵ − 1),
            // held ten times below the tolerance to limit phase drift.
            let err = (halves
                .iter()
                .zip(full.iter())
                .zip(y.iter())
                .map(|((a, b), y0)| ((a - b) / 3.1 / tol.scale(*y0, *a)).powi(2))
                .sum::<f64>()
                / n)
                .sqrt();
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y = halves;
                let fac = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 6.0)).clamp(0.2, 4.0) };
                if !last || fac < 1.0 {
                    // Quantize so repeated steps reuse cached factorizations.
                    h = quantize(hs * fac);
                }
            } else {
                h = quantize(hs * (0.9 * err.powf(-1.0 / 6.0)).clamp(0.1, 0.9));
                if h <= 1e-15 * t.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn ensure_factored(cache: &mut HashMap<u64, RadauStep>, jac: &DMatrix<f64>, h: f64, t: f64) -> Result<(), OdeError> {
    if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(h.to_bits()) {
        e.insert(RadauStep::new(jac, h).ok_or(OdeError::Singular { t })?);
    }
    Ok(())
}

/// Rounds down to a power of 2^(1/4) so step sizes repeat.
fn quantize(h: f64) -> f64 {
    let e = (h.log2() * 4.0).floor() / 4.0;
    2f64.powf(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decay_osc() -> DMatrix<f64> {
        // x' = -0.3 x - 10 y, y' = 10 x - 0.3 y
        DMatrix::from_row_slice(2, 2, &[-0.3, -10.0, 10.0, -0.3])
    }

    fn exact(t: f64) -> (f64, f64) {
        let e = (-0.3 * t).exp();
        (e * (10.0 * t).cos(), e * (10.0 * t).sin())
    }

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn all_steppers_track_a_damped_rotation() {
        let j = decay_osc();
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let g = grid(51, 5.0);
        for method in [Method::DormandPrince, Method::Radau, Method::FixedRk4 { dt: 2e-4 }] {
            let (ys, _) = integrate_linear(&j, &y0, &g, method, Tolerances::default()).unwrap();
            for (t, y) in g.iter().zip(&ys) {
                let (x, v) = exact(*t);
                assert!((y[0] - x).abs() < 1e-9, "{method:?} t={t}");
                assert!((y[1] - v).abs() < 1e-9, "{method:?} t={t}");
            }
        }
    }

    #[test]
    fn radau_handles_widely_separated_rates() {
        // Slow mode 1e-6, fast mode 1e4: integrate to 5 slow lifetimes.
        let j = DMatrix::from_row_slice(2, 2, &[-1e-6, 0.0, 1.0, -1e4]);
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let g = vec![0.0, 1e-3, 1.0, 1e5, 5e6];
        let (ys, used) = integrate_linear(&j, &y0, &g, Method::Auto, Tolerances::default()).unwrap();
        assert_eq!(used, Stepper::Radau);
        for (t, y) in g.iter().zip(&ys) {
            let slow = (-1e-6 * t).exp();
            assert_relative_eq!(y[0], slow, max_relative = 1e-8);
            // y2 = (e^{-1e-6 t} - e^{-1e4 t}) / (1e4 - 1e-6)
            let fast = (slow - (-1e4 * t).exp()) / (1e4 - 1e-6);
            assert!((y[1] - fast).abs() < 1e-12 + 1e-8 * fast.abs(), "t={t}: {} vs {fast}", y[1]);
        }
    }

    #[test]
    fn output_starts_with_initial_state_and_hits_grid() {
        let y0 = DVector::from_vec(vec![0.5]);
        let ys = dopri5(|_, y| -y, &y0, &[1.0, 1.5, 4.0], Tolerances::default()).unwrap();
        assert_eq!(ys[0], y0);
        assert_relative_eq!(ys[2][0], 0.5 * (-3.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = cos t, y(0) = 0
        let ys =
            dopri5(|t, _| DVector::from_vec(vec![t.cos()]), &DVector::zeros(1), &[0.0, 2.0], Tolerances::default())
                .unwrap();
        assert_relative_eq!(ys[1][0], 2f64.sin(), max_relative = 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let y0 = DVector::from_vec(vec![1.0]);
        assert_eq!(dopri5(|_, y| -y, &y0, &[0.0, 1.0, 1.0], Tolerances::default()).unwrap_err(), OdeError::BadGrid);
        assert_eq!(rk4_fixed(|_, y| -y, &y0, &[0.0, 1.0], 0.0).unwrap_err(), OdeError::BadStep(0.0));
    }

    #[test]
    fn blow_up_reports_underflow_time() {
        // y' = y² reaches infinity at t = 1.
        let err = dopri5(|_, y| y.map(|v| v * v), &DVector::from_vec(vec![1.0]), &[0.0, 2.0], Tolerances::default())
            .unwrap_err();
        match err {
            OdeError::StepUnderflow { t, .. } => assert!((t - 1.0).abs() < 1e-3, "t = {t}"),
            OdeError::TooManySteps { t, .. } => assert!((t - 1.0).abs() < 1e-3),
            e => panic!("unexpected {e:?}"),
        }
    }
}
