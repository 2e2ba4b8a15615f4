//! Population dynamics of an initially excited emitter.
//!
//! [`evolve_triple`] integrates the closed equations of motion for
//! (n_e, n_c, p), with p = ⟨σ₊a⟩. [`CoarseSolution`] gives the two-exponential
//! solution after adiabatic elimination of p. [`evolve_lindblad`] integrates
//! the full master equation in the single-excitation subspace as an
//! independent check.

mod envelope;
mod lindblad;

pub use envelope::{envelope_decay_rate, EnvelopeError};
pub use lindblad::{evolve_lindblad, lindblad_generator, LindbladGenerator, OneExcitationDensityMatrix};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::ode::{integrate_linear, Method, OdeError, Stepper, Tolerances};
use crate::params::{derive_couplings, DerivedCouplings, ParamError, SystemParams};
use crate::rates::{rate_coefficients, CoarseRateSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("density matrix lost positivity at t = {t}: eigenvalue {eigenvalue:e}")]
    Positivity { t: f64, eigenvalue: f64 },
}

/// Populations and emitter-cavity polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochTriple {
    /// ⟨σ₊σ₋⟩
    pub n_e: f64,
    /// ⟨a†a⟩
    pub n_c: f64,
    /// ⟨σ₊a⟩
    pub pol: Complex64,
}

impl BlochTriple {
    pub const EXCITED: Self = Self { n_e: 1.0, n_c: 0.0, pol: Complex64::new(0.0, 0.0) };

    pub fn check(&self) -> Result<(), DynamicsError> {
        let tol = 1e-9;
        if !(self.n_e.is_finite() && self.n_c.is_finite() && self.pol.re.is_finite() && self.pol.im.is_finite()) {
            return Err(DynamicsError::InvalidState("non-finite component".into()));
        }
        if self.n_e < -tol || self.n_c < -tol {
            return Err(DynamicsError::InvalidState(format!(
                "negative population (n_e = {}, n_c = {})",
                self.n_e, self.n_c
            )));
        }
        if self.n_e > 1.0 + tol {
            return Err(DynamicsError::InvalidState(format!("n_e = {} exceeds 1", self.n_e)));
        }
        if self.pol.norm_sqr() > self.n_e * self.n_c + tol {
            return Err(DynamicsError::InvalidState(format!(
                "|p|² = {} exceeds n_e·n_c = {}",
                self.pol.norm_sqr(),
                self.n_e * self.n_c
            )));
        }
        Ok(())
    }

    fn to_vector(self) -> DVector<f64> {
        DVector::from_vec(vec![self.n_e, self.n_c, self.pol.re, self.pol.im])
    }

    fn from_slice(v: &[f64]) -> Self {
        Self { n_e: v[0], n_c: v[1], pol: Complex64::new(v[2], v[3]) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, BlochTriple)>,
    pub integrator: Stepper,
    pub tolerances: Tolerances,
    pub params: SystemParams,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn n_e(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1.n_e).collect()
    }

    pub fn n_c(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1.n_c).collect()
    }
}

/// Integrator choice and tolerances shared by both evolution routines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveOptions {
    pub method: Method,
    pub tolerances: Tolerances,
}

/// Rate of photon emission γn_e + κn_c + 2Re(γ_F p).
pub fn emission_rate(p: &SystemParams, s: &BlochTriple) -> Result<f64, ParamError> {
    let dc = derive_couplings(p)?;
    Ok(p.gamma * s.n_e + p.kappa * s.n_c + 2.0 * (dc.gamma_f * s.pol).re)
}

/// Generator of the equations of motion on (n_e, n_c, Re p, Im p).
pub fn triple_generator(p: &SystemParams) -> Result<DMatrix<f64>, ParamError> {
    let dc = derive_couplings(p)?;
    let (a, b) = (dc.g_plus.re, dc.g_plus.im);
    let (am, bm) = (dc.g_minus.re, dc.g_minus.im);
    let (gt, d) = (dc.gamma_tot, dc.detuning);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        -p.gamma, 0.0,      2.0 * bm,  2.0 * am,
        0.0,      -p.kappa, -2.0 * b,  -2.0 * a,
        -b,       bm,       -gt,       d,
        -a,       am,       -d,        -gt,
    ]);
    Ok(m)
}

pub fn evolve_triple(
    p: &SystemParams,
    init: BlochTriple,
    grid: &[f64],
    opts: EvolveOptions,
) -> Result<Trajectory, DynamicsError> {
    init.check()?;
    let jac = triple_generator(p)?;
    let (ys, integrator) = integrate_linear(&jac, &init.to_vector(), grid, opts.method, opts.tolerances)?;
    let mut samples: Vec<(f64, BlochTriple)> =
        grid.iter().zip(&ys).map(|(t, y)| (*t, BlochTriple::from_slice(y.as_slice()))).collect();
    if let Some(first) = samples.first_mut() {
        first.1 = init;
    }
    Ok(Trajectory { samples, integrator, tolerances: opts.tolerances, params: *p })
}

/// p after adiabatic elimination: (−i g₊* n_e + i g₋* n_c)/(iω_{c,21} + Γ_tot).
pub fn adiabatic_polarization(p: &SystemParams, n_e: f64, n_c: f64) -> Result<Complex64, ParamError> {
    let dc = derive_couplings(p)?;
    Ok(adiabatic_pol(&dc, n_e, n_c))
}

fn adiabatic_pol(dc: &DerivedCouplings, n_e: f64, n_c: f64) -> Complex64 {
    let i = Complex64::i();
    (-i * dc.g_plus.conj() * n_e + i * dc.g_minus.conj() * n_c) / Complex64::new(dc.gamma_tot, dc.detuning)
}

/// Closed-form coarse-grained populations for n_e(0) = 1, n_c(0) = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseSolution {
    pub system: CoarseRateSystem,
    couplings: DerivedCouplings,
}

impl CoarseSolution {
    pub fn new(p: &SystemParams) -> Result<Self, ParamError> {
        let couplings = derive_couplings(p)?;
        Ok(Self { system: rate_coefficients(&couplings, p), couplings })
    }

    /// (n_e, n_c) at time t ≥ 0.
    pub fn populations(&self, t: f64) -> (f64, f64) {
        let s = &self.system;
        let c = s.rpm + s.kappa;
        let (lp, lm) = (s.lambda_plus, s.lambda_minus);
        if s.is_degenerate() {
            let l = 0.5 * (lp + lm);
            let e = (l * t).exp();
            return (e * (1.0 + (l + c) * t), s.rpp * t * e);
        }
        let (ep, em) = ((lp * t).exp(), (lm * t).exp());
        let n_e = ((lp + c) * ep - (lm + c) * em) / (lp - lm);
        // e^{Λ₊t} − e^{Λ₋t} = e^{Λ₊t}(1 − e^{(Λ₋−Λ₊)t}) avoids cancellation at small t.
        let n_c = s.rpp * ep * -((lm - lp) * t).exp_m1() / (lp - lm);
        (n_e, n_c)
    }

    pub fn polarization(&self, t: f64) -> Complex64 {
        let (n_e, n_c) = self.populations(t);
        adiabatic_pol(&self.couplings, n_e, n_c)
    }

    pub fn triple(&self, t: f64) -> BlochTriple {
        let (n_e, n_c) = self.populations(t);
        BlochTriple { n_e, n_c, pol: adiabatic_pol(&self.couplings, n_e, n_c) }
    }
}

pub fn coarse_grained_solution(p: &SystemParams, t: f64) -> Result<(f64, f64), ParamError> {
    Ok(CoarseSolution::new(p)?.populations(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::transition_rate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform(n: usize, end: f64) -> Vec<f64> {
        crate::rates::linspace(0.0, end, n)
    }

    fn bare(gamma: f64) -> SystemParams {
        SystemParams { g_abs: 0.0, eta: 0.0, gamma, ..SystemParams::default() }
    }

    #[test]
    fn decoupled_emitter_decays_exponentially() {
        let p = bare(0.05);
        let grid = uniform(101, 100.0);
        let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, EvolveOptions::default()).unwrap();
        for (t, s) in &tr.samples {
            assert!((s.n_e - (-0.05 * t).exp()).abs() < 1e-9);
            assert_eq!(s.n_c, 0.0);
            assert_eq!(s.pol, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn resonant_strong_coupling_oscillates() {
        let p = SystemParams::default();
        let grid = uniform(2001, 0.2);
        let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, EvolveOptions::default()).unwrap();
        let ne = tr.n_e();
        let rises = ne.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(rises > 100, "n_e should revive repeatedly, rises = {rises}");
        assert!(ne[ne.len() - 1] < 0.05);
    }

    #[test]
    fn trajectory_metadata_and_first_sample() {
        let p = SystemParams::default();
        let tr = evolve_triple(&p, BlochTriple::EXCITED, &[0.5, 0.6], EvolveOptions::default()).unwrap();
        assert_eq!(tr.samples[0], (0.5, BlochTriple::EXCITED));
        assert_eq!(tr.params, p);
        assert_eq!(tr.integrator, Stepper::DormandPrince);
    }

    #[test]
    fn rejects_invalid_initial_state() {
        let p = SystemParams::default();
        let bad = BlochTriple { n_e: 0.5, n_c: 0.5, pol: Complex64::new(0.6, 0.0) };
        assert!(matches!(
            evolve_triple(&p, bad, &[0.0, 1.0], EvolveOptions::default()),
            Err(DynamicsError::InvalidState(_))
        ));
    }

    #[test]
    fn coarse_initial_and_late_values() {
        for eps in [0.0, 5.0, -126.4] {
            let c = CoarseSolution::new(&SystemParams::default().with_eps(eps)).unwrap();
            assert_eq!(c.populations(0.0), (1.0, 0.0));
            let slow = c.system.lambda_plus.abs().min(c.system.lambda_minus.abs());
            let (ne, nc) = c.populations(1e3 / slow);
            assert!(ne.abs() < 1e-8 && nc.abs() < 1e-8, "eps={eps}: {ne} {nc}");
        }
    }

    #[test]
    fn coarse_matches_matrix_exponential() {
        // Oracle: exp(tA)·(n_c, n_e) = (0, 1) from nalgebra.
        for eps in [0.0, 3.0, -40.0] {
            let p = SystemParams::default().with_eps(eps);
            let c = CoarseSolution::new(&p).unwrap();
            let m = c.system.coefficient_matrix();
            for t in [0.01, 0.1, 1.0] {
                let a = nalgebra::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]) * t;
                let y = a.exp() * nalgebra::Vector2::new(0.0, 1.0);
                let (ne, nc) = c.populations(t);
                assert!((ne - y[1]).abs() < 1e-10, "eps={eps} t={t}");
                assert!((nc - y[0]).abs() < 1e-10, "eps={eps} t={t}");
            }
        }
    }

    #[test]
    fn confluent_limit_is_continuous() {
        // Tune γ so that Λ₊ = Λ₋ for a decoupled system (κ = γ, g = 0).
        let p = SystemParams { g_abs: 0.0, eta: 0.0, gamma: 2.0, kappa: 2.0, ..SystemParams::default() };
        let c = CoarseSolution::new(&p).unwrap();
        assert!(c.system.is_degenerate());
        let (ne, nc) = c.populations(0.7);
        assert_relative_eq!(ne, (-1.4f64).exp(), max_relative = 1e-12);
        assert_eq!(nc, 0.0);
        // Slightly split κ: the general branch must agree closely.
        let q = SystemParams { g_abs: 0.3, kappa: 2.0 + 1e-6, ..p };
        let r = SystemParams { kappa: 2.0, ..q };
        let (a, b) = (CoarseSolution::new(&q).unwrap(), CoarseSolution::new(&r).unwrap());
        for t in [0.1, 1.0, 3.0] {
            let (x, y) = (a.populations(t), b.populations(t));
            assert!((x.0 - y.0).abs() < 1e-5 && (x.1 - y.1).abs() < 1e-5);
        }
    }

    #[test]
    fn coarse_threads_the_rabi_oscillations() {
        let p = SystemParams::default();
        let w = transition_rate(&p).unwrap().rate;
        let grid = uniform(4001, 4.0 / w);
        let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, EvolveOptions::default()).unwrap();
        let c = CoarseSolution::new(&p).unwrap();
        // Midline: moving average over one Rabi period with the envelope
        // decay e^{-Wt} divided out first.
        let period = std::f64::consts::PI / p.g_abs;
        let dt = grid[1] - grid[0];
        let half = (0.5 * period / dt).round() as usize;
        let ne = tr.n_e();
        let (mut num, mut den) = (0.0, 0.0);
        for i in half..grid.len() - half {
            let window = (i - half..=i + half).map(|j| ne[j] * (w * (grid[j] - grid[i])).exp());
            let mid = window.sum::<f64>() / (2 * half + 1) as f64;
            let coarse = c.populations(grid[i]).0;
            num += (mid - coarse).powi(2);
            den += coarse.powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative L2 distance {rel}");
    }

    #[test]
    fn adiabatic_polarization_limits() {
        let p = SystemParams::default();
        assert_eq!(adiabatic_polarization(&p, 0.0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(adiabatic_polarization(&bare(0.05), 0.7, 0.2).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn adiabatic_polarization_matches_time_average() {
        // Average of the oscillating p over the decay against the average
        // of the adiabatic value along the coarse solution.
        let p = SystemParams::default();
        let w = transition_rate(&p).unwrap().rate;
        let grid = uniform(20001, 5.0 / w);
        let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, EvolveOptions::default()).unwrap();
        let c = CoarseSolution::new(&p).unwrap();
        let full: Vec<Complex64> = tr.samples.iter().map(|s| s.1.pol).collect();
        let adiabatic: Vec<Complex64> = grid.iter().map(|t| c.polarization(*t)).collect();
        let trap = |v: &[Complex64]| v.windows(2).map(|x| (x[0] + x[1]) * 0.5).sum::<Complex64>();
        let (full, adiabatic) = (trap(&full), trap(&adiabatic));
        assert!((full - adiabatic).norm() < 0.1 * adiabatic.norm(), "{full} vs {adiabatic}");
    }

    #[test]
    fn photon_bookkeeping() {
        // d/dt(n_e + n_c) from a five-point stencil against −(emission rate).
        let p = SystemParams { gamma_ph: 7.0, ..SystemParams::default().with_eps(2.0) };
        let h = 1e-5;
        let centres: Vec<f64> = (1..40).map(|k| k as f64 * 0.005).collect();
        let grid: Vec<f64> = std::iter::once(0.0)
            .chain(centres.iter().flat_map(|t| [-2.0, -1.0, 0.0, 1.0, 2.0].map(|k| t + k * h)))
            .collect();
        let opts = EvolveOptions { tolerances: Tolerances { rtol: 1e-13, atol: 1e-15 }, ..Default::default() };
        let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, opts).unwrap();
        let total: Vec<f64> = tr.samples.iter().map(|(_, s)| s.n_e + s.n_c).collect();
        for (k, t) in centres.iter().enumerate() {
            let y = &total[1 + 5 * k..6 + 5 * k];
            let d = (y[0] - 8.0 * y[1] + 8.0 * y[3] - y[4]) / (12.0 * h);
            let flux = emission_rate(&p, &tr.samples[3 + 5 * k].1).unwrap();
            assert!((d + flux).abs() < 1e-6, "t={t}: {d} vs {flux}");
        }
    }

    #[test]
    fn detuning_sign_changes_decay_time_by_orders_of_magnitude() {
        let time_to_1_over_e = |eps: f64| {
            let p = SystemParams::default().with_eps(eps);
            let w = transition_rate(&p).unwrap().rate;
            let grid = uniform(3001, 3.0 / w);
            let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, EvolveOptions::default()).unwrap();
            tr.samples.iter().find(|(_, s)| s.n_e < (-1.0f64).exp()).map(|s| s.0).unwrap()
        };
        let (plus, minus) = (time_to_1_over_e(100.0), time_to_1_over_e(-100.0));
        let ratio = plus.max(minus) / plus.min(minus);
        assert!(ratio > 10.0, "ratio {ratio}");
        // Direction follows the rate ordering.
        let wp = transition_rate(&SystemParams::default().with_eps(100.0)).unwrap().rate;
        let wm = transition_rate(&SystemParams::default().with_eps(-100.0)).unwrap().rate;
        assert_eq!(plus > minus, wp < wm);
    }

    fn arb_params() -> impl Strategy<Value = SystemParams> {
        (0.0..150.0f64, -300.0..300.0f64, 0.01..2.0f64, 5.0..80.0f64, 0.0..20.0f64, 0.0..=1.0f64, 0.0..6.3f64).prop_map(
            |(g, d, gamma, kappa, gph, eta, phi)| SystemParams {
                g_abs: g,
                omega_c: d,
                gamma,
                kappa,
                gamma_ph: gph,
                eta,
                phi,
                ..SystemParams::default()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn triple_stays_physical(p in arb_params()) {
            let grid = uniform(200, 2.0);
            let tr = evolve_triple(&p, BlochTriple::EXCITED, &grid, EvolveOptions::default()).unwrap();
            for (_, s) in &tr.samples {
                prop_assert!(s.check().is_ok(), "{:?}", s);
            }
            // total population never grows
            let tot: Vec<f64> = tr.samples.iter().map(|(_, s)| s.n_e + s.n_c).collect();
            prop_assert!(tot.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        }

        #[test]
        fn coarse_solution_is_bounded_and_decaying(p in arb_params(), t in 0.0..50.0f64) {
            let c = CoarseSolution::new(&p).unwrap();
            let (ne, nc) = c.populations(t);
            prop_assert!(ne >= -1e-12 && nc >= -1e-12);
            prop_assert!(ne + nc <= 1.0 + 1e-9);
        }
    }
}
