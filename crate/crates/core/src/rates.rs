//! Coarse-grained rate equations and the generalized Fano transition rate.
//!
//! Eliminating the emitter-cavity polarization adiabatically leaves a 2×2
//! linear system for (n_c, n_e):
//!
//! ```text
//! d/dt n_c = −(R₊₋ + κ) n_c + R₊₊ n_e
//! d/dt n_e = −(R₋₊ + γ) n_e + R₋₋ n_c
//! ```
//!
//! with `R_ab = Re[2 g_a g_b* / (iω_{c,21} + Γ_tot)]`. Its larger eigenvalue
//! sets the decay rate of an initially excited emitter when κ ≥ γ.

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{derive_couplings, DerivedCouplings, ParamError, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("a sweep needs at least two points, got {0}")]
    SweepTooShort(usize),
}

/// R coefficients and eigenvalues of the coarse-grained rate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseRateSystem {
    pub rpp: f64,
    pub rpm: f64,
    pub rmp: f64,
    pub rmm: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Determinant of the coefficient matrix, Λ₊·Λ₋.
    pub determinant: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl CoarseRateSystem {
    /// Coefficient matrix acting on (n_c, n_e).
    pub fn coefficient_matrix(&self) -> [[f64; 2]; 2] {
        [[-(self.rpm + self.kappa), self.rpp], [self.rmm, -(self.rmp + self.gamma)]]
    }

    /// True when Λ₊ and Λ₋ are too close for the two-exponential forms.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.lambda_plus.abs().max(self.lambda_minus.abs()).max(self.gamma + self.kappa);
        (self.lambda_plus - self.lambda_minus).abs() < 1e-9 * scale
    }
}

pub fn rate_coefficients(dc: &DerivedCouplings, p: &SystemParams) -> CoarseRateSystem {
    let denom = Complex64::new(dc.gamma_tot, dc.detuning);
    let r = |a: Complex64, b: Complex64| (2.0 * a * b.conj() / denom).re;
    let rpp = r(dc.g_plus, dc.g_plus);
    let rpm = r(dc.g_plus, dc.g_minus);
    let rmp = r(dc.g_minus, dc.g_plus);
    let rmm = r(dc.g_minus, dc.g_minus);
    let (gamma, kappa) = (p.gamma, p.kappa);

    // R₊₋R₋₊ − R₊₊R₋₋ = −|2/d|² Im(g₊g₋*)² and Im(g₊g₋*) = Re(g γ_F*).
    // Writing the determinant this way keeps the exact zero at the
    // antiresonance (g = 0, η = 1, γ_ph = 0) free of rounding noise.
    let cross = (p.g() * dc.gamma_f.conj()).re;
    let determinant = kappa * gamma + kappa * rmp + gamma * rpm - 4.0 * cross * cross / denom.norm_sqr();

    let half_trace = -0.5 * (gamma + kappa + rpm + rmp);
    let h = 0.5 * (kappa - gamma + rpm - rmp);
    let disc = (h * h + rpp * rmm).max(0.0).sqrt();
    // Stable quadratic roots: the root without cancellation comes from the
    // closed form, the other from Vieta's product.
    let (lambda_plus, lambda_minus) = if half_trace <= 0.0 {
        let lm = half_trace - disc;
        let lp = if lm != 0.0 { determinant / lm } else { half_trace + disc };
        (lp, lm)
    } else {
        let lp = half_trace + disc;
        (lp, determinant / lp)
    };

    CoarseRateSystem { rpp, rpm, rmp, rmm, lambda_plus, lambda_minus, determinant, gamma, kappa }
}

/// Which eigenvalue describes the emitter decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBranch {
    /// κ ≥ γ: W = −Λ₊.
    CavityDominated,
    /// κ < γ: W = −Λ₋. Outside the regime the model is stated for.
    EmitterDominated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRate {
    pub rate: f64,
    pub branch: RateBranch,
}

impl TransitionRate {
    pub fn regime_violation(&self) -> bool {
        self.branch == RateBranch::EmitterDominated
    }
}

pub fn transition_rate(p: &SystemParams) -> Result<TransitionRate, RateError> {
    let dc = derive_couplings(p)?;
    let sys = rate_coefficients(&dc, p);
    Ok(if p.kappa >= p.gamma {
        TransitionRate { rate: -sys.lambda_plus, branch: RateBranch::CavityDominated }
    } else {
        TransitionRate { rate: -sys.lambda_minus, branch: RateBranch::EmitterDominated }
    })
}

/// Weak-coupling rate γ + R₋₊ (drops R₊₊R₋₋ under the square root).
pub fn transition_rate_weak(p: &SystemParams) -> Result<f64, RateError> {
    let dc = derive_couplings(p)?;
    Ok(p.gamma + rate_coefficients(&dc, p).rmp)
}

/// Purcell-enhanced rate γ + 2|g|²Γ_tot/(ω_{c,21}² + Γ_tot²).
pub fn purcell_rate(p: &SystemParams) -> Result<f64, RateError> {
    let dc = derive_couplings(p)?;
    let gt = dc.gamma_tot;
    Ok(p.gamma + 2.0 * p.g_abs * p.g_abs * gt / (dc.detuning * dc.detuning + gt * gt))
}

/// γ|q + ε|²/(ε² + 1).
pub fn fano_formula(q: Complex64, eps: f64, gamma: f64) -> f64 {
    gamma * (q + eps).norm_sqr() / (eps * eps + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub eps: f64,
    /// ω_21 − ω_c in μeV.
    pub detuning: f64,
    pub w_full: f64,
    pub w_weak: f64,
    pub w_fano: f64,
}

/// All three rates at reduced detuning `eps`, other parameters from `p`.
pub fn rate_row(p: &SystemParams, eps: f64) -> Result<RateRow, RateError> {
    let pe = p.with_eps(eps);
    let dc = derive_couplings(&pe)?;
    Ok(RateRow {
        eps,
        detuning: pe.omega21 - pe.omega_c,
        w_full: transition_rate(&pe)?.rate,
        w_weak: transition_rate_weak(&pe)?,
        w_fano: fano_formula(dc.q, eps, pe.gamma),
    })
}

/// `n` uniformly spaced points over `[lo, hi]` (inclusive).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

pub fn rate_sweep(p: &SystemParams, eps_range: (f64, f64), n: usize) -> Result<Vec<RateRow>, RateError> {
    if n < 2 {
        return Err(RateError::SweepTooShort(n));
    }
    p.validate()?;
    linspace(eps_range.0, eps_range.1, n).into_iter().map(|eps| rate_row(p, eps)).collect()
}
