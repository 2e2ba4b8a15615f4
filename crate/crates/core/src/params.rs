//! Physical inputs and the scalar couplings derived from them.
//!
//! Units: every energy and rate is in μeV with ħ = 1, so times are in
//! 1/μeV. Only energy differences enter the model; the emitter transition
//! energy is used as the frequency origin internally.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// ħ in μeV·fs.
pub const HBAR_UEV_FS: f64 = 658.211_956_9;

/// One natural time unit (1/μeV) expressed in picoseconds.
pub const TIME_UNIT_PS: f64 = HBAR_UEV_FS * 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("overlap eta must lie in [0, 1], got {0}")]
    Overlap(f64),
    #[error("emitter decay rate gamma must be positive, got {0}")]
    Gamma(f64),
    #[error("cavity decay rate kappa must be positive, got {0}")]
    Kappa(f64),
    #[error("pure dephasing rate must be non-negative, got {0}")]
    Dephasing(f64),
    #[error("coupling magnitude must be non-negative, got {0}")]
    Coupling(f64),
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
}

/// Emitter + cavity + bath parameters.
///
/// Field names follow the JSON config keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SystemParams {
    /// Emitter transition energy.
    pub omega21: f64,
    /// Cavity resonance.
    pub omega_c: f64,
    /// Coupling magnitude |g|.
    pub g_abs: f64,
    /// Phase of g.
    pub phi: f64,
    /// Emitter radiative decay rate.
    pub gamma: f64,
    /// Cavity decay rate.
    pub kappa: f64,
    /// Pure dephasing rate of the emitter.
    pub gamma_ph: f64,
    /// Overlap of the emitter and cavity far-field radiation patterns.
    pub eta: f64,
    /// Phase of the emitter-continuum coupling.
    pub theta21: f64,
    /// Phase of the cavity-continuum coupling.
    pub theta_c: f64,
}

impl Default for SystemParams {
    /// Strong-coupling micropillar-like defaults: κ = 50, γ = 0.05,
    /// |g| = 100 μeV, resonant, identical radiation patterns.
    fn default() -> Self {
        Self {
            omega21: 0.0,
            omega_c: 0.0,
            g_abs: 100.0,
            phi: FRAC_PI_2,
            gamma: 0.05,
            kappa: 50.0,
            gamma_ph: 0.0,
            eta: 1.0,
            theta21: FRAC_PI_2,
            theta_c: 0.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("omega21", self.omega21),
            ("omegaC", self.omega_c),
            ("gAbs", self.g_abs),
            ("phi", self.phi),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("gammaPh", self.gamma_ph),
            ("eta", self.eta),
            ("theta21", self.theta21),
            ("thetaC", self.theta_c),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(ParamError::Overlap(self.eta));
        }
        if self.gamma <= 0.0 {
            return Err(ParamError::Gamma(self.gamma));
        }
        if self.kappa <= 0.0 {
            return Err(ParamError::Kappa(self.kappa));
        }
        if self.gamma_ph < 0.0 {
            return Err(ParamError::Dephasing(self.gamma_ph));
        }
        if self.g_abs < 0.0 {
            return Err(ParamError::Coupling(self.g_abs));
        }
        Ok(())
    }

    /// Complex coupling g = |g| e^{iφ}.
    pub fn g(&self) -> Complex64 {
        Complex64::from_polar(self.g_abs, self.phi)
    }

    /// ω_c − ω_21.
    pub fn cavity_detuning(&self) -> f64 {
        self.omega_c - self.omega21
    }

    /// Copy with the cavity moved so that the reduced detuning equals `eps`.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self { omega_c: self.omega21 - eps * self.kappa / 2.0, ..*self }
    }

    /// Copy with ω_21 − ω_c set to `delta` (μeV), keeping ω_21 fixed.
    pub fn with_emitter_detuning(&self, delta: f64) -> Self {
        Self { omega_c: self.omega21 - delta, ..*self }
    }
}

/// Couplings computed once from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCouplings {
    /// Cross-decay rate γ_F.
    pub gamma_f: Complex64,
    /// g₊ = g + iγ_F/2.
    pub g_plus: Complex64,
    /// g₋ = g − iγ_F/2.
    pub g_minus: Complex64,
    /// Γ_tot = (γ + κ)/2 + γ_ph.
    pub gamma_tot: f64,
    /// Fano parameter (complex in general).
    pub q: Complex64,
    /// Reduced detuning ε = 2(ω21 − ωc)/κ.
    pub eps: f64,
    /// ω_{c,21} = ω_c − ω_21.
    pub detuning: f64,
}

/// Cross-decay rate e^{i(θ21−θc)} √(η γ κ), without validating the inputs.
pub fn cross_decay_rate(gamma: f64, kappa: f64, eta: f64, theta21: f64, theta_c: f64) -> Complex64 {
    Complex64::from_polar((eta * gamma * kappa).sqrt(), theta21 - theta_c)
}

/// The 2×2 collective decay matrix [[γ, γ_F*], [γ_F, κ]].
///
/// This is not validated so that deliberately unphysical overlaps (η > 1)
/// can be inspected; its smallest eigenvalue goes negative exactly when η > 1.
pub fn collective_decay_matrix(p: &SystemParams) -> [[Complex64; 2]; 2] {
    let gf = if p.eta >= 0.0 {
        cross_decay_rate(p.gamma, p.kappa, p.eta, p.theta21, p.theta_c)
    } else {
        Complex64::new(f64::NAN, f64::NAN)
    };
    [[Complex64::new(p.gamma, 0.0), gf.conj()], [gf, Complex64::new(p.kappa, 0.0)]]
}

/// Smallest eigenvalue of the (Hermitian) collective decay matrix.
pub fn collective_decay_min_eigenvalue(p: &SystemParams) -> f64 {
    let m = collective_decay_matrix(p);
    let a = m[0][0].re;
    let d = m[1][1].re;
    let off = m[1][0].norm_sqr();
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + off).sqrt();
    // Vieta on the small root avoids cancellation when off ≈ a·d.
    let large = half_tr + disc;
    let det = a * d - off;
    if large > 0.0 {
        det / large
    } else {
        half_tr - disc
    }
}

pub fn derive_couplings(p: &SystemParams) -> Result<DerivedCouplings, ParamError> {
    p.validate()?;
    let g = p.g();
    let gamma_f = cross_decay_rate(p.gamma, p.kappa, p.eta, p.theta21, p.theta_c);
    let half_i_gf = Complex64::i() * gamma_f * 0.5;
    let q = Complex64::from_polar(2.0 * p.g_abs / (p.gamma * p.kappa).sqrt(), p.phi + p.theta_c - p.theta21);
    Ok(DerivedCouplings {
        gamma_f,
        g_plus: g + half_i_gf,
        g_minus: g - half_i_gf,
        gamma_tot: 0.5 * (p.gamma + p.kappa) + p.gamma_ph,
        q,
        eps: reduced_detuning(p)?,
        detuning: p.cavity_detuning(),
    })
}

/// ε = 2(ω21 − ωc)/κ.
pub fn reduced_detuning(p: &SystemParams) -> Result<f64, ParamError> {
    if !(p.kappa > 0.0) {
        return Err(ParamError::Kappa(p.kappa));
    }
    Ok(2.0 * (p.omega21 - p.omega_c) / p.kappa)
}
