//! Time-integrated emission spectra seen through a Lorentzian filter of
//! width `ds`, split into emitter (21), cavity (c) and interference (F)
//! parts.
//!
//! Frequencies are measured from ω_21: ν = 0 is the emitter line and
//! ν = ω_c − ω_21 the cavity line.

mod oracle;

pub use oracle::{spectrum_quadrature_oracle, RegressionOracle};

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::triple_generator;
use crate::params::{derive_couplings, DerivedCouplings, ParamError, SystemParams};
use crate::quad::QuadError;
use crate::rates::{rate_coefficients, CoarseRateSystem};

type C = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("time-integrated moments diverge: slowest eigenvalue {lambda_plus:e} is not decaying")]
    DivergentMoments { lambda_plus: f64 },
    #[error("filter width must be positive and finite, got {0}")]
    FilterWidth(f64),
    #[error("frequency grid must cover [{lo}, {hi}] (relative to the emitter line)")]
    GridCoverage { lo: f64, hi: f64 },
    #[error("oracle quadrature: {0}")]
    Quadrature(#[from] QuadError),
}

/// The two complex eigenvalues γ± of the regression generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoles {
    pub gamma_p: C,
    pub gamma_m: C,
}

impl SpectralPoles {
    pub fn is_degenerate(&self) -> bool {
        (self.gamma_p - self.gamma_m).norm() < 1e-9 * self.gamma_p.norm()
    }
}

pub fn spectral_poles(p: &SystemParams) -> Result<SpectralPoles, ParamError> {
    let dc = derive_couplings(p)?;
    Ok(poles(&dc, p))
}

fn poles(dc: &DerivedCouplings, p: &SystemParams) -> SpectralPoles {
    let i = C::i();
    let mean = -(C::new(dc.gamma_tot, 0.0) + i * dc.detuning) * 0.5;
    let split = C::new(0.5 * (p.kappa - p.gamma) - p.gamma_ph, dc.detuning);
    let root = (split * split - dc.g_plus.conj() * dc.g_minus * 4.0).sqrt() * 0.5;
    SpectralPoles { gamma_p: mean + root, gamma_m: mean - root }
}

/// Linear generator of (⟨σ₋⟩, ⟨a⟩).
pub fn regression_matrix(p: &SystemParams) -> Result<Matrix2<C>, ParamError> {
    let dc = derive_couplings(p)?;
    let i = C::i();
    Ok(Matrix2::new(
        C::new(-(0.5 * p.gamma + p.gamma_ph), 0.0),
        -i * dc.g_minus,
        -i * dc.g_plus.conj(),
        -C::new(0.5 * p.kappa, dc.detuning),
    ))
}

/// ∫n_e dt, ∫n_c dt and ∫p dt over 0 ≤ t < ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedMoments {
    pub i_e: f64,
    pub i_c: f64,
    pub i_p: C,
}

impl IntegratedMoments {
    /// γ I_e + κ I_c + 2Re(γ_F I_p): the number of photons emitted.
    pub fn photon_number(&self, p: &SystemParams, gamma_f: C) -> f64 {
        p.gamma * self.i_e + p.kappa * self.i_c + 2.0 * (gamma_f * self.i_p).re
    }
}

/// Closer than this (relative to κ) to a non-decaying coarse mode, the
/// moments are reported as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e-12;

pub fn integrated_moments(p: &SystemParams) -> Result<IntegratedMoments, SpectrumError> {
    let dc = derive_couplings(p)?;
    let sys = rate_coefficients(&dc, p);
    moments(&dc, &sys)
}

/// Which time evolution the moments are integrated along.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentSource {
    /// Closed-form coarse-grained populations.
    #[default]
    Coarse,
    /// The full equations of motion, integrated in closed form as −A⁻¹y₀.
    Exact,
}

/// Moments of the full equations of motion dy/dt = A y from the excited state.
pub fn integrated_moments_exact(p: &SystemParams) -> Result<IntegratedMoments, SpectrumError> {
    let a = triple_generator(p)?;
    let slow = a.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(slow < -DIVERGENCE_THRESHOLD * p.kappa) {
        return Err(SpectrumError::DivergentMoments { lambda_plus: slow });
    }
    let y0 = DVector::from_column_slice(&[-1.0, 0.0, 0.0, 0.0]);
    let x = a.lu().solve(&y0).ok_or(SpectrumError::DivergentMoments { lambda_plus: slow })?;
    Ok(IntegratedMoments { i_e: x[0], i_c: x[1], i_p: C::new(x[2], x[3]) })
}

fn moments(dc: &DerivedCouplings, sys: &CoarseRateSystem) -> Result<IntegratedMoments, SpectrumError> {
    let slow = sys.lambda_plus.max(sys.lambda_minus);
    if !(slow < -DIVERGENCE_THRESHOLD * sys.kappa) || !(sys.determinant > 0.0) {
        return Err(SpectrumError::DivergentMoments { lambda_plus: slow });
    }
    let i_e = (sys.rpm + sys.kappa) / sys.determinant;
    let i_c = sys.rpp / sys.determinant;
    let i = C::i();
    let i_p = (-i * dc.g_plus.conj() * i_e + i * dc.g_minus.conj() * i_c) / C::new(dc.gamma_tot, dc.detuning);
    Ok(IntegratedMoments { i_e, i_c, i_p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Emitter,
    Cavity,
    Interference,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Emitter, Component::Cavity, Component::Interference];
}

/// f(x) = a + b·x.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Linear {
    a: C,
    b: C,
}

impl Linear {
    fn at(&self, x: C) -> C {
        self.a + self.b * x
    }
}

/// Everything needed to evaluate the closed-form spectra at any ν.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumModel {
    pub poles: SpectralPoles,
    pub moments: IntegratedMoments,
    pub couplings: DerivedCouplings,
    pub sum_rule: f64,
    f: [Linear; 3],
}

impl SpectrumModel {
    /// Model with coarse-grained moments.
    pub fn new(p: &SystemParams) -> Result<Self, SpectrumError> {
        Self::with_source(p, MomentSource::Coarse)
    }

    pub fn with_source(p: &SystemParams, source: MomentSource) -> Result<Self, SpectrumError> {
        let dc = derive_couplings(p)?;
        let m = match source {
            MomentSource::Coarse => moments(&dc, &rate_coefficients(&dc, p))?,
            MomentSource::Exact => integrated_moments_exact(p)?,
        };
        let i = C::i();
        let pi = std::f64::consts::PI;
        let (gm, gpc, gf) = (dc.g_minus, dc.g_plus.conj(), dc.gamma_f);
        let cav = C::new(0.5 * p.kappa, dc.detuning);
        let emi = C::new(p.gamma_ph + 0.5 * p.gamma, 0.0);
        let f21 = Linear { a: (i * gm * m.i_p - cav * m.i_e) * (p.gamma / pi), b: C::new(-p.gamma * m.i_e / pi, 0.0) };
        let fc = Linear {
            a: (i * gpc * m.i_p.conj() - emi * m.i_c) * (p.kappa / pi),
            b: C::new(-p.kappa * m.i_c / pi, 0.0),
        };
        let ff = Linear {
            a: (i * gm * gf.conj() * m.i_c + i * gpc * gf * m.i_e - cav * gf.conj() * m.i_p.conj() - emi * gf * m.i_p)
                / pi,
            b: -(gf.conj() * m.i_p.conj() + gf * m.i_p) / pi,
        };
        Ok(Self {
            poles: poles(&dc, p),
            moments: m,
            couplings: dc,
            sum_rule: m.photon_number(p, dc.gamma_f),
            f: [f21, fc, ff],
        })
    }

    fn linear(&self, which: Component) -> &Linear {
        match which {
            Component::Emitter => &self.f[0],
            Component::Cavity => &self.f[1],
            Component::Interference => &self.f[2],
        }
    }

    /// S_α(ν, ds).
    pub fn component(&self, nu: f64, ds: f64, which: Component) -> f64 {
        let f = self.linear(which);
        let z = C::new(-0.5 * ds, nu);
        let (gp, gm) = (self.poles.gamma_p, self.poles.gamma_m);
        if self.poles.is_degenerate() {
            // d/dγ [f(γ)/(z + γ)] at the double pole.
            let g = 0.5 * (gp + gm);
            let d = z + g;
            return (f.b / d - f.at(g) / (d * d)).re;
        }
        ((f.at(gp) / (z + gp) - f.at(gm) / (z + gm)) / (gp - gm)).re
    }

    pub fn total(&self, nu: f64, ds: f64) -> f64 {
        Component::ALL.iter().map(|&c| self.component(nu, ds, c)).sum()
    }

    /// ∫S_α dν = −π Re[(f(γ₊) − f(γ₋))/(γ₊ − γ₋)].
    pub fn component_weight(&self, which: Component) -> f64 {
        -std::f64::consts::PI * self.linear(which).b.re
    }
}

pub fn spectrum_component(p: &SystemParams, nu: f64, ds: f64, which: Component) -> Result<f64, SpectrumError> {
    check_width(ds)?;
    Ok(SpectrumModel::new(p)?.component(nu, ds, which))
}

fn check_width(ds: f64) -> Result<(), SpectrumError> {
    if ds > 0.0 && ds.is_finite() {
        Ok(())
    } else {
        Err(SpectrumError::FilterWidth(ds))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComponents {
    /// ν − ω_21 in μeV.
    pub nu: Vec<f64>,
    pub s21: Vec<f64>,
    pub s_c: Vec<f64>,
    pub s_f: Vec<f64>,
    pub s_total: Vec<f64>,
    pub ds: f64,
    pub sum_rule: f64,
}

impl SpectrumComponents {
    /// Trapezoid integral of the total over the grid.
    pub fn grid_integral(&self) -> f64 {
        trapezoid(&self.nu, &self.s_total)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Margin the grid must leave around both lines.
pub fn required_margin(p: &SystemParams, ds: f64) -> f64 {
    10.0 * p.kappa.max(ds).max(p.g_abs)
}

/// 2001 points around both lines, wide enough for the Rabi doublet and the
/// filter tails.
pub fn default_grid(p: &SystemParams, ds: f64) -> Vec<f64> {
    let d = p.cavity_detuning();
    let margin = (20.0 * ds + 5.0 * p.g_abs).max(required_margin(p, ds));
    crate::rates::linspace(d.min(0.0) - margin, d.max(0.0) + margin, 2001)
}

pub fn total_spectrum(p: &SystemParams, nu_grid: &[f64], ds: f64) -> Result<SpectrumComponents, SpectrumError> {
    total_spectrum_with(p, nu_grid, ds, MomentSource::Coarse)
}

pub fn total_spectrum_with(
    p: &SystemParams,
    nu_grid: &[f64],
    ds: f64,
    source: MomentSource,
) -> Result<SpectrumComponents, SpectrumError> {
    check_width(ds)?;
    p.validate()?;
    let d = p.cavity_detuning();
    let margin = required_margin(p, ds);
    let (lo, hi) = (d.min(0.0) - margin, d.max(0.0) + margin);
    let covered = nu_grid.first().is_some_and(|v| *v <= lo) && nu_grid.last().is_some_and(|v| *v >= hi);
    if !covered {
        return Err(SpectrumError::GridCoverage { lo, hi });
    }
    let model = SpectrumModel::with_source(p, source)?;
    let n = nu_grid.len();
    let mut out = SpectrumComponents {
        nu: nu_grid.to_vec(),
        s21: Vec::with_capacity(n),
        s_c: Vec::with_capacity(n),
        s_f: Vec::with_capacity(n),
        s_total: Vec::with_capacity(n),
        ds,
        sum_rule: model.sum_rule,
    };
    for &nu in nu_grid {
        let a = model.component(nu, ds, Component::Emitter);
        let b = model.component(nu, ds, Component::Cavity);
        let c = model.component(nu, ds, Component::Interference);
        out.s21.push(a);
        out.s_c.push(b);
        out.s_f.push(c);
        out.s_total.push(a + b + c);
    }
    Ok(out)
}

/// Positions and heights of interior local maxima of `y`.
pub fn peaks(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1]).map(|i| (x[i], y[i])).collect()
}
