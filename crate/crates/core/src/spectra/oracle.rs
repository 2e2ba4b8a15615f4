//! Brute-force spectra from two-time correlators.
//!
//! With O = (σ₋, a) and the emission weights Γ = [[γ, γ_F], [γ_F*, κ]],
//!
//! ```text
//! S(ν) = (1/π) Re ∫₀^∞ dt ∫₀^∞ dτ e^{(iν − ds/2)τ} Σ_ij Γ_ij ⟨O_i†(t) O_j(t+τ)⟩
//! ```
//!
//! and ⟨O_i†(t) O_j(t+τ)⟩ = Σ_k C_jk(τ) ⟨O_i† O_k⟩_t with C(τ) = exp(τM).
//! The t-integral is done numerically over the coarse-grained solution, the
//! τ-integral by Gauss–Kronrod panels on which C is propagated exactly.

use std::sync::OnceLock;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{regression_matrix, spectral_poles, SpectrumError, DIVERGENCE_THRESHOLD};
use crate::dynamics::CoarseSolution;
use crate::params::{derive_couplings, SystemParams};
use crate::quad::{gk15_nodes, integrate_semi_infinite, QuadError, QuadTolerance};

type C = Complex64;

/// Relative accuracy requested from the τ quadrature.
const REL_TOL: f64 = 1e-4;
const EXTRA_LEVELS: usize = 4;
/// Panels between direct re-evaluations of exp(τM).
const REANCHOR: usize = 64;

struct NodeTable {
    h: f64,
    /// exp(z x) is needed at these panel offsets.
    offsets: [f64; 15],
    wk: [f64; 15],
    wg: [f64; 15],
    /// Σ_jk B_jk C_jk(τ) at every node, panel-major.
    c: Vec<C>,
}

pub struct RegressionOracle {
    ds: f64,
    b: Matrix2<C>,
    m: Matrix2<C>,
    /// ∫n_e, ∫n_c, ∫p computed by quadrature.
    pub moments: [C; 3],
    horizon: f64,
    h0: f64,
    freq0: f64,
    floor: f64,
    tables: Vec<OnceLock<NodeTable>>,
}

impl RegressionOracle {
    pub fn new(p: &SystemParams, ds: f64) -> Result<Self, SpectrumError> {
        super::check_width(ds)?;
        let dc = derive_couplings(p)?;
        let coarse = CoarseSolution::new(p)?;
        let sys = coarse.system;
        let slow = sys.lambda_plus.max(sys.lambda_minus);
        if !(slow < -DIVERGENCE_THRESHOLD * p.kappa) {
            return Err(SpectrumError::DivergentMoments { lambda_plus: slow });
        }
        let fast = sys.lambda_plus.abs().max(sys.lambda_minus.abs()).max(p.gamma + p.kappa);
        let q = integrate_semi_infinite(
            |t| {
                let s = coarse.triple(t);
                [C::new(s.n_e, 0.0), C::new(s.n_c, 0.0), s.pol]
            },
            0.0,
            0.1 / fast,
            80.0 / -slow,
            QuadTolerance { abs: 1e-300, rel: 1e-13, max_intervals: 4000 },
        )?;
        let [ie, ic, ip] = q.value;
        let gamma = Matrix2::new(C::new(p.gamma, 0.0), dc.gamma_f, dc.gamma_f.conj(), C::new(p.kappa, 0.0));
        let k = Matrix2::new(ie, ip, ip.conj(), ic);
        let b = gamma.transpose() * k;

        let m = regression_matrix(p)?;
        let poles = spectral_poles(p)?;
        let slowest = (-poles.gamma_p.re).min(-poles.gamma_m.re);
        let fastest = (-poles.gamma_p.re).max(-poles.gamma_m.re);
        let freq = poles.gamma_p.im.abs().max(poles.gamma_m.im.abs()) + (poles.gamma_p - poles.gamma_m).norm();
        let decay = 0.5 * ds + slowest;
        let freq0 = freq + 0.5 * ds + fastest;
        Ok(Self {
            ds,
            b,
            m,
            moments: [ie, ic, ip],
            horizon: 40.0 / decay,
            h0: 1.0 / freq0,
            freq0,
            // Peak height of a unit-weight line through the filter.
            floor: 1e-2 * REL_TOL * 2.0 / (std::f64::consts::PI * ds),
            tables: (0..16).map(|_| OnceLock::new()).collect(),
        })
    }

    fn table(&self, level: usize) -> &NodeTable {
        self.tables[level].get_or_init(|| {
            let h = self.h0 / f64::powi(2.0, level as i32);
            let panels = (self.horizon / h).ceil() as usize;
            let nodes = gk15_nodes(0.0, h);
            let offsets = nodes.map(|n| n.0);
            let node_props: Vec<Matrix2<C>> = offsets.iter().map(|x| (self.m * C::new(*x, 0.0)).exp()).collect();
            let step = (self.m * C::new(h, 0.0)).exp();
            let mut c = Vec::with_capacity(panels * 15);
            let mut e = Matrix2::identity();
            for k in 0..panels {
                if k % REANCHOR == 0 {
                    e = (self.m * C::new(k as f64 * h, 0.0)).exp();
                }
                for np in &node_props {
                    let prop = e * np;
                    c.push(self.b.component_mul(&prop).sum());
                }
                e *= step;
            }
            NodeTable { h, offsets, wk: nodes.map(|n| n.1), wg: nodes.map(|n| n.2), c }
        })
    }

    /// Total S(ν − ω_21, ds).
    pub fn spectrum(&self, nu: f64) -> Result<f64, SpectrumError> {
        let z = C::new(-0.5 * self.ds, nu);
        let start = ((nu.abs() + self.freq0) / self.freq0).log2().ceil().max(0.0) as usize;
        let mut last = (f64::INFINITY, 0.0);
        for level in start..(start + EXTRA_LEVELS).min(self.tables.len()) {
            let t = self.table(level);
            let phase: [C; 15] = t.offsets.map(|x| (z * x).exp());
            let (mut total, mut err) = (C::new(0.0, 0.0), 0.0);
            for (k, chunk) in t.c.chunks_exact(15).enumerate() {
                let base = (z * (k as f64 * t.h)).exp();
                let (mut kr, mut ga) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
                for n in 0..15 {
                    let v = chunk[n] * phase[n];
                    kr += v * t.wk[n];
                    ga += v * t.wg[n];
                }
                total += base * kr;
                err += (base * (kr - ga)).re.abs();
            }
            let value = total.re / std::f64::consts::PI;
            let err = err / std::f64::consts::PI;
            let tol = (REL_TOL * value.abs()).max(self.floor);
            if err <= tol {
                return Ok(value);
            }
            last = (err, tol);
        }
        Err(QuadError::NoConvergence { error: last.0, tolerance: last.1 }.into())
    }

    /// Spectrum on a grid, evaluated in parallel; output order follows `nu`.
    pub fn spectrum_grid(&self, nu: &[f64]) -> Result<Vec<f64>, SpectrumError> {
        nu.par_iter().map(|&v| self.spectrum(v)).collect()
    }
}

pub fn spectrum_quadrature_oracle(p: &SystemParams, nu: f64, ds: f64) -> Result<f64, SpectrumError> {
    RegressionOracle::new(p, ds)?.spectrum(nu)
}
