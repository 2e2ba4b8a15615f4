//! Master equation in the single-excitation subspace, ordered basis
//! {|e,0⟩, |g,1⟩, |g,0⟩}.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use super::{BlochTriple, DynamicsError, EvolveOptions, Trajectory};
use crate::ode::integrate_linear;
use crate::params::{derive_couplings, ParamError, SystemParams};

type C = Complex64;
type M3 = Matrix3<C>;

const E0: usize = 0;
const G1: usize = 1;
const G0: usize = 2;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn unit(i: usize, j: usize) -> M3 {
    let mut m = M3::zeros();
    m[(i, j)] = c(1.0);
    m
}

/// A 3×3 density matrix over {|e,0⟩, |g,1⟩, |g,0⟩}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneExcitationDensityMatrix(pub M3);

impl OneExcitationDensityMatrix {
    pub fn excited() -> Self {
        Self(unit(E0, E0))
    }

    pub fn vacuum() -> Self {
        Self(unit(G0, G0))
    }

    pub fn trace(&self) -> C {
        self.0.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * c(0.5);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<(), DynamicsError> {
        if self.hermiticity_error() > 1e-12 {
            return Err(DynamicsError::InvalidState("density matrix is not Hermitian".into()));
        }
        if (self.trace() - c(1.0)).norm() > 1e-10 {
            return Err(DynamicsError::InvalidState(format!("trace {} ≠ 1", self.trace())));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -1e-9 {
            return Err(DynamicsError::InvalidState(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(())
    }

    /// (⟨σ₊σ₋⟩, ⟨a†a⟩, ⟨σ₊a⟩).
    pub fn expectations(&self) -> BlochTriple {
        BlochTriple { n_e: self.0[(E0, E0)].re, n_c: self.0[(G1, G1)].re, pol: self.0[(G1, E0)] }
    }

    fn to_vector(self) -> DVector<f64> {
        let mut v = DVector::zeros(18);
        for (k, z) in self.0.iter().enumerate() {
            v[k] = z.re;
            v[9 + k] = z.im;
        }
        v
    }

    fn from_slice(v: &[f64]) -> Self {
        Self(M3::from_fn(|i, j| {
            let k = i + 3 * j;
            C::new(v[k], v[9 + k])
        }))
    }
}

/// Schrödinger-picture generator ρ ↦ −i[H, ρ] + Σ dissipators, with
/// energies measured from ω_21.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladGenerator {
    h: M3,
    sm: M3,
    a: M3,
    sz: M3,
    gamma: f64,
    kappa: f64,
    gamma_f: C,
    gamma_ph: f64,
}

pub fn lindblad_generator(p: &SystemParams) -> Result<LindbladGenerator, ParamError> {
    let dc = derive_couplings(p)?;
    let g = p.g();
    let mut h = M3::zeros();
    h[(G1, G1)] = c(dc.detuning);
    h[(E0, G1)] = g;
    h[(G1, E0)] = g.conj();
    let mut sz = M3::zeros();
    sz[(E0, E0)] = c(1.0);
    sz[(G1, G1)] = c(-1.0);
    sz[(G0, G0)] = c(-1.0);
    Ok(LindbladGenerator {
        h,
        sm: unit(G0, E0),
        a: unit(G0, G1),
        sz,
        gamma: p.gamma,
        kappa: p.kappa,
        gamma_f: dc.gamma_f,
        gamma_ph: p.gamma_ph,
    })
}

/// L ρ L† − ½{L†L, ρ}
pub fn dissipator(l: &M3, rho: &M3) -> M3 {
    let ld = l.adjoint();
    let ll = ld * l;
    l * rho * ld - (ll * rho + rho * ll) * c(0.5)
}

impl LindbladGenerator {
    pub fn apply(&self, rho: &M3) -> M3 {
        let i = C::i();
        let (sm, a) = (&self.sm, &self.a);
        let (sp, ad) = (sm.adjoint(), a.adjoint());
        let coherent = (self.h * rho - rho * self.h) * (-i);
        let d21 = dissipator(sm, rho) * c(self.gamma);
        let dc = dissipator(a, rho) * c(self.kappa);
        let spa = sp * a;
        let adsm = ad * sm;
        let df = (a * rho * sp * c(2.0) - spa * rho - rho * spa) * (self.gamma_f * 0.5)
            + (sm * rho * ad * c(2.0) - adsm * rho - rho * adsm) * (self.gamma_f.conj() * 0.5);
        let dph = (self.sz * rho * self.sz - rho) * c(0.5 * self.gamma_ph);
        coherent + d21 + dc + df + dph
    }

    /// Real 18×18 matrix acting on (Re ρ, Im ρ) in column-major order.
    pub fn real_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(18, 18);
        for k in 0..9 {
            let (i, j) = (k % 3, k / 3);
            let out = self.apply(&unit(i, j));
            for (r, z) in out.iter().enumerate() {
                // basis E_ij contributes z to the real input, i·z to the imaginary one
                m[(r, k)] = z.re;
                m[(9 + r, k)] = z.im;
                m[(r, 9 + k)] = -z.im;
                m[(9 + r, 9 + k)] = z.re;
            }
        }
        m
    }
}

/// Integrates the master equation and records the expectation values.
pub fn evolve_lindblad(
    p: &SystemParams,
    rho0: OneExcitationDensityMatrix,
    grid: &[f64],
    opts: EvolveOptions,
) -> Result<Trajectory, DynamicsError> {
    rho0.check()?;
    let gen = lindblad_generator(p)?;
    let (ys, integrator) = integrate_linear(&gen.real_matrix(), &rho0.to_vector(), grid, opts.method, opts.tolerances)?;
    let mut samples = Vec::with_capacity(ys.len());
    for (t, y) in grid.iter().zip(&ys) {
        let rho = OneExcitationDensityMatrix::from_slice(y.as_slice());
        let lmin = rho.min_eigenvalue();
        if lmin < -1e-7 {
            return Err(DynamicsError::Positivity { t: *t, eigenvalue: lmin });
        }
        samples.push((*t, rho.expectations()));
    }
    Ok(Trajectory { samples, integrator, tolerances: opts.tolerances, params: *p })
}
