//! Fano interference in cavity QED from a Markovian master equation.
//!
//! A two-level emitter couples to a single cavity mode, and both radiate
//! into the same continuum. When their far-field radiation patterns
//! overlap (η > 0), the two decay channels interfere through a cross
//! dissipator with rate γ_F = e^{i(θ21−θc)}√(ηγκ). This crate computes:
//!
//! * [`rates`]: the generalized Fano transition rate and its weak-coupling,
//!   Purcell and textbook-Fano limits;
//! * [`dynamics`]: population dynamics from the three-variable equations of
//!   motion, the coarse-grained closed forms, and a Lindblad oracle;
//! * [`spectra`]: time-integrated, filtered emission spectra split into
//!   emitter, cavity and interference parts, with a regression-theorem
//!   quadrature oracle;
//! * [`cli`]: config handling and CSV emitters behind the `cqed-fano` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod dynamics;
pub mod ode;
pub mod params;
pub mod quad;
pub mod rates;
pub mod spectra;

pub use params::{derive_couplings, reduced_detuning, DerivedCouplings, ParamError, SystemParams};
pub use rates::{
    fano_formula, rate_coefficients, rate_sweep, transition_rate, transition_rate_weak, CoarseRateSystem, RateError,
    TransitionRate,
};
