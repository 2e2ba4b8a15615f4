//! Config handling, CSV emitters and the validation battery behind the
//! `cqed-fano` binary.
//!
//! Every command returns its complete output as a string so that nothing is
//! written unless the whole computation succeeded.

mod config;
mod validate;

pub use config::{Command, DynamicsSpec, GridSpec, RunConfig, SpectrumSpec, SweepSpec, SweepVariable};
pub use validate::{run_validation, CheckResult};

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{evolve_triple, BlochTriple, CoarseSolution, DynamicsError, EvolveOptions};
use crate::ode::{Method, Tolerances};
use crate::params::{SystemParams, TIME_UNIT_PS};
use crate::rates::{linspace, rate_row, transition_rate, RateError};
use crate::spectra::{default_grid, total_spectrum_with, MomentSource, SpectrumError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{failures} validation check(s) failed")]
    Validation { failures: usize, report: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::Param(p) => CliError::Config(p.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Param(p) => CliError::Config(p.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::Param(_) | SpectrumError::FilterWidth(_) | SpectrumError::GridCoverage { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Run-time switches that are not part of the physics configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub fixed_step: bool,
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn header(cmd: Command, cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cqed-fano {} {}", cmd.name(), env!("CARGO_PKG_VERSION"));
    let params = serde_json::to_string(&cfg.params).expect("params serialize");
    let _ = writeln!(s, "# params = {params}");
    let _ = writeln!(s, "# units: energies and rates in ueV; t in 1/ueV (hbar = 1); 1/ueV = {TIME_UNIT_PS} ps");
    s
}

fn grid(spec: &GridSpec) -> Result<Vec<f64>, CliError> {
    if spec.count == 0 || !(spec.start.is_finite() && spec.stop.is_finite()) {
        return Err(CliError::Config("grid needs a positive count and finite bounds".into()));
    }
    if spec.count > 1 && spec.stop <= spec.start {
        return Err(CliError::Config("grid stop must exceed start".into()));
    }
    Ok(linspace(spec.start, spec.stop, spec.count))
}

fn check_params(p: &SystemParams) -> Result<(), CliError> {
    p.validate().map_err(|e| CliError::Config(e.to_string()))
}

/// Runs one command and returns the full text it produces.
pub fn execute(cmd: Command, cfg: &RunConfig, opts: RunOptions) -> Result<String, CliError> {
    match cmd {
        Command::RateSweep => cmd_rate_sweep(cfg),
        Command::Dynamics => cmd_dynamics(cfg, opts),
        Command::Spectrum => cmd_spectrum(cfg),
        Command::SpectrumMap => cmd_spectrum_map(cfg),
        Command::Validate => {
            let (report, failures) = run_validation(cfg);
            if failures > 0 {
                return Err(CliError::Validation { failures, report });
            }
            Ok(report)
        }
    }
}

pub fn cmd_rate_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let p = &cfg.params;
    check_params(p)?;
    let sw = &cfg.sweep;
    let values = grid(&GridSpec { start: sw.start, stop: sw.stop, count: sw.count })?;
    let eps: Vec<f64> = match sw.variable {
        SweepVariable::Eps => values,
        SweepVariable::Detuning => values.iter().map(|d| 2.0 * d / p.kappa).collect(),
    };
    let rows = eps.par_iter().map(|&e| rate_row(p, e)).collect::<Result<Vec<_>, _>>()?;
    let mut out = header(Command::RateSweep, cfg);
    let _ = writeln!(out, "# sweep = {}", serde_json::to_string(sw).expect("sweep serializes"));
    out.push_str("eps,detuning_ueV,W_full,W_weak,W_fano_abs\n");
    for r in rows {
        if !(r.w_full.is_finite() && r.w_weak.is_finite() && r.w_fano.is_finite()) {
            return Err(CliError::Numeric(format!("non-finite rate at eps = {}", r.eps)));
        }
        out.push_str(&row(&[r.eps, r.detuning, r.w_full, r.w_weak, r.w_fano]));
    }
    Ok(out)
}

pub fn cmd_dynamics(cfg: &RunConfig, opts: RunOptions) -> Result<String, CliError> {
    let p = &cfg.params;
    check_params(p)?;
    let spec = &cfg.dynamics;
    let w = transition_rate(p)?.rate;
    let t_end = match spec.t_end {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(CliError::Config(format!("tEnd must be positive, got {t}"))),
        None if w > 0.0 => 10.0 / w,
        None => return Err(CliError::Numeric("W = 0: give dynamics.tEnd explicitly".into())),
    };
    if spec.samples < 2 {
        return Err(CliError::Config("dynamics.samples must be at least 2".into()));
    }
    let times = linspace(0.0, t_end, spec.samples);
    let method = if opts.fixed_step {
        let dt = match spec.fixed_step {
            Some(dt) => dt,
            None => {
                let scale = 2.0 * p.g_abs + p.kappa + p.gamma + p.gamma_ph + p.cavity_detuning().abs();
                (0.05 / scale).max(t_end / 1e6)
            }
        };
        Method::FixedRk4 { dt }
    } else {
        Method::Auto
    };
    let opts = EvolveOptions { method, tolerances: Tolerances::default() };
    let tr = evolve_triple(p, BlochTriple::EXCITED, &times, opts)?;
    if let Some((t, _)) = tr.samples.iter().find(|(_, s)| !(s.n_e.is_finite() && s.n_c.is_finite())) {
        return Err(CliError::Numeric(format!("integration diverged at t = {t}; reduce dynamics.fixedStep")));
    }
    let coarse = CoarseSolution::new(p).map_err(|e| CliError::Config(e.to_string()))?;

    let mut out = header(Command::Dynamics, cfg);
    let _ = writeln!(
        out,
        "# integrator = {}; rtol = {:e}; atol = {:e}",
        tr.integrator, opts.tolerances.rtol, opts.tolerances.atol
    );
    let _ = writeln!(out, "# W = {}", num(w));
    out.push_str("t,n_e_ode,n_c_ode,n_e_coarse,n_c_coarse,exp_minus_Wt\n");
    for (t, s) in &tr.samples {
        let (ne, nc) = coarse.populations(*t);
        out.push_str(&row(&[*t, s.n_e, s.n_c, ne, nc, (-w * t).exp()]));
    }
    Ok(out)
}

fn moments_name(m: MomentSource) -> &'static str {
    match m {
        MomentSource::Coarse => "coarse",
        MomentSource::Exact => "exact",
    }
}

fn spectrum_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    match &cfg.spectrum.grid {
        Some(g) => grid(g),
        None => Ok(default_grid(&cfg.params, cfg.spectrum.ds)),
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let p = &cfg.params;
    check_params(p)?;
    let nu = spectrum_grid(cfg)?;
    let s = total_spectrum_with(p, &nu, cfg.spectrum.ds, cfg.spectrum.moments)?;
    let mut out = header(Command::Spectrum, cfg);
    let _ = writeln!(out, "# ds = {}; moments = {}", num(cfg.spectrum.ds), moments_name(cfg.spectrum.moments));
    out.push_str("nu_minus_omega21_ueV,S21,Sc,SF,Stotal\n");
    for i in 0..nu.len() {
        out.push_str(&row(&[s.nu[i], s.s21[i], s.s_c[i], s.s_f[i], s.s_total[i]]));
    }
    let _ = writeln!(out, "# sumRule = {}", num(s.sum_rule));
    let _ = writeln!(out, "# gridIntegral = {}", num(s.grid_integral()));
    Ok(out)
}

pub fn cmd_spectrum_map(cfg: &RunConfig) -> Result<String, CliError> {
    let p = &cfg.params;
    check_params(p)?;
    let detunings = grid(&cfg.spectrum.map)?;
    let ds = cfg.spectrum.ds;
    let nu = match &cfg.spectrum.grid {
        Some(g) => grid(g)?,
        None => {
            // The cavity line sits at ν − ω21 = −detuning.
            let (dmin, dmax) = (detunings[0], detunings[detunings.len() - 1]);
            let margin = crate::spectra::required_margin(p, ds);
            linspace((-dmax).min(0.0) - margin, (-dmin).max(0.0) + margin, 1001)
        }
    };
    let rows: Vec<Result<Vec<f64>, SpectrumError>> = detunings
        .par_iter()
        .map(|&d| total_spectrum_with(&p.with_emitter_detuning(d), &nu, ds, cfg.spectrum.moments).map(|s| s.s_total))
        .collect();
    let mut out = header(Command::SpectrumMap, cfg);
    let _ = writeln!(out, "# ds = {}; moments = {}", num(ds), moments_name(cfg.spectrum.moments));
    out.push_str("detuning_ueV,nu_minus_omega21_ueV,Stotal\n");
    let mut gaps = Vec::new();
    for (d, r) in detunings.iter().zip(rows) {
        match r {
            Ok(s) => {
                for (v, st) in nu.iter().zip(&s) {
                    out.push_str(&row(&[*d, *v, *st]));
                }
            }
            Err(e @ SpectrumError::DivergentMoments { .. }) => gaps.push((*d, e.to_string())),
            Err(e) => return Err(e.into()),
        }
    }
    for (d, why) in gaps {
        let _ = writeln!(out, "# gap: detuning_ueV = {}: {why}", num(d));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(s: &str) -> Vec<&str> {
        s.lines().filter(|l| !l.starts_with('#')).collect()
    }

    #[test]
    fn number_format_has_17_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn rate_sweep_columns_and_single_row() {
        let mut cfg = RunConfig::default();
        cfg.sweep.count = 1;
        cfg.sweep.start = 3.0;
        let out = cmd_rate_sweep(&cfg).unwrap();
        let l = lines(&out);
        assert_eq!(l[0], "eps,detuning_ueV,W_full,W_weak,W_fano_abs");
        assert_eq!(l.len(), 2);
        assert!(out.contains("# params = {"));
    }

    #[test]
    fn detuning_sweep_converts_to_eps() {
        let cfg = RunConfig {
            sweep: SweepSpec { variable: SweepVariable::Detuning, start: -100.0, stop: 100.0, count: 3 },
            ..RunConfig::default()
        };
        let out = cmd_rate_sweep(&cfg).unwrap();
        let first: Vec<f64> = lines(&out)[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], -4.0);
        assert_eq!(first[1], -100.0);
    }

    #[test]
    fn antiresonance_dip_in_a_sweep() {
        let mut cfg = RunConfig::default();
        cfg.params.g_abs = 0.0;
        cfg.sweep = SweepSpec { variable: SweepVariable::Eps, start: -2.0, stop: 2.0, count: 41 };
        let out = cmd_rate_sweep(&cfg).unwrap();
        let rows: Vec<Vec<f64>> =
            lines(&out)[1..].iter().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        let min = rows.iter().min_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
        assert_eq!(min[0], 0.0);
        assert!(min[2] <= 1e-12 * cfg.params.kappa);
    }

    #[test]
    fn invalid_params_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.params.eta = 1.5;
        let e = cmd_rate_sweep(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn bare_emitter_dynamics_matches_exponential_column() {
        let mut cfg = RunConfig::default();
        cfg.params.g_abs = 0.0;
        cfg.params.eta = 0.0;
        cfg.dynamics.samples = 51;
        let out = cmd_dynamics(&cfg, RunOptions::default()).unwrap();
        let l = lines(&out);
        assert_eq!(l[0], "t,n_e_ode,n_c_ode,n_e_coarse,n_c_coarse,exp_minus_Wt");
        for line in &l[1..] {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((v[1] - v[5]).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_step_output_is_reproducible() {
        let mut cfg = RunConfig::default();
        cfg.dynamics.samples = 101;
        let opts = RunOptions { fixed_step: true };
        let a = cmd_dynamics(&cfg, opts).unwrap();
        let b = cmd_dynamics(&cfg, opts).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("rk4"));
    }

    #[test]
    fn spectrum_has_footer_and_destructive_dip() {
        let mut cfg = RunConfig::default();
        cfg.params = cfg.params.with_emitter_detuning(-3160.0);
        let out = cmd_spectrum(&cfg).unwrap();
        assert!(out.lines().last().unwrap().starts_with("# gridIntegral"));
        let sum: f64 = out.lines().find_map(|l| l.strip_prefix("# sumRule = ")).unwrap().parse().unwrap();
        assert!((sum - 1.0).abs() < 1e-8);
        let rows: Vec<Vec<f64>> =
            lines(&out)[1..].iter().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        let at_emitter = rows.iter().min_by(|a, b| a[0].abs().total_cmp(&b[0].abs())).unwrap();
        assert!(at_emitter[3] < 0.0);
    }

    #[test]
    fn exact_moments_are_selectable() {
        let mut cfg = RunConfig::default();
        cfg.spectrum.moments = MomentSource::Exact;
        let out = cmd_spectrum(&cfg).unwrap();
        assert!(out.contains("; moments = exact\n"));
        let sum: f64 = out.lines().find_map(|l| l.strip_prefix("# sumRule = ")).unwrap().parse().unwrap();
        assert!((sum - 1.0).abs() < 1e-12);
        let coarse = cmd_spectrum(&RunConfig::default()).unwrap();
        assert_ne!(out, coarse);
    }

    #[test]
    fn spectrum_map_reports_divergent_rows_as_gaps() {
        let mut cfg = RunConfig::default();
        cfg.params.g_abs = 0.0;
        cfg.spectrum.map = GridSpec { start: -100.0, stop: 100.0, count: 3 };
        let out = cmd_spectrum_map(&cfg).unwrap();
        assert!(out.contains("# gap: detuning_ueV = 0.0000000000000000e0"));
        let detunings: std::collections::BTreeSet<String> =
            lines(&out)[1..].iter().map(|l| l.split(',').next().unwrap().to_string()).collect();
        assert_eq!(detunings.len(), 2);
    }
}
