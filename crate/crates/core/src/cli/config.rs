use serde::{Deserialize, Serialize};

use crate::params::SystemParams;
use crate::spectra::MomentSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    RateSweep,
    Dynamics,
    Spectrum,
    SpectrumMap,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::RateSweep => "rate-sweep",
            Command::Dynamics => "dynamics",
            Command::Spectrum => "spectrum",
            Command::SpectrumMap => "spectrum-map",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Reduced detuning ε = 2(ω21 − ωc)/κ.
    Eps,
    /// ω21 − ωc in μeV.
    Detuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { variable: SweepVariable::Eps, start: -200.0, stop: 200.0, count: 801 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct DynamicsSpec {
    /// End time in 1/μeV; defaults to 10/W.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub samples: usize,
    /// Step used with `--fixed-step`; defaults to a fraction of the fastest time scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_step: Option<f64>,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        Self { t_end: None, samples: 1001, fixed_step: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct SpectrumSpec {
    /// Filter width in μeV.
    pub ds: f64,
    /// ν − ω21 grid; defaults to 2001 points around both lines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Detuning axis (ω21 − ωc) of `spectrum-map`.
    pub map: GridSpec,
    /// `coarse` (default) or `exact`.
    pub moments: MomentSource,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            ds: 20.0,
            grid: None,
            map: GridSpec { start: -4000.0, stop: 4000.0, count: 161 },
            moments: MomentSource::Coarse,
        }
    }
}

/// A complete run description, read from a single JSON document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub params: SystemParams,
    pub sweep: SweepSpec,
    pub dynamics: DynamicsSpec,
    pub spectrum: SpectrumSpec,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"params": {"gAbs": 1, "q": 2}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"spectrum": {"ds": 1, "width": 2}}"#).is_err());
    }

    #[test]
    fn partial_params_are_not_accepted() {
        // Physics parameters must be complete so that runs are unambiguous.
        assert!(RunConfig::from_json(r#"{"params": {"gAbs": 1}}"#).is_err());
    }

    #[test]
    fn parses_a_full_document() {
        let text = r#"{
            "command": "spectrum-map",
            "params": {"omega21": 0, "omegaC": 3160, "gAbs": 100, "phi": 1.5707963267948966,
                       "gamma": 0.05, "kappa": 50, "gammaPh": 3, "eta": 1,
                       "theta21": 1.5707963267948966, "thetaC": 0},
            "sweep": {"variable": "detuning", "start": -1000, "stop": 1000, "count": 5},
            "dynamics": {"tEnd": 2.5, "samples": 11},
            "spectrum": {"ds": 20, "grid": {"start": -5000, "stop": 5000, "count": 101},
                         "map": {"start": -4000, "stop": 4000, "count": 161}},
            "seed": 7,
            "workers": 2
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.command, Some(Command::SpectrumMap));
        assert_eq!(cfg.params.gamma_ph, 3.0);
        assert_eq!(cfg.sweep.variable, SweepVariable::Detuning);
        assert_eq!(cfg.dynamics.t_end, Some(2.5));
        assert_eq!(cfg.spectrum.grid.unwrap().count, 101);
        assert_eq!(cfg.workers, Some(2));
        assert_eq!(cfg.spectrum.moments, MomentSource::Coarse);
        let exact = RunConfig::from_json(r#"{"spectrum": {"moments": "exact"}}"#).unwrap();
        assert_eq!(exact.spectrum.moments, MomentSource::Exact);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e4..1e4f64]
    }

    proptest! {
        #[test]
        fn round_trips_losslessly(
            g in finite(), d in finite(), ds in finite(), seed in any::<u64>(),
            count in 0usize..10_000, t_end in proptest::option::of(finite()),
            workers in proptest::option::of(1usize..64),
        ) {
            let mut cfg = RunConfig::default();
            cfg.params.g_abs = g;
            cfg.params.omega_c = d;
            cfg.spectrum.ds = ds;
            cfg.sweep.count = count;
            cfg.dynamics.t_end = t_end;
            cfg.seed = seed;
            cfg.workers = workers;
            cfg.command = Some(Command::Dynamics);
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
