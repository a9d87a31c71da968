//! Run configuration: a sectioned TOML document.
//!
//! ```toml
//! scenario = "fig2b"          # optional preset; owns every [model] key
//!
//! [model]
//! n_qubits = 1
//! omega_s = 1.0               # qubit frequency, the unit of frequency
//! omega_cav = 0.5             # cavity frequency
//! g = [0.3, 0.5]              # coupling (one value or a sweep), units of omega
//! g_imag = 0.0                # imaginary part shared by every g
//! gamma = 5.0                 # detector memory rate; 0 removes the detector
//! kappa1 = 1.0                # qubit weights in the cavity coupling
//! kappa2 = 0.0
//! detector_amplitude = 2.5    # direct-coupling kernel amplitude, default gamma/2
//! initial_state = "excited"   # or [0.6, 0.8] or [[re, im], ...]
//! compare_direct = true       # also run the qubits coupled straight to the detector
//! compare_oracle = true       # also solve the deterministic reference
//!
//! [grid]
//! t_max = 10.0                # units of 1/omega
//! dt = 0.01
//!
//! [ensemble]
//! k = 10000
//! seed = 1
//!
//! [output]
//! observables = ["population_a", "coherence_a"]
//! dir = "out"
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coeffs::ModelParams;
use crate::operators::{bell_phi_plus, ComplexVector};
use crate::{tol, Error, Result, TimeGrid, C64};

pub const MIN_ENSEMBLE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Fig2a, Scenario::Fig2b, Scenario::Fig3a, Scenario::Fig3b];

    pub fn id(&self) -> &'static str {
        match self {
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
        }
    }

    /// The full configuration this preset stands for.
    pub fn preset(&self) -> RunConfig {
        let (model, g_values, state) = match self {
            Self::Fig2a | Self::Fig2b => {
                let gamma = if *self == Self::Fig2a { 0.5 } else { 5.0 };
                (ModelParams::one_qubit(1.0, 0.5, 0.5, gamma), vec![C64::from(0.3), C64::from(0.5)], InitialState::Excited)
            }
            Self::Fig3a | Self::Fig3b => {
                let state = if *self == Self::Fig3a { InitialState::BellPhiPlus } else { InitialState::BothExcited };
                (ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 1.0), vec![C64::from(0.5)], state)
            }
        };
        let outputs = default_outputs(model.n_qubits);
        RunConfig {
            scenario: Some(*self),
            model,
            g_values,
            initial_state: state,
            compare_direct: true,
            compare_oracle: true,
            grid: TimeGrid::new(10.0, 0.01).expect("preset grid"),
            ensemble: EnsembleConfig {
                k: if self.two_qubit() { 20_000 } else { 10_000 },
                seed: 1,
            },
            outputs,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn two_qubit(&self) -> bool {
        matches!(self, Self::Fig3a | Self::Fig3b)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}' (expected fig2a, fig2b, fig3a or fig3b)")))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Excited,
    Ground,
    BellPhiPlus,
    BothExcited,
    Amplitudes(Vec<C64>),
}

impl InitialState {
    fn name(&self) -> Option<&'static str> {
        Some(match self {
            Self::Excited => "excited",
            Self::Ground => "ground",
            Self::BellPhiPlus => "bell_phi_plus",
            Self::BothExcited => "both_excited",
            Self::Amplitudes(_) => return None,
        })
    }

    fn from_name(s: &str) -> Option<Self> {
        [Self::Excited, Self::Ground, Self::BellPhiPlus, Self::BothExcited]
            .into_iter()
            .find(|x| x.name() == Some(s))
    }

    pub fn label(&self) -> String {
        match self.name() {
            Some(n) => n.to_string(),
            None => "explicit".to_string(),
        }
    }

    pub fn vector(&self, n_qubits: usize) -> Result<ComplexVector> {
        let dim = 1 << n_qubits;
        let v = match (self, n_qubits) {
            (Self::Excited, 1) => ComplexVector::basis(2, 1),
            (Self::Ground, _) => ComplexVector::basis(dim, 0),
            (Self::BellPhiPlus, 2) => bell_phi_plus(),
            (Self::BothExcited, 2) => ComplexVector::basis(4, 3),
            (Self::Amplitudes(a), _) => {
                if a.len() != dim {
                    return Err(Error::Config(format!(
                        "model.initial_state: {} amplitudes given, {n_qubits} qubit(s) need {dim}",
                        a.len()
                    )));
                }
                let v = ComplexVector::new(a.clone())?;
                if (v.norm() - 1.0).abs() > tol::NORMALIZATION {
                    return Err(Error::Config(format!("model.initial_state: amplitudes have norm {}, expected 1", v.norm())));
                }
                v
            }
            (s, n) => {
                return Err(Error::Config(format!("model.initial_state: '{}' is not a {n}-qubit state", s.label())));
            }
        };
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub k: usize,
    pub seed: u64,
}

/// A validated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    /// Model at the first coupling of `g_values`.
    pub model: ModelParams,
    /// Couplings to run; one probe curve each.
    pub g_values: Vec<C64>,
    pub initial_state: InitialState,
    pub compare_direct: bool,
    pub compare_oracle: bool,
    pub grid: TimeGrid,
    pub ensemble: EnsembleConfig,
    pub outputs: Vec<String>,
    pub output_dir: PathBuf,
}

pub const OBSERVABLES: [&str; 5] = ["population_a", "population_b", "coherence_a", "coherence_b", "concurrence"];

fn default_outputs(n_qubits: usize) -> Vec<String> {
    let names: &[&str] = if n_qubits == 1 {
        &["population_a", "coherence_a"]
    } else {
        &["concurrence", "population_a", "population_b"]
    };
    names.iter().map(|s| s.to_string()).collect()
}

impl RunConfig {
    /// Model for the `i`-th coupling.
    pub fn model_at(&self, i: usize) -> ModelParams {
        ModelParams {
            g: self.g_values[i],
            ..self.model.clone()
        }
    }

    pub fn psi0(&self) -> Result<ComplexVector> {
        self.initial_state.vector(self.model.n_qubits)
    }

    /// Label used for output files.
    pub fn run_name(&self) -> String {
        self.scenario.map(|s| s.id().to_string()).unwrap_or_else(|| "run".to_string())
    }

    fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        if self.g_values.is_empty() {
            return Err(Error::Config("model.g: at least one coupling is required".into()));
        }
        self.psi0()?;
        if self.ensemble.k < MIN_ENSEMBLE {
            return Err(Error::Config(format!(
                "ensemble.k: ensemble size below minimum ({} < {MIN_ENSEMBLE})",
                self.ensemble.k
            )));
        }
        if self.ensemble.seed > i64::MAX as u64 {
            return Err(Error::Config("ensemble.seed: must not exceed 2^63 - 1".into()));
        }
        for name in &self.outputs {
            if !OBSERVABLES.contains(&name.as_str()) {
                return Err(Error::Config(format!("output.observables: unknown observable '{name}'")));
            }
            let two_only = name.ends_with("_b") || name == "concurrence";
            if two_only && self.model.n_qubits == 1 {
                return Err(Error::Config(format!("output.observables: '{name}' needs two qubits")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    ensemble: RawEnsemble,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n_qubits: Option<usize>,
    omega_s: Option<f64>,
    omega_b: Option<f64>,
    omega_cav: Option<f64>,
    g: Option<RawCoupling>,
    g_imag: Option<f64>,
    gamma: Option<f64>,
    kappa1: Option<f64>,
    kappa2: Option<f64>,
    detector_amplitude: Option<f64>,
    initial_state: Option<RawState>,
    compare_direct: Option<bool>,
    compare_oracle: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum RawCoupling {
    One(f64),
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum RawState {
    Name(String),
    Real(Vec<f64>),
    Complex(Vec<[f64; 2]>),
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t_max: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    k: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    observables: Option<Vec<String>>,
    dir: Option<PathBuf>,
}

/// A parsed configuration and the warnings raised while resolving it.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

fn required<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required key {field}")))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_warnings(text).map(|p| p.config)
}

pub fn parse_config_with_warnings(text: &str) -> Result<Parsed> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let mut warnings = Vec::new();
    let config = match &raw.scenario {
        Some(id) => from_preset(id.parse()?, raw, &mut warnings)?,
        None => from_raw(raw)?,
    };
    config.validate()?;
    Ok(Parsed { config, warnings })
}

fn state_from_raw(s: RawState) -> Result<InitialState> {
    match s {
        RawState::Name(n) => InitialState::from_name(&n).ok_or_else(|| {
            Error::Config(format!(
                "model.initial_state: unknown state '{n}' (expected excited, ground, bell_phi_plus, both_excited or an amplitude list)"
            ))
        }),
        RawState::Real(v) => Ok(InitialState::Amplitudes(v.into_iter().map(C64::from).collect())),
        RawState::Complex(v) => Ok(InitialState::Amplitudes(v.into_iter().map(|[r, i]| C64::new(r, i)).collect())),
    }
}

fn state_to_raw(s: &InitialState) -> RawState {
    match (s.name(), s) {
        (Some(n), _) => RawState::Name(n.to_string()),
        (None, InitialState::Amplitudes(a)) if a.iter().all(|z| z.im == 0.0) => RawState::Real(a.iter().map(|z| z.re).collect()),
        (None, InitialState::Amplitudes(a)) => RawState::Complex(a.iter().map(|z| [z.re, z.im]).collect()),
        _ => unreachable!(),
    }
}

fn couplings(g: RawCoupling, g_imag: f64) -> Vec<C64> {
    match g {
        RawCoupling::One(x) => vec![C64::new(x, g_imag)],
        RawCoupling::Sweep(v) => v.into_iter().map(|x| C64::new(x, g_imag)).collect(),
    }
}

fn from_raw(raw: RawConfig) -> Result<RunConfig> {
    let m = raw.model;
    let n_qubits = required(m.n_qubits, "model.n_qubits")?;
    let g_values = couplings(required(m.g, "model.g")?, m.g_imag.unwrap_or(0.0));
    let gamma = required(m.gamma, "model.gamma")?;
    let mut model = ModelParams::one_qubit(m.omega_s.unwrap_or(1.0), m.omega_cav.unwrap_or(0.5), 0.0, gamma);
    model.n_qubits = n_qubits;
    model.omega_b = m.omega_b;
    model.g = g_values.first().copied().unwrap_or_default();
    model.kappa1 = m.kappa1.unwrap_or(1.0);
    model.kappa2 = m.kappa2.unwrap_or(if n_qubits == 2 { 1.0 } else { 0.0 });
    model.detector_amplitude = m.detector_amplitude;
    let initial_state = match m.initial_state {
        Some(s) => state_from_raw(s)?,
        None if n_qubits == 2 => InitialState::BellPhiPlus,
        None => InitialState::Excited,
    };
    let grid = TimeGrid::new(required(raw.grid.t_max, "grid.t_max")?, required(raw.grid.dt, "grid.dt")?)
        .map_err(|e| Error::Config(format!("grid: {e}")))?;
    Ok(RunConfig {
        scenario: None,
        model,
        g_values,
        initial_state,
        compare_direct: m.compare_direct.unwrap_or(false),
        compare_oracle: m.compare_oracle.unwrap_or(true),
        grid,
        ensemble: EnsembleConfig {
            k: raw.ensemble.k.unwrap_or(10_000),
            seed: raw.ensemble.seed.unwrap_or(1),
        },
        outputs: raw.output.observables.unwrap_or_else(|| default_outputs(n_qubits)),
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
    })
}

fn from_preset(scenario: Scenario, raw: RawConfig, warnings: &mut Vec<String>) -> Result<RunConfig> {
    let mut c = scenario.preset();
    let preset_raw = to_raw(&c).model;
    let m = raw.model;
    macro_rules! owned_by_preset {
        ($($field:ident),*) => {$(
            if let Some(given) = &m.$field {
                if Some(given) != preset_raw.$field.as_ref() {
                    warnings.push(format!(
                        "model.{} = {:?} conflicts with scenario {scenario}; using {:?}",
                        stringify!($field),
                        given,
                        preset_raw.$field
                    ));
                }
            }
        )*};
    }
    owned_by_preset!(n_qubits, omega_s, omega_b, omega_cav, g, g_imag, gamma, kappa1, kappa2, detector_amplitude, initial_state);
    // Comparison switches and run settings are free to change.
    if let Some(b) = m.compare_direct {
        c.compare_direct = b;
    }
    if let Some(b) = m.compare_oracle {
        c.compare_oracle = b;
    }
    if raw.grid.t_max.is_some() || raw.grid.dt.is_some() {
        c.grid = TimeGrid::new(raw.grid.t_max.unwrap_or(c.grid.t_max()), raw.grid.dt.unwrap_or(c.grid.dt()))
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
    }
    if let Some(k) = raw.ensemble.k {
        c.ensemble.k = k;
    }
    if let Some(s) = raw.ensemble.seed {
        c.ensemble.seed = s;
    }
    if let Some(o) = raw.output.observables {
        c.outputs = o;
    }
    if let Some(d) = raw.output.dir {
        c.output_dir = d;
    }
    Ok(c)
}

fn to_raw(c: &RunConfig) -> RawConfig {
    let g = if c.g_values.len() == 1 {
        RawCoupling::One(c.g_values[0].re)
    } else {
        RawCoupling::Sweep(c.g_values.iter().map(|z| z.re).collect())
    };
    RawConfig {
        scenario: c.scenario.map(|s| s.id().to_string()),
        model: RawModel {
            n_qubits: Some(c.model.n_qubits),
            omega_s: Some(c.model.omega_s),
            omega_b: c.model.omega_b,
            omega_cav: Some(c.model.omega_cav),
            g: Some(g),
            g_imag: Some(c.g_values[0].im),
            gamma: Some(c.model.gamma),
            kappa1: Some(c.model.kappa1),
            kappa2: Some(c.model.kappa2),
            detector_amplitude: c.model.detector_amplitude,
            initial_state: Some(state_to_raw(&c.initial_state)),
            compare_direct: Some(c.compare_direct),
            compare_oracle: Some(c.compare_oracle),
        },
        grid: RawGrid {
            t_max: Some(c.grid.t_max()),
            dt: Some(c.grid.dt()),
        },
        ensemble: RawEnsemble {
            k: Some(c.ensemble.k),
            seed: Some(c.ensemble.seed),
        },
        output: RawOutput {
            observables: Some(c.outputs.clone()),
            dir: Some(c.output_dir.clone()),
        },
    }
}

/// The fully resolved document; `parse_config(render_config(c)) == c`.
pub fn render_config(c: &RunConfig) -> String {
    toml::to_string(&to_raw(c)).expect("config renders")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "[model]\nn_qubits = 1\ng = 0.5\ngamma = 5.0\n[grid]\nt_max = 2.0\ndt = 0.01\n";

    #[test]
    fn scenario_expands_to_full_preset() {
        let c = parse_config("scenario = \"fig2b\"\n").unwrap();
        assert_eq!(c, Scenario::Fig2b.preset());
        assert_eq!(c.model.gamma, 5.0);
        assert_eq!(c.model.omega_s, 1.0);
        assert_eq!(c.model.omega_cav, 0.5);
        assert_eq!(c.g_values, vec![C64::from(0.3), C64::from(0.5)]);
        assert_eq!(c.initial_state, InitialState::Excited);
        assert!(c.compare_direct);
        let f3 = parse_config("scenario = \"fig3a\"").unwrap();
        assert_eq!((f3.model.kappa1, f3.model.kappa2, f3.model.gamma), (1.0, 1.0, 5.0));
        assert_eq!(f3.model.g, C64::from(0.5));
        assert_eq!(f3.initial_state, InitialState::BellPhiPlus);
        assert_eq!(parse_config("scenario = \"fig3b\"").unwrap().initial_state, InitialState::BothExcited);
        assert_eq!(parse_config("scenario = \"fig2a\"").unwrap().model.gamma, 0.5);
    }

    #[test]
    fn preset_conflicts_warn_and_lose() {
        let p = parse_config_with_warnings("scenario = \"fig2b\"\n[model]\ngamma = 7.0\n[ensemble]\nk = 500\n").unwrap();
        assert_eq!(p.config.model.gamma, 5.0);
        assert_eq!(p.config.ensemble.k, 500);
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("gamma"));
        let same = parse_config_with_warnings("scenario = \"fig2b\"\n[model]\ngamma = 5.0\n").unwrap();
        assert!(same.warnings.is_empty());
    }

    #[test]
    fn small_ensemble_is_rejected() {
        let err = parse_config(&format!("{MINIMAL}[ensemble]\nk = 1\n")).unwrap_err();
        assert!(err.to_string().contains("ensemble size below minimum"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn explicit_amplitudes() {
        let c = parse_config(&format!("{MINIMAL}")).unwrap();
        assert_eq!(c.initial_state, InitialState::Excited);
        let text = MINIMAL.replace("gamma = 5.0", "gamma = 5.0\ninitial_state = [0.6, 0.8]");
        let c = parse_config(&text).unwrap();
        assert!((c.psi0().unwrap().norm() - 1.0).abs() < 1e-15);
        let complex = MINIMAL.replace("gamma = 5.0", "gamma = 5.0\ninitial_state = [[0.6, 0.0], [0.0, 0.8]]");
        assert_eq!(parse_config(&complex).unwrap().psi0().unwrap()[1], C64::new(0.0, 0.8));
        let bad = MINIMAL.replace("gamma = 5.0", "gamma = 5.0\ninitial_state = [0.6, 0.7]");
        assert!(parse_config(&bad).unwrap_err().to_string().contains("norm"));
        let wrong = MINIMAL.replace("gamma = 5.0", "gamma = 5.0\ninitial_state = \"bell_phi_plus\"");
        assert!(parse_config(&wrong).is_err());
    }

    #[test]
    fn errors_name_the_field() {
        let unknown = parse_config(&format!("{MINIMAL}[output]\ncolour = 1\n")).unwrap_err().to_string();
        assert!(unknown.contains("colour") && unknown.contains("line"), "{unknown}");
        let missing = parse_config("[model]\nn_qubits = 1\ng = 0.5\n").unwrap_err().to_string();
        assert!(missing.contains("model.gamma"), "{missing}");
        let scen = parse_config("scenario = \"fig9\"").unwrap_err().to_string();
        assert!(scen.contains("fig9"));
        let grid = parse_config(&MINIMAL.replace("dt = 0.01", "dt = 0.3")).unwrap_err().to_string();
        assert!(grid.contains("grid"), "{grid}");
        let obs = parse_config(&format!("{MINIMAL}[output]\nobservables = [\"concurrence\"]\n")).unwrap_err().to_string();
        assert!(obs.contains("two qubits"), "{obs}");
    }

    #[test]
    fn presets_render_and_reparse() {
        for s in Scenario::ALL {
            let c = s.preset();
            let p = parse_config_with_warnings(&render_config(&c)).unwrap();
            assert_eq!(p.config, c);
            assert!(p.warnings.is_empty(), "{:?}", p.warnings);
        }
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            1usize..=2,
            (0.1f64..3.0, 0.0f64..2.0, proptest::collection::vec(0.01f64..1.0, 1..4), -0.5f64..0.5),
            (0.0f64..50.0, 0.0f64..2.0, 0.0f64..2.0, proptest::option::of(0.1f64..10.0), proptest::option::of(0.5f64..2.0)),
            (1usize..500, prop_oneof![Just(0.01), Just(0.05), Just(0.1)]),
            (100usize..100_000, 0..=i64::MAX as u64, any::<bool>(), any::<bool>()),
            0usize..4,
        )
            .prop_map(|(n, (ws, wc, gs, gi), (gamma, k1, k2, det, wb), (steps, dt), (k, seed, cd, co), st)| {
                let mut model = ModelParams::one_qubit(ws, wc, 0.0, gamma);
                model.n_qubits = n;
                model.kappa1 = k1;
                model.kappa2 = k2;
                model.detector_amplitude = det;
                model.omega_b = wb;
                let g_values: Vec<C64> = gs.iter().map(|&x| C64::new(x, gi)).collect();
                model.g = g_values[0];
                let initial_state = match (n, st) {
                    (1, 0) => InitialState::Excited,
                    (_, 1) => InitialState::Ground,
                    (2, 0) => InitialState::BellPhiPlus,
                    (2, 2) => InitialState::BothExcited,
                    (1, _) => InitialState::Amplitudes(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]),
                    _ => InitialState::Amplitudes(vec![C64::from(0.5); 4]),
                };
                RunConfig {
                    scenario: None,
                    model,
                    g_values,
                    initial_state,
                    compare_direct: cd,
                    compare_oracle: co,
                    grid: TimeGrid::new(steps as f64 * dt, dt).unwrap(),
                    ensemble: EnsembleConfig { k, seed },
                    outputs: default_outputs(n),
                    output_dir: PathBuf::from("some/dir"),
                }
            })
    }

    proptest! {
        #[test]
        fn render_parse_roundtrip(c in arb_config()) {
            let text = render_config(&c);
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
