//! Declarative run files (TOML, schema version 1).
//!
//! Unknown keys are rejected. Errors found while parsing carry the line and
//! column reported by the TOML reader; errors found while validating a
//! section point at the line where that section starts.

use std::path::Path;

use lmsz::model::{BasisState, DecayRates, FieldProtocol, FieldTarget, TabulatedField};
use lmsz::observables::ScenarioName;
use lmsz::{CouplingTensor, TwoQubitState, Window};
use num_complex::Complex64;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: Spanned<u32>,
    #[serde(default)]
    description: Option<String>,
    coupling: Spanned<RawCoupling>,
    field: Spanned<RawField>,
    initial_state: Spanned<RawInitialState>,
    window: Spanned<RawWindow>,
    #[serde(default)]
    engine: EngineChoice,
    #[serde(default = "default_outputs")]
    outputs: Vec<OutputKind>,
    #[serde(default)]
    tolerance: Option<Spanned<f64>>,
    #[serde(default)]
    decay: Option<Spanned<RawDecay>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    gamma_x: Option<f64>,
    gamma_y: Option<f64>,
    gamma_plus: Option<f64>,
    gamma_minus: Option<f64>,
    beta_plus: Option<f64>,
    beta_minus: Option<f64>,
    #[serde(default)]
    gamma_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Spin1,
    Spin2,
    BothHomogeneous,
}

impl Geometry {
    fn target(self) -> FieldTarget {
        match self {
            Geometry::Spin1 => FieldTarget::Spin1,
            Geometry::Spin2 => FieldTarget::Spin2,
            Geometry::BothHomogeneous => FieldTarget::BothHomogeneous,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawField {
    Ramp {
        alpha: f64,
        #[serde(default = "default_geometry")]
        applied_to: Geometry,
    },
    Constant {
        omega1: f64,
        #[serde(default)]
        omega2: f64,
    },
    Oscillating {
        amplitude: f64,
        frequency: f64,
    },
    NoisyRamp {
        alpha: f64,
        #[serde(default = "default_geometry")]
        applied_to: Geometry,
        noise_strength: f64,
        #[serde(default)]
        seed: u64,
        realizations: usize,
        #[serde(default)]
        tau_step: Option<f64>,
    },
    Tabulated {
        times: Vec<f64>,
        omega1: Vec<f64>,
        omega2: Vec<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitialState {
    preset: Option<String>,
    amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    tau_i: f64,
    tau_f: f64,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecay {
    xi_1: f64,
    xi_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    #[default]
    Numeric,
    Exact,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Populations,
    Concurrence,
    Amplitudes,
    Norm,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Populations, OutputKind::Concurrence, OutputKind::Norm]
}

fn default_geometry() -> Geometry {
    Geometry::Spin1
}

/// Noise settings of a `noisy_ramp` field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSettings {
    pub alpha: f64,
    pub applied_to: FieldTarget,
    pub strength: f64,
    pub seed: u64,
    pub realizations: usize,
    pub tau_step: Option<f64>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub description: Option<String>,
    pub coupling: CouplingTensor,
    pub fields: FieldProtocol,
    pub noise: Option<NoiseSettings>,
    pub initial: TwoQubitState,
    pub initial_label: String,
    pub window: Window,
    pub window_spec: (f64, f64, usize),
    pub engine: EngineChoice,
    pub outputs: Vec<OutputKind>,
    pub tolerance: Option<f64>,
    pub decay: Option<DecayRates>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn at<T>(text: &str, span: &Spanned<T>, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("line {}: {msg}", line_of(text, span.span().start)))
}

pub fn build_window(tau_i: f64, tau_f: f64, points: usize) -> lmsz::Result<Window> {
    Window::uniform(tau_i, tau_f, points)
}

/// Parse `"tau_i:tau_f:points"`.
pub fn parse_window_flag(s: &str) -> CliResult<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::input(format!("--window expects tau_i:tau_f:points, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let tau_i: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let tau_f: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
    build_window(tau_i, tau_f, points)?;
    Ok((tau_i, tau_f, points))
}

fn preset_state(label: &str) -> Option<TwoQubitState> {
    let basis = match label {
        "pp" => Some(BasisState::PlusPlus),
        "pm" => Some(BasisState::PlusMinus),
        "mp" => Some(BasisState::MinusPlus),
        "mm" => Some(BasisState::MinusMinus),
        _ => None,
    };
    if let Some(b) = basis {
        return Some(TwoQubitState::basis(b));
    }
    ScenarioName::parse(label).ok().map(|n| n.initial_state())
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| format!("line {}: ", line_of(text, s.start)))
                .unwrap_or_default();
            CliError::input(format!("{line}{}", e.message()))
        })?;

        if *raw.version.get_ref() != SCHEMA_VERSION {
            return Err(at(
                text,
                &raw.version,
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    raw.version.get_ref()
                ),
            ));
        }

        let (fields, noise) = convert_field(raw.field.get_ref()).map_err(|m| at(text, &raw.field, m))?;
        let alpha = match (&fields, &noise) {
            (_, Some(n)) => Some(n.alpha),
            (FieldProtocol::Ramp { alpha, .. }, None) => Some(*alpha),
            _ => None,
        };
        let coupling =
            convert_coupling(raw.coupling.get_ref(), alpha).map_err(|m| at(text, &raw.coupling, m))?;
        let (initial, initial_label) =
            convert_initial(raw.initial_state.get_ref()).map_err(|m| at(text, &raw.initial_state, m))?;
        let w = raw.window.get_ref();
        let window =
            build_window(w.tau_i, w.tau_f, w.points).map_err(|e| at(text, &raw.window, e))?;
        let tolerance = match &raw.tolerance {
            Some(t) if !(1e-14..=1e-4).contains(t.get_ref()) => {
                return Err(at(text, t, format!("tolerance must lie in [1e-14, 1e-4], got {}", t.get_ref())))
            }
            Some(t) => Some(*t.get_ref()),
            None => None,
        };
        let decay = match &raw.decay {
            Some(d) => Some(
                DecayRates::new(d.get_ref().xi_1, d.get_ref().xi_2).map_err(|e| at(text, d, e))?,
            ),
            None => None,
        };
        Ok(Scenario {
            description: raw.description,
            coupling,
            fields,
            noise,
            initial,
            initial_label,
            window,
            window_spec: (w.tau_i, w.tau_f, w.points),
            engine: raw.engine,
            outputs: raw.outputs,
            tolerance,
            decay,
        })
    }

    pub fn set_window(&mut self, spec: (f64, f64, usize)) -> CliResult<()> {
        self.window = build_window(spec.0, spec.1, spec.2)?;
        self.window_spec = spec;
        Ok(())
    }
}

fn convert_field(raw: &RawField) -> Result<(FieldProtocol, Option<NoiseSettings>), String> {
    let s = |e: lmsz::Error| e.to_string();
    Ok(match raw {
        RawField::Ramp { alpha, applied_to } => {
            (FieldProtocol::ramp(*alpha, applied_to.target()).map_err(s)?, None)
        }
        RawField::Constant { omega1, omega2 } => {
            let p = FieldProtocol::Constant {
                omega1: *omega1,
                omega2: *omega2,
            };
            p.validate().map_err(s)?;
            (p, None)
        }
        RawField::Oscillating {
            amplitude,
            frequency,
        } => {
            let p = FieldProtocol::Oscillating {
                amplitude: *amplitude,
                frequency: *frequency,
            };
            p.validate().map_err(s)?;
            (p, None)
        }
        RawField::NoisyRamp {
            alpha,
            applied_to,
            noise_strength,
            seed,
            realizations,
            tau_step,
        } => {
            let p = FieldProtocol::NoisyRamp {
                alpha: *alpha,
                noise_strength: *noise_strength,
                seed: *seed,
                applied_to: applied_to.target(),
            };
            p.validate().map_err(s)?;
            if *realizations == 0 {
                return Err("realizations must be at least 1".into());
            }
            let noise = NoiseSettings {
                alpha: *alpha,
                applied_to: applied_to.target(),
                strength: *noise_strength,
                seed: *seed,
                realizations: *realizations,
                tau_step: *tau_step,
            };
            (p, Some(noise))
        }
        RawField::Tabulated {
            times,
            omega1,
            omega2,
        } => (
            FieldProtocol::Tabulated(
                TabulatedField::new(times.clone(), omega1.clone(), omega2.clone()).map_err(s)?,
            ),
            None,
        ),
    })
}

fn convert_coupling(raw: &RawCoupling, alpha: Option<f64>) -> Result<CouplingTensor, String> {
    let s = |e: lmsz::Error| e.to_string();
    let xy = (raw.gamma_x, raw.gamma_y);
    let pm = (raw.gamma_plus, raw.gamma_minus);
    let beta = (raw.beta_plus, raw.beta_minus);
    let given = |p: (Option<f64>, Option<f64>)| p.0.is_some() || p.1.is_some();
    let forms = [given(xy), given(pm), given(beta)].iter().filter(|&&g| g).count();
    if forms != 1 {
        return Err(
            "give exactly one of (gamma_x, gamma_y), (gamma_plus, gamma_minus) or (beta_plus, beta_minus)"
                .into(),
        );
    }
    let both = |p: (Option<f64>, Option<f64>), names: &str| match p {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(format!("{names} must be given together")),
    };
    if given(xy) {
        let (x, y) = both(xy, "gamma_x and gamma_y")?;
        CouplingTensor::new(x, y, raw.gamma_z).map_err(s)
    } else if given(pm) {
        let (p, m) = both(pm, "gamma_plus and gamma_minus")?;
        CouplingTensor::from_block_couplings(p, m, raw.gamma_z).map_err(s)
    } else {
        let (bp, bm) = both(beta, "beta_plus and beta_minus")?;
        let alpha = alpha.ok_or("beta_plus/beta_minus need a ramp field to fix alpha")?;
        if !(bp >= 0.0 && bm >= 0.0 && bp.is_finite() && bm.is_finite()) {
            return Err(format!("beta values must be finite and non-negative, got ({bp}, {bm})"));
        }
        CouplingTensor::from_block_couplings((bp * alpha).sqrt(), (bm * alpha).sqrt(), raw.gamma_z)
            .map_err(s)
    }
}

fn convert_initial(raw: &RawInitialState) -> Result<(TwoQubitState, String), String> {
    match (&raw.preset, &raw.amplitudes) {
        (Some(p), None) => preset_state(p).map(|s| (s, p.clone())).ok_or_else(|| {
            format!(
                "unknown preset '{p}'; use pp, pm, mp, mm, collective_mm, collective_mp, nonlocal_control_A or nonlocal_control_B"
            )
        }),
        (None, Some(a)) => {
            if a.len() != 4 {
                return Err(format!("amplitudes needs 4 [re, im] pairs, got {}", a.len()));
            }
            let amps = [0, 1, 2, 3].map(|k| Complex64::new(a[k][0], a[k][1]));
            let state = TwoQubitState::new(amps).map_err(|e| e.to_string())?;
            let norm = state.norm_sqr();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(format!("amplitudes must be normalised, |psi|^2 = {norm}"));
            }
            Ok((state, "explicit".into()))
        }
        _ => Err("initial_state needs exactly one of preset or amplitudes".into()),
    }
}
