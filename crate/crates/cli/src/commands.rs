//! Subcommand implementations. Each returns the table to write and, when a
//! requested check failed, the error that sets the exit status.

use std::f64::consts::PI;
use std::path::Path;

use lmsz::estimation::{invert_probabilities, Counts, ProbabilityMeasurement, SIGN_AMBIGUITY_NOTE};
use lmsz::model::{block_decompose, FieldProtocol, FieldTarget, Sector};
use lmsz::observables::{asymptotic_concurrence, concurrence};
use lmsz::openquantum::{run_noisy_lmsz, FieldGeometry, NoiseSpec, DEFAULT_TAU_STEP};
use lmsz::propagation::{
    direct_propagate_4x4, propagate_block, propagate_two_qubit,
    tail_average, BlockPropagator, DEFAULT_TOLERANCE,
};
use lmsz::specfun::{exact_amplitudes, exact_two_qubit};
use lmsz::{CouplingTensor, StateTrajectory, TwoQubitState, Window};
use serde::Deserialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::scenario::{build_window, EngineChoice, OutputKind, Scenario};
use crate::table::Table;

/// Flags shared by all subcommands; they take precedence over file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub window: Option<(f64, f64, usize)>,
    pub seed: Option<u64>,
    pub verify: bool,
}

pub struct Outcome {
    pub table: Table,
    /// Set when the run completed but a requested check failed.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self {
            table,
            failure: None,
        }
    }
}

/// Agreement required between block and direct propagation under `--verify`.
pub const DIRECT_AGREEMENT: f64 = 1e-8;
/// Agreement required between numeric and closed-form sweep columns.
pub const SWEEP_AGREEMENT: f64 = 5e-3;

const LABELS: [&str; 4] = ["pp", "pm", "mp", "mm"];

fn check_tolerance(t: f64) -> CliResult<f64> {
    if (1e-14..=1e-4).contains(&t) {
        Ok(t)
    } else {
        Err(CliError::input(format!("tolerance must lie in [1e-14, 1e-4], got {t}")))
    }
}

fn resolve_tolerance(flag: Option<f64>, file: Option<f64>) -> CliResult<f64> {
    check_tolerance(flag.or(file).unwrap_or(DEFAULT_TOLERANCE))
}

fn load(path: &Path, o: &Overrides) -> CliResult<(Scenario, f64)> {
    let mut s = Scenario::load(path)?;
    if let Some(w) = o.window {
        s.set_window(w)?;
    }
    let tol = resolve_tolerance(o.tolerance, s.tolerance)?;
    Ok((s, tol))
}

fn window_meta(t: &mut Table, s: &Scenario, tol: f64) {
    let (a, b, n) = s.window_spec;
    t.meta_num("tau_i", a);
    t.meta_num("tau_f", b);
    t.meta("points", json!(n));
    t.meta_num("tolerance", tol);
    t.meta("initial_state", json!(s.initial_label));
    if let Some(d) = &s.description {
        t.meta("description", json!(d));
    }
}

fn push_state_columns(t: &mut Table, traj: &StateTrajectory, outputs: &[OutputKind], suffix: &str) -> CliResult<Vec<f64>> {
    let mut conc = Vec::new();
    for kind in outputs {
        match kind {
            OutputKind::Populations => {
                for (k, l) in LABELS.iter().enumerate() {
                    t.num(format!("p_{l}{suffix}"), traj.states.iter().map(|s| s.populations()[k]).collect());
                }
            }
            OutputKind::Concurrence => {
                conc = traj
                    .states
                    .iter()
                    .map(concurrence)
                    .collect::<lmsz::Result<Vec<_>>>()?;
                t.num(format!("concurrence{suffix}"), conc.clone());
            }
            OutputKind::Amplitudes => {
                for (k, l) in LABELS.iter().enumerate() {
                    t.num(format!("re_{l}{suffix}"), traj.states.iter().map(|s| s.amplitudes()[k].re).collect());
                    t.num(format!("im_{l}{suffix}"), traj.states.iter().map(|s| s.amplitudes()[k].im).collect());
                }
            }
            OutputKind::Norm => {
                t.num(format!("norm{suffix}"), traj.states.iter().map(|s| s.norm_sqr()).collect());
            }
        }
    }
    Ok(conc)
}

fn reject_open_system(s: &Scenario, command: &str) -> CliResult<()> {
    if s.noise.is_some() {
        return Err(CliError::input(format!(
            "{command}: noisy_ramp fields are run with the noise-mc subcommand"
        )));
    }
    if s.decay.is_some() && command != "decay" {
        return Err(CliError::input(format!(
            "{command}: scenarios with a [decay] section are run with the decay subcommand"
        )));
    }
    Ok(())
}

pub fn propagate(path: &Path, o: &Overrides) -> CliResult<Outcome> {
    let (s, tol) = load(path, o)?;
    reject_open_system(&s, "propagate")?;
    let numeric = || propagate_two_qubit(&s.coupling, &s.fields, &s.initial, &s.window, tol, None);
    let exact = || exact_two_qubit(&s.coupling, &s.fields, &s.initial, &s.window);
    let runs: Vec<(StateTrajectory, &str)> = match s.engine {
        EngineChoice::Numeric => vec![(numeric()?, "")],
        EngineChoice::Exact => vec![(exact()?, "")],
        EngineChoice::Both => vec![(numeric()?, "_numeric"), (exact()?, "_exact")],
    };

    // an empty output list gives a header-only table
    let rows = if s.outputs.is_empty() { 0 } else { s.window.grid().len() };
    let mut t = Table::new("propagate", rows);
    t.meta(
        "engine",
        json!(match s.engine {
            EngineChoice::Numeric => "numeric",
            EngineChoice::Exact => "exact",
            EngineChoice::Both => "both",
        }),
    );
    window_meta(&mut t, &s, tol);
    let taus = if rows == 0 { Vec::new() } else { s.window.grid().to_vec() };
    t.num("tau", taus);
    let mut curves = Vec::new();
    if rows > 0 {
        for (traj, suffix) in &runs {
            let c = push_state_columns(&mut t, traj, &s.outputs, suffix)?;
            if !c.is_empty() {
                t.meta_num(
                    &format!("concurrence_tail_average{suffix}"),
                    tail_average(&traj.taus, &c, s.window.tail_start()),
                );
            }
            curves.push(c);
        }
    }
    if curves.len() == 2 && !curves[0].is_empty() {
        let d = curves[0]
            .iter()
            .zip(&curves[1])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        t.meta_num("max_concurrence_difference", d);
    }

    let mut failure = None;
    if o.verify {
        let reference = &runs[0].0;
        let direct = direct_propagate_4x4(&s.coupling, &s.fields, &s.initial, &s.window, tol)?;
        let dev = max_state_deviation(reference, &direct);
        t.meta_num("direct_max_deviation", dev);
        if dev > DIRECT_AGREEMENT {
            failure = Some(CliError::numerical(format!(
                "block and direct propagation differ by {dev:.3e} (limit {DIRECT_AGREEMENT:e})"
            )));
        }
    }
    Ok(Outcome { table: t, failure })
}

fn max_state_deviation(a: &StateTrajectory, b: &StateTrajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| {
            let (x, y) = (x.amplitudes(), y.amplitudes());
            (0..4).map(move |k| (x[k] - y[k]).norm())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SectorArg {
    Plus,
    Minus,
}

impl SectorArg {
    fn sector(self) -> Sector {
        match self {
            SectorArg::Plus => Sector::Plus,
            SectorArg::Minus => Sector::Minus,
        }
    }
}

pub fn sweep_beta(min: f64, max: f64, steps: usize, sector: SectorArg, o: &Overrides) -> CliResult<Outcome> {
    if !(min.is_finite() && max.is_finite() && 0.0 <= min && min < max) {
        return Err(CliError::input(format!("sweep range needs 0 <= min < max, got [{min}, {max}]")));
    }
    if steps < 2 {
        return Err(CliError::input(format!("steps must be at least 2, got {steps}")));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|k| if k + 1 == steps { max } else { min + (max - min) * k as f64 / (steps - 1) as f64 })
        .collect();
    let mut t = Table::new("sweep-beta", steps);
    t.meta("sector", json!(match sector { SectorArg::Plus => "plus", SectorArg::Minus => "minus" }));
    let p: Vec<f64> = betas.iter().map(|b| -(-2.0 * PI * b).exp_m1()).collect();
    let c = betas
        .iter()
        .map(|&b| asymptotic_concurrence(b, sector.sector()))
        .collect::<lmsz::Result<Vec<_>>>()?;

    let mut failure = None;
    let mut numeric = None;
    if o.verify {
        let (tau_i, tau_f, points) = o.window.unwrap_or((-100.0, 100.0, 2));
        let window = build_window(tau_i, tau_f, points)?;
        let tol = resolve_tolerance(o.tolerance, None)?;
        let fields = FieldProtocol::ramp(1.0, FieldTarget::Spin1)?;
        let mut pn = Vec::with_capacity(steps);
        let mut cn = Vec::with_capacity(steps);
        for &b in &betas {
            let coupling = match sector {
                SectorArg::Plus => CouplingTensor::from_block_couplings(b.sqrt(), 0.0, 0.0)?,
                SectorArg::Minus => CouplingTensor::from_block_couplings(0.0, b.sqrt(), 0.0)?,
            };
            let (plus, minus) = block_decompose(&coupling, &fields);
            let block = if sector == SectorArg::Plus { plus } else { minus };
            let traj = propagate_block(&block, &window, tol, None)?;
            let last = traj.last().expect("window has points");
            let q = adiabatic_transition(last, b.sqrt(), window.tau_i(), last.tau);
            pn.push(q);
            cn.push(2.0 * (q * (1.0 - q)).max(0.0).sqrt());
        }
        let dev = p
            .iter()
            .zip(&pn)
            .chain(c.iter().zip(&cn))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        t.meta_num("verify_max_deviation", dev);
        t.meta_num("verify_tau_i", tau_i);
        t.meta_num("verify_tau_f", tau_f);
        if dev > SWEEP_AGREEMENT {
            failure = Some(CliError::numerical(format!(
                "numeric sweep deviates from the closed form by {dev:.3e} (limit {SWEEP_AGREEMENT:e})"
            )));
        }
        numeric = Some((pn, cn));
    }
    t.num("beta", betas);
    t.num("p", p);
    t.num("concurrence", c);
    if let Some((pn, cn)) = numeric {
        t.num("p_numeric", pn);
        t.num("concurrence_numeric", cn);
    }
    Ok(Outcome { table: t, failure })
}

/// Transition probability between the near-diabatic adiabatic states of
/// `H = (τ/2)σᶻ + γσˣ` at both window ends.
///
/// In the diabatic basis a finite window keeps an `O(γ/τ)` admixture that
/// dominates `1 − P` at large β; in the adiabatic frame the residue is
/// `O(γ/τ³)`.
fn adiabatic_transition(u: &BlockPropagator, gamma: f64, tau_i: f64, tau_f: f64) -> f64 {
    let half_angle = |tau: f64| 0.5 * (2.0 * gamma / tau).atan();
    let (si, ci) = half_angle(tau_i).sin_cos();
    let (sf, cf) = half_angle(tau_f).sin_cos();
    // ⟨χ₀(τ_f)| U |χ₁(τ_i)⟩ with χ₀ = (c, s), χ₁ = (−s, c)
    let m = u.matrix();
    let col = [m[(0, 0)] * -si + m[(0, 1)] * ci, m[(1, 0)] * -si + m[(1, 1)] * ci];
    (col[0] * cf + col[1] * sf).norm_sqr()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    #[serde(default)]
    id: Option<String>,
    p_plus: f64,
    p_minus: f64,
    alpha: f64,
    #[serde(default)]
    plus_successes: Option<u64>,
    #[serde(default)]
    plus_trials: Option<u64>,
    #[serde(default)]
    minus_successes: Option<u64>,
    #[serde(default)]
    minus_trials: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RecordFile {
    List(Vec<Record>),
    Wrapped { records: Vec<Record> },
}

fn read_records(path: &Path) -> CliResult<Vec<Record>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let f: RecordFile = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(match f {
            RecordFile::List(v) => v,
            RecordFile::Wrapped { records } => records,
        })
    } else {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        r.deserialize()
            .map(|rec| rec.map_err(|e| CliError::input(format!("{}: {e}", path.display()))))
            .collect()
    }
}

fn counts(s: Option<u64>, n: Option<u64>, which: &str) -> Result<Option<Counts>, String> {
    match (s, n) {
        (Some(successes), Some(trials)) => Ok(Some(Counts { successes, trials })),
        (None, None) => Ok(None),
        _ => Err(format!("{which}_successes and {which}_trials must be given together")),
    }
}

pub fn estimate(path: &Path) -> CliResult<Outcome> {
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(CliError::input(format!("{}: no measurement records", path.display())));
    }
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    for (k, r) in records.iter().enumerate() {
        let id = r.id.clone().unwrap_or_else(|| (k + 1).to_string());
        let result = (|| -> Result<_, String> {
            let mut m = ProbabilityMeasurement::new(r.p_plus, r.p_minus, r.alpha);
            match (counts(r.plus_successes, r.plus_trials, "plus")?, counts(r.minus_successes, r.minus_trials, "minus")?) {
                (Some(cp), Some(cm)) => m = m.with_counts(cp, cm),
                (None, None) => {}
                _ => return Err("counts must be given for both sectors or for neither".into()),
            }
            invert_probabilities(&m).map_err(|e| e.to_string())
        })();
        match result {
            Ok(e) => rows.push((id, e)),
            Err(msg) => errors.push(format!("record {id}: {msg}")),
        }
    }
    if !errors.is_empty() {
        return Err(CliError::input(errors.join("\n")));
    }
    let mut t = Table::new("estimate", rows.len());
    t.meta("note", json!(SIGN_AMBIGUITY_NOTE));
    t.text("id", rows.iter().map(|r| r.0.clone()).collect());
    t.num("gamma_x", rows.iter().map(|r| r.1.gamma_x).collect());
    t.num("gamma_y", rows.iter().map(|r| r.1.gamma_y).collect());
    t.num("gamma_plus", rows.iter().map(|r| r.1.gamma_plus).collect());
    t.num("gamma_minus", rows.iter().map(|r| r.1.gamma_minus).collect());
    t.num("sigma_gamma_x", rows.iter().map(|r| r.1.sigma.map_or(f64::NAN, |s| s.0)).collect());
    t.num("sigma_gamma_y", rows.iter().map(|r| r.1.sigma.map_or(f64::NAN, |s| s.1)).collect());
    Ok(Outcome::ok(t))
}

pub fn noise_mc(path: &Path, realizations: Option<usize>, o: &Overrides) -> CliResult<Outcome> {
    let (s, _) = load(path, o)?;
    let n = s.noise.ok_or_else(|| {
        CliError::input(format!("{}: noise-mc needs a field of kind noisy_ramp", path.display()))
    })?;
    let geometry = FieldGeometry::from_target(n.applied_to)?;
    let seed = o.seed.unwrap_or(n.seed);
    let count = realizations.unwrap_or(n.realizations);
    let spec = NoiseSpec::new(n.strength, count, seed)?.with_step(n.tau_step.unwrap_or(DEFAULT_TAU_STEP))?;
    let r = run_noisy_lmsz(&s.coupling, n.alpha, &spec, &s.initial, &s.window, geometry)?;

    let mut t = Table::new("noise-mc", 4);
    t.meta_num("alpha", n.alpha);
    t.meta_num("noise_strength", n.strength);
    t.meta("geometry", json!(match geometry {
        FieldGeometry::Spin1Only => "spin1",
        FieldGeometry::BothHomogeneous => "both_homogeneous",
    }));
    t.meta("base_seed", json!(r.base_seed));
    t.meta("n_realizations", json!(r.n_realizations));
    t.meta_num("tau_step", r.tau_step);
    t.meta_num("tau_i", s.window.tau_i());
    t.meta_num("tau_f", s.window.tau_f());
    t.meta("initial_state", json!(s.initial_label));
    let (pm, pse) = r.sector_population(Sector::Plus);
    let (mm, mse) = r.sector_population(Sector::Minus);
    t.meta("sector_population", json!({
        "plus": [crate::table::json_num(pm), crate::table::json_num(pse)],
        "minus": [crate::table::json_num(mm), crate::table::json_num(mse)],
    }));
    t.text("state", LABELS.iter().map(|l| l.to_string()).collect());
    t.num("mean_population", r.mean_populations.to_vec());
    t.num("standard_error", r.standard_error.to_vec());
    t.text("base_seed", vec![r.base_seed.to_string(); 4]);
    t.text("n_realizations", vec![r.n_realizations.to_string(); 4]);
    Ok(Outcome::ok(t))
}

pub fn decay(path: &Path, o: &Overrides) -> CliResult<Outcome> {
    let (s, tol) = load(path, o)?;
    reject_open_system(&s, "decay")?;
    let rates = s.decay.ok_or_else(|| {
        CliError::input(format!("{}: decay needs a [decay] section with xi_1 and xi_2", path.display()))
    })?;
    let traj = propagate_two_qubit(&s.coupling, &s.fields, &s.initial, &s.window, tol, Some(&rates))?;
    let mut t = Table::new("decay", traj.len());
    window_meta(&mut t, &s, tol);
    t.meta_num("xi_1", rates.xi_1());
    t.meta_num("xi_2", rates.xi_2());
    t.num("tau", traj.taus.clone());
    for (k, l) in LABELS.iter().enumerate() {
        t.num(format!("p_{l}"), traj.states.iter().map(|s| s.populations()[k]).collect());
    }
    t.num("norm", traj.states.iter().map(TwoQubitState::norm_sqr).collect());
    Ok(Outcome::ok(t))
}

/// Closed form against integration, either on a scenario or on the built-in
/// grid of `β` and `τ` values.
pub fn exact_check(path: Option<&Path>, threshold: f64, o: &Overrides) -> CliResult<Outcome> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(CliError::input(format!("threshold must be positive, got {threshold}")));
    }
    let (t, worst) = match path {
        Some(p) => {
            let (s, tol) = load(p, o)?;
            reject_open_system(&s, "exact-check")?;
            let numeric = propagate_two_qubit(&s.coupling, &s.fields, &s.initial, &s.window, tol, None)?;
            let exact = exact_two_qubit(&s.coupling, &s.fields, &s.initial, &s.window)?;
            let mut t = Table::new("exact-check", numeric.len());
            window_meta(&mut t, &s, tol);
            let diffs: Vec<f64> = numeric
                .states
                .iter()
                .zip(&exact.states)
                .map(|(a, b)| {
                    let (a, b) = (a.amplitudes(), b.amplitudes());
                    (0..4).map(|k| (a[k] - b[k]).norm()).fold(0.0, f64::max)
                })
                .collect();
            let defects: Vec<f64> = exact.states.iter().map(|s| (s.norm_sqr() - 1.0).abs()).collect();
            let worst = diffs.iter().cloned().fold(0.0, f64::max);
            t.num("tau", numeric.taus.clone());
            t.num("max_amplitude_difference", diffs);
            t.num("unitarity_defect", defects);
            (t, worst)
        }
        None => {
            let betas: [f64; 5] = [0.05, 0.11, 0.5, 1.0, 2.0];
            let taus = [-50.0, -10.0, 0.0, 10.0, 50.0];
            let tau_i = -100.0;
            let tol = resolve_tolerance(o.tolerance, None)?;
            let window = Window::new(tau_i, 50.0, taus.to_vec())?;
            let fields = FieldProtocol::ramp(1.0, FieldTarget::Spin1)?;
            let mut cols: [Vec<f64>; 5] = Default::default();
            for b in betas {
                let coupling = CouplingTensor::from_block_couplings(b.sqrt(), 0.0, 0.0)?;
                let traj = propagate_block(&block_decompose(&coupling, &fields).0, &window, tol, None)?;
                for (tau, u) in taus.iter().zip(&traj) {
                    let (a, bb) = exact_amplitudes(b, *tau, tau_i)?;
                    cols[0].push(b);
                    cols[1].push(*tau);
                    cols[2].push((a - u.a()).norm());
                    cols[3].push((bb - u.b()).norm());
                    cols[4].push((a.norm_sqr() + bb.norm_sqr() - 1.0).abs());
                }
            }
            let worst = cols[2].iter().chain(&cols[3]).cloned().fold(0.0, f64::max);
            let mut t = Table::new("exact-check", cols[0].len());
            t.meta_num("tau_i", tau_i);
            t.meta_num("tolerance", tol);
            let [beta, tau, da, db, du] = cols;
            t.num("beta", beta);
            t.num("tau", tau);
            t.num("abs_diff_a", da);
            t.num("abs_diff_b", db);
            t.num("unitarity_defect", du);
            (t, worst)
        }
    };
    let mut t = t;
    t.meta_num("max_difference", worst);
    t.meta_num("threshold", threshold);
    let failure = (worst > threshold).then(|| {
        CliError::numerical(format!("closed form and integration differ by {worst:.3e} (threshold {threshold:e})"))
    });
    Ok(Outcome { table: t, failure })
}
