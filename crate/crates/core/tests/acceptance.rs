//! Acceptance suite. Every check prints one PASS/FAIL line and then asserts.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{c, rel_err, verdict, weber_ray};
use lmsz::model::{
    assemble_propagator, block_decompose, BasisState, DecayRates, FieldProtocol, FieldTarget,
    Sector,
};
use lmsz::observables::{concurrence_trajectory, scenario_asymptotics, Engine, ScenarioName, ScenarioSpec};
use lmsz::openquantum::{run_noisy_lmsz, FieldGeometry, NoiseSpec};
use lmsz::propagation::{
    direct_propagate_4x4, direct_propagate_4x4_with_decay, propagate_block,
    tail_transition_probability, DEFAULT_TOLERANCE,
};
use lmsz::specfun::{exact_amplitudes, pcf_d};
use lmsz::estimation::{invert_probabilities, ProbabilityMeasurement};
use lmsz::{CouplingTensor, TwoQubitState, Window};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BETAS: [f64; 5] = [0.05, 0.11, 0.5, 1.0, 2.0];

fn plus_ramp_block(beta: f64, alpha: f64) -> lmsz::EffectiveBlock {
    let coupling = CouplingTensor::from_block_couplings((beta * alpha).sqrt(), 0.0, 0.0).unwrap();
    block_decompose(&coupling, &FieldProtocol::ramp(alpha, FieldTarget::Spin1).unwrap()).0
}

#[test]
fn lmsz_probability_reproduction() {
    let window = Window::symmetric(100.0, 0.05).unwrap();
    let mut all = true;
    for beta in BETAS {
        let start = Instant::now();
        let traj = propagate_block(&plus_ramp_block(beta, 1.0), &window, DEFAULT_TOLERANCE, None).unwrap();
        let p = tail_transition_probability(&traj, &window);
        let elapsed = start.elapsed();
        let expected = 1.0 - (-2.0 * PI * beta).exp();
        let err = (p - expected).abs();
        let ok = err <= 5e-3 && elapsed < Duration::from_secs(1);
        all &= ok;
        verdict(
            &format!("lmsz probability beta={beta}"),
            ok,
            &format!("P = {p:.6}, closed form {expected:.6}, |diff| = {err:.2e} (tol 5e-3), {elapsed:.2?} (limit 1 s)"),
        );
    }
    assert!(all);
}

#[test]
fn entanglement_optimum() {
    let window = Window::symmetric(100.0, 0.05).unwrap();
    let tail = |beta: f64| {
        let coupling =
            CouplingTensor::from_block_couplings(beta.sqrt(), (2.0 * beta).sqrt(), 0.0).unwrap();
        let s = ScenarioSpec::new(ScenarioName::CollectiveMm, coupling, 1.0, window.clone()).unwrap();
        concurrence_trajectory(&s, Engine::Numeric).unwrap().asymptotic_value
    };
    let c_star = tail(2f64.ln() / (2.0 * PI));
    let c_two = tail(2.0);
    let c_half = tail(0.5);
    let checks = [
        ("concurrence beta=log2/2pi", (c_star - 1.0).abs() <= 0.02, format!("C = {c_star:.4}, target 1.00 +/- 0.02")),
        ("concurrence beta=2", c_two <= 0.1, format!("C = {c_two:.4}, limit 0.1")),
        ("concurrence beta=1/2", (c_half - 0.410).abs() <= 0.02, format!("C = {c_half:.4}, target 0.410 +/- 0.02")),
    ];
    for (name, ok, detail) in &checks {
        verdict(name, *ok, detail);
    }
    assert!(checks.iter().all(|c| c.1));
}

#[test]
fn exact_versus_numeric_oracle() {
    let taus = [-50.0, -10.0, 0.0, 10.0, 50.0];
    let tau_i = -100.0;
    let window = Window::new(tau_i, 50.0, taus.to_vec()).unwrap();
    let start = Instant::now();
    let (mut worst_amp, mut worst_unit) = (0.0f64, 0.0f64);
    for beta in BETAS {
        let numeric = propagate_block(&plus_ramp_block(beta, 1.0), &window, DEFAULT_TOLERANCE, None).unwrap();
        for (tau, n) in taus.iter().zip(&numeric) {
            let (a, b) = exact_amplitudes(beta, *tau, tau_i).unwrap();
            worst_amp = worst_amp.max((a - n.a()).norm()).max((b - n.b()).norm());
            worst_unit = worst_unit.max((a.norm_sqr() + b.norm_sqr() - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_amp <= 1e-6 && worst_unit <= 1e-8 && elapsed < Duration::from_secs(10);
    verdict(
        "exact vs numeric amplitudes",
        ok,
        &format!("max |diff| = {worst_amp:.2e} (tol 1e-6), max unitarity defect = {worst_unit:.2e} (tol 1e-8), {elapsed:.2?} (limit 10 s)"),
    );
    assert!(ok);
}

#[test]
fn isotropy_dichotomy() {
    let window = Window::symmetric(100.0, 0.05).unwrap();
    let fields = FieldProtocol::ramp(1.0, FieldTarget::Spin1).unwrap();
    let iso = CouplingTensor::new(0.4, 0.4, 0.3).unwrap();
    let traj = lmsz::propagation::propagate_two_qubit(
        &iso,
        &fields,
        &TwoQubitState::basis(BasisState::MinusMinus),
        &window,
        DEFAULT_TOLERANCE,
        None,
    )
    .unwrap();
    let frozen = traj
        .states
        .iter()
        .map(|s| s.populations()[BasisState::PlusPlus.index()])
        .fold(0.0, f64::max);
    let iso_ok = frozen <= 1e-10;
    verdict(
        "isotropic plus-sector freeze",
        iso_ok,
        &format!("max P(++) over the window = {frozen:.2e} (tol 1e-10)"),
    );

    let mut all = iso_ok;
    let couplings = [
        ("anisotropic", CouplingTensor::new(0.45, 0.15, 0.2).unwrap()),
        ("anisotropic", CouplingTensor::new(0.3, -0.1, 0.0).unwrap()),
        ("isotropic", CouplingTensor::new(0.25, 0.25, 0.1).unwrap()),
    ];
    for name in [ScenarioName::NonlocalControlA, ScenarioName::NonlocalControlB] {
        for (kind, coupling) in &couplings {
            let s = ScenarioSpec::new(name, *coupling, 1.0, window.clone()).unwrap();
            let r = scenario_asymptotics(&s).unwrap();
            let err = (r.measured_probability - r.predicted_probability).abs();
            let ok = err <= 5e-3;
            all &= ok;
            verdict(
                &format!("{} {kind} gx={} gy={}", name.label(), coupling.gamma_x(), coupling.gamma_y()),
                ok,
                &format!(
                    "joint probability {:.5} vs {:.5}, |diff| = {err:.2e} (tol 5e-3), family {}",
                    r.measured_probability,
                    r.predicted_probability,
                    r.family.label()
                ),
            );
        }
    }
    assert!(all);
}

#[test]
fn estimation_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let window = Window::symmetric(300.0, 0.05).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        // β± ≤ 0.36 and a sizeable γy; see the conditioning note in the README
        let alpha: f64 = rng.random_range(0.5..2.0);
        let g_plus = rng.random_range(0.1..0.2) * alpha.sqrt();
        let g_minus = rng.random_range(0.45..0.6) * alpha.sqrt();
        let (gamma_x, gamma_y) = if rng.random_bool(0.5) {
            ((g_minus + g_plus) / 2.0, (g_minus - g_plus) / 2.0)
        } else {
            // γ₊ > γ₋ with γy < 0
            ((g_minus + g_plus) / 2.0, (g_plus - g_minus) / 2.0)
        };
        let coupling = CouplingTensor::new(gamma_x, gamma_y, rng.random_range(-0.5..0.5)).unwrap();
        let fields = FieldProtocol::ramp(alpha, FieldTarget::Spin1).unwrap();
        let (plus, minus) = block_decompose(&coupling, &fields);
        let p = |b| {
            let t = propagate_block(b, &window, DEFAULT_TOLERANCE, None).unwrap();
            tail_transition_probability(&t, &window)
        };
        let est = invert_probabilities(&ProbabilityMeasurement::new(p(&plus), p(&minus), alpha)).unwrap();
        let err = |ex: f64, ey: f64| ((ex - gamma_x) / gamma_x).abs().max(((ey - gamma_y) / gamma_y).abs());
        let e = err(est.gamma_x, est.gamma_y).min(err(est.gamma_y, est.gamma_x));
        worst = worst.max(e);
    }
    let ok = worst <= 0.01;
    verdict(
        "estimation round trip (20 triples)",
        ok,
        &format!("worst relative coupling error {worst:.2e} (tol 1e-2)"),
    );
    assert!(ok);
}

#[test]
fn noise_saturation() {
    // 2G/α = 40 against an LMSZ transition time of order 1/√α
    let alpha: f64 = 1.0;
    let strength = 20.0;
    let coupling = CouplingTensor::from_block_couplings((0.5 * alpha).sqrt(), 0.3, 0.0).unwrap();
    let noise = NoiseSpec::new(strength, 10_000, 0x5a7).unwrap().with_step(0.01).unwrap();
    let window = Window::uniform(-400.0, 400.0, 2).unwrap();
    let start = Instant::now();
    let r = run_noisy_lmsz(
        &coupling,
        alpha,
        &noise,
        &TwoQubitState::basis(BasisState::MinusMinus),
        &window,
        FieldGeometry::BothHomogeneous,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let idx = BasisState::PlusPlus.index();
    let (p, se) = (r.mean_populations[idx], r.standard_error[idx]);
    let target = (1.0 - (-PI).exp()) / 2.0;
    let (minus, minus_se) = r.sector_population(Sector::Minus);
    let plus_ok = (p - target).abs() <= 3.0 * se;
    let minus_ok = minus <= 3.0 * minus_se;
    let time_ok = elapsed < Duration::from_secs(300);
    verdict(
        "noise saturation plus sector",
        plus_ok,
        &format!(
            "mean P+ = {p:.5} +/- {se:.5}, target {target:.5}, |diff| = {:.2} SE (tol 3 SE)",
            (p - target).abs() / se
        ),
    );
    verdict(
        "noise saturation minus sector",
        minus_ok,
        &format!("minus-sector transfer {minus:.2e} +/- {minus_se:.2e} (tol 3 SE)"),
    );
    verdict("noise saturation runtime", time_ok, &format!("{elapsed:.2?} (limit 300 s)"));
    assert!(plus_ok && minus_ok && time_ok);
}

#[test]
fn structural_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let window = Window::uniform(-20.0, 20.0, 81).unwrap();
    let (mut worst_direct, mut worst_unit, mut worst_leak) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (coupling, fields, state) = common::random_scenario(&mut rng);
        let blocks = lmsz::propagation::propagate_two_qubit(&coupling, &fields, &state, &window, DEFAULT_TOLERANCE, None).unwrap();
        let direct = direct_propagate_4x4(&coupling, &fields, &state, &window, DEFAULT_TOLERANCE).unwrap();
        for (b, d) in blocks.states.iter().zip(&direct.states) {
            for (x, y) in b.amplitudes().iter().zip(d.amplitudes()) {
                worst_direct = worst_direct.max((x - y).norm());
            }
        }

        let (plus, minus) = block_decompose(&coupling, &fields);
        let up = propagate_block(&plus, &window, DEFAULT_TOLERANCE, None).unwrap();
        let um = propagate_block(&minus, &window, DEFAULT_TOLERANCE, None).unwrap();
        let gz = coupling.gamma_z() / fields.time_scale();
        for (p, m) in up.iter().zip(&um) {
            let u = assemble_propagator(p, m, gz, p.tau).unwrap();
            let defect = (u.adjoint() * u - lmsz::model::Matrix4c::identity())
                .iter()
                .fold(0.0f64, |acc, z| acc.max(z.norm()));
            worst_unit = worst_unit.max(defect);
        }

        for start in BasisState::ALL {
            let traj = direct_propagate_4x4(&coupling, &fields, &TwoQubitState::basis(start), &window, DEFAULT_TOLERANCE).unwrap();
            let other = match start.sector() {
                Sector::Plus => Sector::Minus,
                Sector::Minus => Sector::Plus,
            };
            for s in &traj.states {
                worst_leak = worst_leak.max(s.sector_norm_sqr(other));
            }
        }
    }

    let mut monotone = true;
    let mut worst_rise = 0.0f64;
    for _ in 0..20 {
        let (coupling, fields, state) = common::random_scenario(&mut rng);
        let decay = DecayRates::new(rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)).unwrap();
        let traj = direct_propagate_4x4_with_decay(&coupling, &fields, &state, &window, DEFAULT_TOLERANCE, Some(&decay)).unwrap();
        for w in traj.states.windows(2) {
            let rise = w[1].norm_sqr() - w[0].norm_sqr();
            worst_rise = worst_rise.max(rise);
            monotone &= rise <= 0.0;
        }
    }

    let checks = [
        ("block vs direct 4x4 (100 scenarios)", worst_direct <= 1e-8, format!("max amplitude diff {worst_direct:.2e} (tol 1e-8)")),
        ("assembled propagator unitarity", worst_unit <= 1e-10, format!("max |U'U - 1| = {worst_unit:.2e} (tol 1e-10)")),
        ("sector confinement", worst_leak <= 1e-12, format!("max leaked population {worst_leak:.2e} (tol 1e-12)")),
        ("decay norm monotonicity (20 scenarios)", monotone, format!("largest norm increase {worst_rise:.2e}")),
    ];
    for (name, ok, detail) in &checks {
        verdict(name, *ok, detail);
    }
    assert!(checks.iter().all(|c| c.1));
}

#[test]
fn special_function_accuracy() {
    // arguments met by the closed form on the oracle grid: z = (±1 ± i)·τ/√2, |τ| ≤ 100
    let radii = [0.5, 5.0, 9.0, 10.0, 25.0, 50.0, 75.0, 100.0];
    let rays = [-PI / 4.0, 3.0 * PI / 4.0];
    let mut worst_weber = 0.0f64;
    for beta in BETAS {
        for nu in [c(0.0, beta), c(-1.0, beta)] {
            for theta in rays {
                let oracle = weber_ray(nu, theta, &radii);
                for (r, o) in radii.iter().zip(&oracle) {
                    let d = pcf_d(nu, Complex64::from_polar(*r, theta)).unwrap();
                    worst_weber = worst_weber.max(rel_err(d, *o));
                }
            }
        }
    }
    let mut worst_closed = 0.0f64;
    for theta in [-PI / 4.0, PI / 4.0, 3.0 * PI / 4.0, -3.0 * PI / 4.0, 0.3] {
        for r in [0.1, 1.0, 4.0, 9.0, 12.0, 30.0, 70.0, 100.0] {
            let z = Complex64::from_polar(r, theta);
            let g = (-z * z / 4.0).exp();
            if !(g.norm().is_finite() && g.norm() > 1e-250) {
                continue;
            }
            worst_closed = worst_closed
                .max(rel_err(pcf_d(c(0.0, 0.0), z).unwrap(), g))
                .max(rel_err(pcf_d(c(1.0, 0.0), z).unwrap(), z * g));
        }
    }
    let checks = [
        ("pcf vs Weber ODE oracle", worst_weber <= 1e-8, format!("max relative error {worst_weber:.2e} (tol 1e-8)")),
        ("pcf closed forms D0, D1", worst_closed <= 1e-12, format!("max relative error {worst_closed:.2e} (tol 1e-12)")),
    ];
    for (name, ok, detail) in &checks {
        verdict(name, *ok, detail);
    }
    assert!(checks.iter().all(|c| c.1));
}
