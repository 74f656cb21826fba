//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::PI;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// `ln Γ(z)` by upward recurrence to `|z| ≥ 17` and the Stirling series.
pub fn ln_gamma_stirling(z: Complex64) -> Complex64 {
    const SHIFT: usize = 17;
    // B_{2k} / (2k (2k − 1))
    const COEF: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
        -3617.0 / 122400.0,
    ];
    let mut acc = c(0.0, 0.0);
    for k in 0..SHIFT {
        acc += (z + k as f64).ln();
    }
    let w = z + SHIFT as f64;
    let mut s = (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln();
    let w2 = w * w;
    let mut wp = w;
    for a in COEF {
        s += a / wp;
        wp *= w2;
    }
    s - acc
}

/// `D_ν` sampled along the ray `z = r·e^{iθ}` by integrating the Weber
/// equation `D'' = (z²/4 − ν − 1/2) D` from the origin with classical RK4.
///
/// `radii` must be non-negative and increasing. The step is `0.002` of the
/// local oscillation length.
pub fn weber_ray(nu: Complex64, theta: f64, radii: &[f64]) -> Vec<Complex64> {
    let sqrt_pi = PI.sqrt();
    let two = c(2.0, 0.0);
    let d0 = two.powc(nu / 2.0) * sqrt_pi * (-ln_gamma_stirling((1.0 - nu) / 2.0)).exp();
    let dp0 = -two.powc((nu + 1.0) / 2.0) * sqrt_pi * (-ln_gamma_stirling(-nu / 2.0)).exp();
    let e = Complex64::from_polar(1.0, theta);
    let e2 = e * e;
    let q = |r: f64| e2 * (e2 * (r * r / 4.0) - nu - 0.5);
    let f = |r: f64, y: Complex64, v: Complex64| (v, q(r) * y);

    let mut out = Vec::with_capacity(radii.len());
    let (mut r, mut y, mut v) = (0.0f64, d0, dp0 * e);
    for &target in radii {
        while r < target {
            let omega = (q(r).norm()).sqrt().max(1.0);
            let h = (0.002 / omega).min(target - r);
            let (k1y, k1v) = f(r, y, v);
            let (k2y, k2v) = f(r + h / 2.0, y + k1y * (h / 2.0), v + k1v * (h / 2.0));
            let (k3y, k3v) = f(r + h / 2.0, y + k2y * (h / 2.0), v + k2v * (h / 2.0));
            let (k4y, k4v) = f(r + h, y + k3y * h, v + k3v * h);
            y += (k1y + 2.0 * k2y + 2.0 * k3y + k4y) * (h / 6.0);
            v += (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (h / 6.0);
            r += h;
        }
        out.push(y);
    }
    out
}

/// Ensemble-averaged block dynamics under white dephasing noise.
///
/// Block `H = (kτ + kξ)σᶻ + γσˣ` with `⟨ξ(τ)ξ(τ′)⟩ = 2Gδ(τ − τ′)` averages
/// to `dρ/dτ = −i[H₀, ρ] + 2k²G(σᶻρσᶻ − ρ)`. Returns the final upper-state
/// population starting from the lower state. Fixed-step RK4 with step `h`.
pub fn dephasing_upper_population(k: f64, gamma: f64, g: f64, tau_i: f64, tau_f: f64, h: f64) -> f64 {
    // ρ = [[p, x], [x*, 1 − p]]
    let rate = 2.0 * k * k * g;
    let i = c(0.0, 1.0);
    let rhs = |tau: f64, p: f64, x: Complex64| -> (f64, Complex64) {
        let w = k * tau;
        // −i[H, ρ] for H = wσᶻ + γσˣ
        let dp = -2.0 * gamma * x.im;
        let dx = -2.0 * i * w * x - i * gamma * (1.0 - 2.0 * p) - 2.0 * rate * x;
        (dp, dx)
    };
    let n = ((tau_f - tau_i) / h).round() as usize;
    let h = (tau_f - tau_i) / n as f64;
    let (mut p, mut x) = (0.0f64, c(0.0, 0.0));
    for s in 0..n {
        let t = tau_i + s as f64 * h;
        let (a1, b1) = rhs(t, p, x);
        let (a2, b2) = rhs(t + h / 2.0, p + a1 * h / 2.0, x + b1 * (h / 2.0));
        let (a3, b3) = rhs(t + h / 2.0, p + a2 * h / 2.0, x + b2 * (h / 2.0));
        let (a4, b4) = rhs(t + h, p + a3 * h, x + b3 * h);
        p += (a1 + 2.0 * a2 + 2.0 * a3 + a4) * h / 6.0;
        x += (b1 + 2.0 * b2 + 2.0 * b3 + b4) * (h / 6.0);
    }
    p
}

/// Writes past the test harness capture so every criterion line shows up.
pub fn verdict(name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

use lmsz::model::{FieldProtocol, FieldTarget};
use lmsz::{CouplingTensor, TwoQubitState};
use rand::Rng;

/// Random coupling, field protocol and normalised initial state.
pub fn random_scenario<R: Rng>(rng: &mut R) -> (CouplingTensor, FieldProtocol, TwoQubitState) {
    let coupling = CouplingTensor::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
    .unwrap();
    let fields = match rng.random_range(0..5) {
        0 => FieldProtocol::Ramp {
            alpha: rng.random_range(0.2..3.0),
            applied_to: FieldTarget::Spin1,
        },
        1 => FieldProtocol::Ramp {
            alpha: rng.random_range(0.2..3.0),
            applied_to: FieldTarget::Spin2,
        },
        2 => FieldProtocol::Ramp {
            alpha: rng.random_range(0.2..3.0),
            applied_to: FieldTarget::BothHomogeneous,
        },
        3 => FieldProtocol::Constant {
            omega1: rng.random_range(-2.0..2.0),
            omega2: rng.random_range(-2.0..2.0),
        },
        _ => FieldProtocol::Oscillating {
            amplitude: rng.random_range(0.1..3.0),
            frequency: rng.random_range(0.1..2.0),
        },
    };
    let amps: [Complex64; 4] =
        std::array::from_fn(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let state = TwoQubitState::new(amps.map(|a| a / norm)).unwrap();
    (coupling, fields, state)
}
