//! Closed-form finite-window amplitudes of a linearly swept two-level block.
//!
//! In the reduced variable `s` the block obeys
//! `i ∂ₛ(x, y) = [[−s, √(2β)], [√(2β), s]] (x, y)` with `(x, y) = (1, 0)` at
//! `s_i`. With `ν = iβ`, `κ₁ = √2 e^{−iπ/4}`, `κ₂ = √2 e^{3iπ/4}`:
//!
//! ```text
//! a = Γ(1−iβ)/√(2π) · [D_ν(κ₁s) D_{ν−1}(κ₂sᵢ) + D_ν(κ₂s) D_{ν−1}(κ₁sᵢ)]
//! b = Γ(1−iβ)/√(2πβ) · e^{iπ/4} · [D_ν(κ₂s) D_ν(κ₁sᵢ) − D_ν(κ₁s) D_ν(κ₂sᵢ)]
//! ```
//!
//! and the evolution operator is `[[a, b], [−b*, a*]]`. The `b` written with
//! `D_{ν−1}` at `sᵢ` (mirroring `a`) neither vanishes at `sᵢ` nor preserves
//! the norm; the form above is the one that solves the equation.
//!
//! The public functions use the ramp-block convention of
//! [`crate::propagation`], `Ω(τ) = ±τ/2`, `s = τ/√2`.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use super::gamma::gamma_complex;
use super::pcf::pcf_d;
use crate::error::{Error, Result};
use crate::model::{
    assemble_propagator, block_decompose, CouplingTensor, EffectiveBlock, FieldProtocol,
};
use crate::propagation::{BlockPropagator, StateTrajectory, TwoQubitState, Window};

fn kappa1() -> Complex64 {
    Complex64::new(1.0, -1.0)
}

fn kappa2() -> Complex64 {
    Complex64::new(-1.0, 1.0)
}

/// Largest `β` the closed form is evaluated for. Beyond it the series and
/// asymptotic branches of `D_ν` no longer overlap to double precision.
pub const MAX_EXACT_BETA: f64 = 12.0;

/// Closed form in the reduced variable, with the `τ_i`-dependent factors
/// evaluated once.
#[derive(Debug, Clone)]
struct ReducedSolution {
    nu: Complex64,
    pref_a: Complex64,
    pref_b: Complex64,
    d1_i: Complex64,
    d2_i: Complex64,
    d1m_i: Complex64,
    d2m_i: Complex64,
}

impl ReducedSolution {
    fn new(beta: f64, s_i: f64) -> Result<Self> {
        if beta > MAX_EXACT_BETA {
            return Err(Error::Range(format!(
                "beta = {beta} exceeds the closed-form limit {MAX_EXACT_BETA}; use numeric propagation"
            )));
        }
        let nu = Complex64::new(0.0, beta);
        let g = gamma_complex(1.0 - nu)?;
        let pref_a = g / (2.0 * PI).sqrt();
        let pref_b = g / (2.0 * PI * beta).sqrt() * Complex64::from_polar(1.0, FRAC_PI_4);
        let z1 = kappa1() * s_i;
        let z2 = kappa2() * s_i;
        Ok(Self {
            nu,
            pref_a,
            pref_b,
            d1_i: pcf_d(nu, z1)?,
            d2_i: pcf_d(nu, z2)?,
            d1m_i: pcf_d(nu - 1.0, z1)?,
            d2m_i: pcf_d(nu - 1.0, z2)?,
        })
    }

    fn at(&self, s: f64) -> Result<(Complex64, Complex64)> {
        let d1 = pcf_d(self.nu, kappa1() * s)?;
        let d2 = pcf_d(self.nu, kappa2() * s)?;
        let a = self.pref_a * (d1 * self.d2m_i + d2 * self.d1m_i);
        let b = self.pref_b * (d2 * self.d1_i - d1 * self.d2_i);
        Ok((a, b))
    }
}

fn check_times(tau: f64, tau_i: f64) -> Result<()> {
    if !(tau.is_finite() && tau_i.is_finite()) {
        return Err(Error::invalid("times must be finite"));
    }
    if tau < tau_i {
        return Err(Error::invalid(format!(
            "tau = {tau} precedes the initial time {tau_i}"
        )));
    }
    Ok(())
}

/// `(a, b)` for the block `H = (τ/2)σᶻ + √β σˣ` started at `tau_i`.
pub fn exact_amplitudes(beta: f64, tau: f64, tau_i: f64) -> Result<(Complex64, Complex64)> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!(
            "beta must be positive and finite, got {beta} (the uncoupled case is diagonal)"
        )));
    }
    check_times(tau, tau_i)?;
    let (a, b) = ReducedSolution::new(beta, tau_i * FRAC_1_SQRT_2)?.at(tau * FRAC_1_SQRT_2)?;
    Ok((a.conj(), -b.conj()))
}

/// Closed-form block trajectory for a pure ramp block on the window grid.
///
/// Handles either sweep direction, either coupling sign, an uncoupled block
/// and a block the ramp does not reach (`Ω ≡ 0`, constant rotation).
pub fn exact_block_trajectory(
    block: &EffectiveBlock,
    window: &Window,
) -> Result<Vec<BlockPropagator>> {
    let slope = block.fields.ramp_slope(block.sector).ok_or_else(|| {
        Error::invalid("the closed form applies to pure ramp protocols only")
    })?;
    let scale = block.fields.time_scale();
    let g = block.gamma_block / scale;
    let tau_i = window.tau_i();
    let mut out = Vec::with_capacity(window.grid().len());

    if slope == 0.0 {
        for &tau in window.grid() {
            let (sn, cs) = (g * (tau - tau_i)).sin_cos();
            out.push(BlockPropagator::from_ab(
                Complex64::new(cs, 0.0),
                Complex64::new(0.0, -sn),
                tau,
                tau_i,
            ));
        }
        return Ok(out);
    }
    if g == 0.0 {
        for &tau in window.grid() {
            let phase = -slope * (tau * tau - tau_i * tau_i) / 2.0;
            out.push(BlockPropagator::from_ab(
                Complex64::from_polar(1.0, phase),
                Complex64::new(0.0, 0.0),
                tau,
                tau_i,
            ));
        }
        return Ok(out);
    }

    let sign = g.signum();
    let reduced = ReducedSolution::new(g * g, tau_i * FRAC_1_SQRT_2)?;
    for &tau in window.grid() {
        let (a, b) = reduced.at(tau * FRAC_1_SQRT_2)?;
        let (a, b) = if slope > 0.0 {
            (a.conj(), -sign * b.conj())
        } else {
            (a, sign * b)
        };
        out.push(BlockPropagator::from_ab(a, b, tau, tau_i));
    }
    Ok(out)
}

/// Two-qubit trajectory assembled from the closed-form block solutions.
pub fn exact_two_qubit(
    coupling: &CouplingTensor,
    fields: &FieldProtocol,
    initial: &TwoQubitState,
    window: &Window,
) -> Result<StateTrajectory> {
    fields.validate()?;
    let (plus, minus) = block_decompose(coupling, fields);
    let up = exact_block_trajectory(&plus, window)?;
    let um = exact_block_trajectory(&minus, window)?;
    let gamma_z = coupling.gamma_z() / fields.time_scale();
    let mut states = Vec::with_capacity(up.len());
    for (p, m) in up.iter().zip(&um) {
        let u = assemble_propagator(p, m, gamma_z, p.tau)?;
        states.push(TwoQubitState::from_vector(u * initial.as_vector()));
    }
    Ok(StateTrajectory {
        taus: window.grid().to_vec(),
        states,
    })
}
