//! Two-qubit exchange Hamiltonian and its decomposition into the two
//! invariant subspaces of the parity operator `σ₁ᶻσ₂ᶻ`.
//!
//! Basis order is fixed everywhere as `{|++⟩, |+−⟩, |−+⟩, |−−⟩}` and ħ = 1.
//! The Hamiltonian is
//!
//! ```text
//! H = ω₁(t)σ₁ᶻ + ω₂(t)σ₂ᶻ + γx σ₁ˣσ₂ˣ + γy σ₁ʸσ₂ʸ + γz σ₁ᶻσ₂ᶻ
//! ```
//!
//! which only connects `|++⟩ ↔ |−−⟩` (coupling `γx − γy`) and
//! `|+−⟩ ↔ |−+⟩` (coupling `γx + γy`). Each subspace is an effective
//! spin-1/2 with longitudinal field `Ω± = ω₁ ± ω₂` and energy offset `±γz`.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagation::BlockPropagator;

pub type Matrix2c = Matrix2<Complex64>;
pub type Matrix4c = Matrix4<Complex64>;

/// Residual bound used by [`check_symmetry`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One of the four computational basis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisState {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl BasisState {
    pub const ALL: [BasisState; 4] = [
        BasisState::PlusPlus,
        BasisState::PlusMinus,
        BasisState::MinusPlus,
        BasisState::MinusMinus,
    ];

    pub fn index(self) -> usize {
        match self {
            BasisState::PlusPlus => 0,
            BasisState::PlusMinus => 1,
            BasisState::MinusPlus => 2,
            BasisState::MinusMinus => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BasisState::PlusPlus => "|++>",
            BasisState::PlusMinus => "|+->",
            BasisState::MinusPlus => "|-+>",
            BasisState::MinusMinus => "|-->",
        }
    }

    /// Short tag used in column names (`pp`, `pm`, `mp`, `mm`).
    pub fn tag(self) -> &'static str {
        match self {
            BasisState::PlusPlus => "pp",
            BasisState::PlusMinus => "pm",
            BasisState::MinusPlus => "mp",
            BasisState::MinusMinus => "mm",
        }
    }

    pub fn sector(self) -> Sector {
        match self {
            BasisState::PlusPlus | BasisState::MinusMinus => Sector::Plus,
            BasisState::PlusMinus | BasisState::MinusPlus => Sector::Minus,
        }
    }
}

/// Eigenspace of `σ₁ᶻσ₂ᶻ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// Eigenvalue +1, spanned by `|++⟩, |−−⟩`.
    Plus,
    /// Eigenvalue −1, spanned by `|+−⟩, |−+⟩`.
    Minus,
}

impl Sector {
    pub fn parity(self) -> f64 {
        match self {
            Sector::Plus => 1.0,
            Sector::Minus => -1.0,
        }
    }

    /// The (upper, lower) basis states of the effective spin.
    pub fn basis(self) -> (BasisState, BasisState) {
        match self {
            Sector::Plus => (BasisState::PlusPlus, BasisState::MinusMinus),
            Sector::Minus => (BasisState::PlusMinus, BasisState::MinusPlus),
        }
    }

    pub fn indices(self) -> (usize, usize) {
        let (u, l) = self.basis();
        (u.index(), l.index())
    }

    pub fn label(self) -> &'static str {
        match self {
            Sector::Plus => "plus",
            Sector::Minus => "minus",
        }
    }
}

/// Exchange couplings `γx, γy, γz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTensor {
    gamma_x: f64,
    gamma_y: f64,
    gamma_z: f64,
}

impl CouplingTensor {
    pub fn new(gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Result<Self> {
        if !(gamma_x.is_finite() && gamma_y.is_finite() && gamma_z.is_finite()) {
            return Err(Error::invalid(format!(
                "couplings must be finite, got ({gamma_x}, {gamma_y}, {gamma_z})"
            )));
        }
        Ok(Self {
            gamma_x,
            gamma_y,
            gamma_z,
        })
    }

    /// Isotropic exchange `γx = γy = γ/2`.
    pub fn isotropic(gamma: f64, gamma_z: f64) -> Result<Self> {
        Self::new(gamma / 2.0, gamma / 2.0, gamma_z)
    }

    /// Couplings that realise prescribed block couplings `γ₊, γ₋`.
    pub fn from_block_couplings(gamma_plus: f64, gamma_minus: f64, gamma_z: f64) -> Result<Self> {
        Self::new(
            (gamma_minus + gamma_plus) / 2.0,
            (gamma_minus - gamma_plus) / 2.0,
            gamma_z,
        )
    }

    pub fn gamma_x(&self) -> f64 {
        self.gamma_x
    }

    pub fn gamma_y(&self) -> f64 {
        self.gamma_y
    }

    pub fn gamma_z(&self) -> f64 {
        self.gamma_z
    }

    /// `γ₊ = γx − γy`, the coupling inside the `{|++⟩, |−−⟩}` sector.
    pub fn gamma_plus(&self) -> f64 {
        self.gamma_x - self.gamma_y
    }

    /// `γ₋ = γx + γy`, the coupling inside the `{|+−⟩, |−+⟩}` sector.
    pub fn gamma_minus(&self) -> f64 {
        self.gamma_x + self.gamma_y
    }

    pub fn block_coupling(&self, sector: Sector) -> f64 {
        match sector {
            Sector::Plus => self.gamma_plus(),
            Sector::Minus => self.gamma_minus(),
        }
    }

    pub fn swapped_xy(&self) -> Self {
        Self {
            gamma_x: self.gamma_y,
            gamma_y: self.gamma_x,
            gamma_z: self.gamma_z,
        }
    }
}

/// Which spin(s) a ramp acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldTarget {
    /// `ω₁ = αt/2`, `ω₂ = 0`.
    Spin1,
    /// `ω₁ = 0`, `ω₂ = αt/2`.
    Spin2,
    /// One homogeneous field, `ω₁ = ω₂ = αt/4`.
    BothHomogeneous,
}

/// Samples of `ω₁, ω₂` at increasing times, linearly interpolated and held
/// constant outside the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedField {
    times: Vec<f64>,
    omega1: Vec<f64>,
    omega2: Vec<f64>,
}

impl TabulatedField {
    pub fn new(times: Vec<f64>, omega1: Vec<f64>, omega2: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != omega1.len() || times.len() != omega2.len() {
            return Err(Error::invalid(
                "tabulated field needs at least two samples and equal column lengths",
            ));
        }
        if times
            .iter()
            .chain(&omega1)
            .chain(&omega2)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("tabulated field contains non-finite values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated times must be strictly increasing"));
        }
        Ok(Self {
            times,
            omega1,
            omega2,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn interpolate(&self, t: f64) -> (f64, f64) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (self.omega1[0], self.omega2[0]);
        }
        if t >= self.times[n - 1] {
            return (self.omega1[n - 1], self.omega2[n - 1]);
        }
        // first index with times[k] > t; k in 1..n
        let k = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        (
            self.omega1[k - 1] + w * (self.omega1[k] - self.omega1[k - 1]),
            self.omega2[k - 1] + w * (self.omega2[k] - self.omega2[k - 1]),
        )
    }
}

/// Longitudinal field protocol `(ω₁(t), ω₂(t))`.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldProtocol {
    Ramp {
        alpha: f64,
        applied_to: FieldTarget,
    },
    Constant {
        omega1: f64,
        omega2: f64,
    },
    /// `ω₁ = amplitude · cos(frequency · t)`, `ω₂ = 0`.
    Oscillating {
        amplitude: f64,
        frequency: f64,
    },
    /// Ramp plus white noise `η(t)`, `⟨η(t)η(t′)⟩ = 2Gδ(t − t′)`. The noise
    /// enters like the ramp term: `ω₁ = (αt + η)/2` on spin 1, or
    /// `ω₁ = ω₂ = (αt + η)/4` for the homogeneous geometry. Deterministic
    /// evaluation returns the noise-free mean field.
    NoisyRamp {
        alpha: f64,
        noise_strength: f64,
        seed: u64,
        applied_to: FieldTarget,
    },
    Tabulated(TabulatedField),
}

impl FieldProtocol {
    pub fn ramp(alpha: f64, applied_to: FieldTarget) -> Result<Self> {
        let p = FieldProtocol::Ramp { alpha, applied_to };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldProtocol::Ramp { alpha, .. } => check_alpha(alpha),
            FieldProtocol::Constant { omega1, omega2 } => {
                if omega1.is_finite() && omega2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("constant field must be finite"))
                }
            }
            FieldProtocol::Oscillating {
                amplitude,
                frequency,
            } => {
                if amplitude.is_finite() && frequency.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("oscillating field parameters must be finite"))
                }
            }
            FieldProtocol::NoisyRamp {
                alpha,
                noise_strength,
                applied_to,
                ..
            } => {
                check_alpha(alpha)?;
                if !(noise_strength.is_finite() && noise_strength >= 0.0) {
                    return Err(Error::invalid(format!(
                        "noise strength must be finite and non-negative, got {noise_strength}"
                    )));
                }
                if applied_to == FieldTarget::Spin2 {
                    return Err(Error::invalid(
                        "noisy ramp supports spin1 or both_homogeneous geometries",
                    ));
                }
                Ok(())
            }
            FieldProtocol::Tabulated(_) => Ok(()),
        }
    }

    /// `(ω₁(t), ω₂(t))`.
    pub fn evaluate(&self, t: f64) -> Result<(f64, f64)> {
        if !t.is_finite() {
            return Err(Error::invalid(format!("time must be finite, got {t}")));
        }
        let (w1, w2) = match self {
            FieldProtocol::Ramp { alpha, applied_to }
            | FieldProtocol::NoisyRamp {
                alpha, applied_to, ..
            } => ramp_fields(*alpha * t, *applied_to),
            FieldProtocol::Constant { omega1, omega2 } => (*omega1, *omega2),
            FieldProtocol::Oscillating {
                amplitude,
                frequency,
            } => (amplitude * (frequency * t).cos(), 0.0),
            FieldProtocol::Tabulated(tab) => tab.interpolate(t),
        };
        if w1.is_finite() && w2.is_finite() {
            Ok((w1, w2))
        } else {
            Err(Error::invalid(format!(
                "field evaluation at t = {t} is not finite"
            )))
        }
    }

    /// Conversion factor between physical time and the integration variable:
    /// `τ = scale · t`. Ramps use `√α`; everything else integrates in `t`.
    pub fn time_scale(&self) -> f64 {
        match self {
            FieldProtocol::Ramp { alpha, .. } | FieldProtocol::NoisyRamp { alpha, .. } => {
                alpha.sqrt()
            }
            _ => 1.0,
        }
    }

    pub fn ramp_alpha(&self) -> Option<f64> {
        match self {
            FieldProtocol::Ramp { alpha, .. } | FieldProtocol::NoisyRamp { alpha, .. } => {
                Some(*alpha)
            }
            _ => None,
        }
    }

    /// Slope of `Ω(τ)` in `τ` for a pure ramp: `+1/2`, `−1/2` or `0`.
    pub fn ramp_slope(&self, sector: Sector) -> Option<f64> {
        let applied_to = match self {
            FieldProtocol::Ramp { applied_to, .. } => *applied_to,
            _ => return None,
        };
        let (w1, w2) = ramp_fields(1.0, applied_to);
        Some(match sector {
            Sector::Plus => w1 + w2,
            Sector::Minus => w1 - w2,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "ramp slope alpha must be positive and finite, got {alpha}"
        )))
    }
}

/// Field split for a ramp term `x = αt` (or `αt + η`).
pub(crate) fn ramp_fields(x: f64, applied_to: FieldTarget) -> (f64, f64) {
    match applied_to {
        FieldTarget::Spin1 => (x / 2.0, 0.0),
        FieldTarget::Spin2 => (0.0, x / 2.0),
        FieldTarget::BothHomogeneous => (x / 4.0, x / 4.0),
    }
}

/// Irreversible decay rates of the up-state of spin 1 and spin 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    xi_1: f64,
    xi_2: f64,
}

impl DecayRates {
    pub fn new(xi_1: f64, xi_2: f64) -> Result<Self> {
        for xi in [xi_1, xi_2] {
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(Error::invalid(format!(
                    "decay rates must be finite and non-negative, got {xi}"
                )));
            }
        }
        Ok(Self { xi_1, xi_2 })
    }

    pub fn xi_1(&self) -> f64 {
        self.xi_1
    }

    pub fn xi_2(&self) -> f64 {
        self.xi_2
    }

    pub fn is_zero(&self) -> bool {
        self.xi_1 == 0.0 && self.xi_2 == 0.0
    }

    /// Population loss rates of the two sector basis states.
    ///
    /// The loss term `−(i/2)(ξ₁P₁⁺ + ξ₂P₂⁺)` with `Pₖ⁺ = (1 + σₖᶻ)/2` is
    /// diagonal in the product basis: `|++⟩` loses at `ξ₁ + ξ₂`, `|+−⟩` at
    /// `ξ₁`, `|−+⟩` at `ξ₂`, `|−−⟩` not at all.
    pub fn block_decay(&self, sector: Sector) -> BlockDecay {
        match sector {
            Sector::Plus => BlockDecay {
                upper: self.xi_1 + self.xi_2,
                lower: 0.0,
            },
            Sector::Minus => BlockDecay {
                upper: self.xi_1,
                lower: self.xi_2,
            },
        }
    }
}

/// Diagonal loss rates inside one effective two-level block; the block
/// Hamiltonian gains `−i·upper/2` and `−i·lower/2` on its diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockDecay {
    pub upper: f64,
    pub lower: f64,
}

impl BlockDecay {
    pub fn upper_only(xi: f64) -> Self {
        Self {
            upper: xi,
            lower: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.upper == 0.0 && self.lower == 0.0
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.upper.is_finite() && self.lower.is_finite() && self.upper >= 0.0 && self.lower >= 0.0
        {
            Ok(())
        } else {
            Err(Error::invalid("block decay rates must be finite and non-negative"))
        }
    }
}

/// One invariant subspace viewed as a fictitious spin-1/2:
/// `H = Ω(t)σᶻ + γ σˣ + shift·𝟙`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveBlock {
    pub sector: Sector,
    pub fields: FieldProtocol,
    pub gamma_block: f64,
    pub energy_shift: f64,
}

impl EffectiveBlock {
    /// `Ω±(t) = ω₁(t) ± ω₂(t)`.
    pub fn omega(&self, t: f64) -> Result<f64> {
        let (w1, w2) = self.fields.evaluate(t)?;
        Ok(w1 + self.sector.parity() * w2)
    }

    pub fn basis_labels(&self) -> (BasisState, BasisState) {
        self.sector.basis()
    }

    /// Full block Hamiltonian including the `±γz` offset.
    pub fn hamiltonian(&self, t: f64) -> Result<Matrix2c> {
        let w = self.omega(t)?;
        let g = Complex64::from(self.gamma_block);
        let s = self.energy_shift;
        Ok(Matrix2::new(
            Complex64::from(w + s),
            g,
            g,
            Complex64::from(-w + s),
        ))
    }
}

/// `H(t)` in the ordered product basis.
pub fn build_hamiltonian(
    coupling: &CouplingTensor,
    fields: &FieldProtocol,
    t: f64,
    decay: Option<&DecayRates>,
) -> Result<Matrix4c> {
    let (w1, w2) = fields.evaluate(t)?;
    let gz = coupling.gamma_z();
    let mut h = Matrix4c::zeros();
    h[(0, 0)] = Complex64::from(w1 + w2 + gz);
    h[(1, 1)] = Complex64::from(w1 - w2 - gz);
    h[(2, 2)] = Complex64::from(-w1 + w2 - gz);
    h[(3, 3)] = Complex64::from(-w1 - w2 + gz);
    let gp = Complex64::from(coupling.gamma_plus());
    let gm = Complex64::from(coupling.gamma_minus());
    h[(0, 3)] = gp;
    h[(3, 0)] = gp;
    h[(1, 2)] = gm;
    h[(2, 1)] = gm;
    if let Some(d) = decay {
        h[(0, 0)] -= I * (d.xi_1 + d.xi_2) / 2.0;
        h[(1, 1)] -= I * d.xi_1 / 2.0;
        h[(2, 2)] -= I * d.xi_2 / 2.0;
    }
    Ok(h)
}

/// Outcome of [`check_symmetry`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryCheck {
    pub symmetric: bool,
    /// `max |[H, σ₁ᶻσ₂ᶻ]_ij|`.
    pub residual: f64,
}

/// Whether `H` commutes with `σ₁ᶻσ₂ᶻ` to [`SYMMETRY_TOLERANCE`].
pub fn check_symmetry(h: &Matrix4c) -> SymmetryCheck {
    const PARITY: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
    let mut residual: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            // [H, Z]_ij = H_ij (z_j − z_i)
            residual = residual.max((h[(i, j)] * (PARITY[j] - PARITY[i])).norm());
        }
    }
    SymmetryCheck {
        symmetric: residual <= SYMMETRY_TOLERANCE,
        residual,
    }
}

/// Split into the (plus, minus) effective two-level problems.
pub fn block_decompose(
    coupling: &CouplingTensor,
    fields: &FieldProtocol,
) -> (EffectiveBlock, EffectiveBlock) {
    let block = |sector: Sector| EffectiveBlock {
        sector,
        fields: fields.clone(),
        gamma_block: coupling.block_coupling(sector),
        energy_shift: sector.parity() * coupling.gamma_z(),
    };
    (block(Sector::Plus), block(Sector::Minus))
}

/// Rebuild the 4×4 evolution operator from the two block propagators.
///
/// `gamma_z` and `t` must be in the same time units as the blocks' `tau`.
/// The block offsets contribute `e^{∓iγz(t − t_i)}`, so the result is the
/// identity at the common initial time.
pub fn assemble_propagator(
    plus: &BlockPropagator,
    minus: &BlockPropagator,
    gamma_z: f64,
    t: f64,
) -> Result<Matrix4c> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !same(plus.tau, t) || !same(minus.tau, t) {
        return Err(Error::invalid(format!(
            "block propagators at tau = ({}, {}) do not match t = {t}",
            plus.tau, minus.tau
        )));
    }
    if !same(plus.tau_i, minus.tau_i) {
        return Err(Error::invalid(format!(
            "block propagators start at different times ({}, {})",
            plus.tau_i, minus.tau_i
        )));
    }
    if !gamma_z.is_finite() {
        return Err(Error::invalid("gamma_z must be finite"));
    }
    let elapsed = t - plus.tau_i;
    let phase_plus = Complex64::from_polar(1.0, -gamma_z * elapsed);
    let phase_minus = phase_plus.conj();
    let mut u = Matrix4c::zeros();
    for (block, phase, sector) in [
        (plus, phase_plus, Sector::Plus),
        (minus, phase_minus, Sector::Minus),
    ] {
        let (p, q) = sector.indices();
        let m = block.matrix();
        u[(p, p)] = phase * m[(0, 0)];
        u[(p, q)] = phase * m[(0, 1)];
        u[(q, p)] = phase * m[(1, 0)];
        u[(q, q)] = phase * m[(1, 1)];
    }
    Ok(u)
}
