//! Numerical propagation of the effective blocks and of the full two-qubit
//! state.
//!
//! Ramp protocols are integrated in the dimensionless time `τ = √α·t`, so a
//! ramp on spin 1 becomes `Ω(τ) = τ/2` and a block coupling `γ` becomes
//! `√β` with `β = γ²/α`. Other protocols integrate in raw `t`. The evolution
//! starts from the identity at `window.tau_i` and the `±γz` offsets are
//! applied as exact phases `e^{∓iγz(t − t_i)}` instead of being integrated.

use nalgebra::{Matrix2, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    assemble_propagator, block_decompose, build_hamiltonian, BasisState, BlockDecay,
    CouplingTensor, DecayRates, EffectiveBlock, FieldProtocol, Matrix2c, Sector,
};
use crate::ode::{integrate, StepControl};

/// Default local error target for the adaptive integrator.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Fraction of the window, counted back from `tau_f`, used for tail averages.
pub const TAIL_FRACTION: f64 = 0.1;

const MIN_TOLERANCE: f64 = 1e-14;
const MAX_TOLERANCE: f64 = 1e-4;
const NORM_TOLERANCE: f64 = 1e-8;
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Propagation interval `[tau_i, tau_f]` and the times at which results are
/// reported.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    tau_i: f64,
    tau_f: f64,
    grid: Vec<f64>,
}

impl Window {
    pub fn new(tau_i: f64, tau_f: f64, grid: Vec<f64>) -> Result<Self> {
        if !(tau_i.is_finite() && tau_f.is_finite() && tau_i < tau_f) {
            return Err(Error::invalid(format!(
                "window needs finite tau_i < tau_f, got [{tau_i}, {tau_f}]"
            )));
        }
        if grid.is_empty() {
            return Err(Error::invalid("output grid is empty"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("output grid must be strictly increasing"));
        }
        if grid[0] < tau_i || grid[grid.len() - 1] > tau_f {
            return Err(Error::invalid("output grid leaves the window"));
        }
        Ok(Self { tau_i, tau_f, grid })
    }

    /// `points` equally spaced samples including both end points.
    pub fn uniform(tau_i: f64, tau_f: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("a uniform window needs at least two points"));
        }
        let step = (tau_f - tau_i) / (points - 1) as f64;
        let mut grid: Vec<f64> = (0..points).map(|k| tau_i + k as f64 * step).collect();
        grid[points - 1] = tau_f;
        Self::new(tau_i, tau_f, grid)
    }

    /// Symmetric window `[-half_width, half_width]` sampled with spacing
    /// close to `spacing`.
    pub fn symmetric(half_width: f64, spacing: f64) -> Result<Self> {
        let points = ((2.0 * half_width / spacing).round() as usize).max(1) + 1;
        Self::uniform(-half_width, half_width, points)
    }

    pub fn tau_i(&self) -> f64 {
        self.tau_i
    }

    pub fn tau_f(&self) -> f64 {
        self.tau_f
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Start of the tail-averaging interval.
    pub fn tail_start(&self) -> f64 {
        self.tau_f - TAIL_FRACTION * (self.tau_f - self.tau_i)
    }
}

/// Mean of `values` over the samples with `tau ≥ start`.
pub fn tail_average(taus: &[f64], values: &[f64], start: f64) -> f64 {
    let (sum, n) = taus
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= start)
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    if n == 0 {
        values.last().copied().unwrap_or(f64::NAN)
    } else {
        sum / n as f64
    }
}

/// Block evolution operator at one time.
///
/// For Hermitian dynamics the matrix has the form `[[a, b], [−b*, a*]]`; with
/// decay the two columns are integrated independently and `a`, `b` are its
/// first row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPropagator {
    pub tau: f64,
    pub tau_i: f64,
    matrix: Matrix2c,
}

impl BlockPropagator {
    pub fn from_ab(a: Complex64, b: Complex64, tau: f64, tau_i: f64) -> Self {
        Self {
            tau,
            tau_i,
            matrix: Matrix2::new(a, b, -b.conj(), a.conj()),
        }
    }

    pub fn from_matrix(matrix: Matrix2c, tau: f64, tau_i: f64) -> Self {
        Self { tau, tau_i, matrix }
    }

    pub fn identity(tau_i: f64) -> Self {
        Self::from_matrix(Matrix2c::identity(), tau_i, tau_i)
    }

    pub fn a(&self) -> Complex64 {
        self.matrix[(0, 0)]
    }

    pub fn b(&self) -> Complex64 {
        self.matrix[(0, 1)]
    }

    pub fn matrix(&self) -> &Matrix2c {
        &self.matrix
    }

    /// Probability of ending in the upper state when starting in the lower
    /// one, `|U₀₁|² = |b|²`.
    pub fn transition_probability(&self) -> f64 {
        self.b().norm_sqr()
    }

    /// `1 − σ_max(U)²`: zero for unitary blocks, non-decreasing under decay.
    pub fn norm_deficit(&self) -> f64 {
        // largest eigenvalue of U†U = [[p, q], [q*, r]], written without
        // cancellation near the unitary case
        let m = &self.matrix;
        let p = m[(0, 0)].norm_sqr() + m[(1, 0)].norm_sqr();
        let r = m[(0, 1)].norm_sqr() + m[(1, 1)].norm_sqr();
        let q = m[(0, 0)].conj() * m[(0, 1)] + m[(1, 0)].conj() * m[(1, 1)];
        let half = 0.5 * (p - r);
        1.0 - (0.5 * (p + r) + (half * half + q.norm_sqr()).sqrt())
    }
}

/// Pure two-qubit state in the basis `{|++⟩, |+−⟩, |−+⟩, |−−⟩}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amplitudes: Vector4<Complex64>,
}

impl TwoQubitState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("state amplitudes must be finite"));
        }
        Ok(Self {
            amplitudes: Vector4::from(amplitudes),
        })
    }

    pub(crate) fn from_vector(amplitudes: Vector4<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn basis(state: BasisState) -> Self {
        let mut v = Vector4::zeros();
        v[state.index()] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    /// `q1 ⊗ q2` with single-qubit amplitudes ordered `(|+⟩, |−⟩)`.
    pub fn product(q1: [Complex64; 2], q2: [Complex64; 2]) -> Result<Self> {
        Self::new([q1[0] * q2[0], q1[0] * q2[1], q1[1] * q2[0], q1[1] * q2[1]])
    }

    pub fn amplitude(&self, state: BasisState) -> Complex64 {
        self.amplitudes[state.index()]
    }

    pub fn c_pp(&self) -> Complex64 {
        self.amplitudes[0]
    }

    pub fn c_pm(&self) -> Complex64 {
        self.amplitudes[1]
    }

    pub fn c_mp(&self) -> Complex64 {
        self.amplitudes[2]
    }

    pub fn c_mm(&self) -> Complex64 {
        self.amplitudes[3]
    }

    pub fn as_vector(&self) -> &Vector4<Complex64> {
        &self.amplitudes
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [
            self.amplitudes[0],
            self.amplitudes[1],
            self.amplitudes[2],
            self.amplitudes[3],
        ]
    }

    pub fn populations(&self) -> [f64; 4] {
        [
            self.amplitudes[0].norm_sqr(),
            self.amplitudes[1].norm_sqr(),
            self.amplitudes[2].norm_sqr(),
            self.amplitudes[3].norm_sqr(),
        ]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.populations().iter().sum()
    }

    pub fn sector_norm_sqr(&self, sector: Sector) -> f64 {
        let (u, l) = sector.indices();
        self.amplitudes[u].norm_sqr() + self.amplitudes[l].norm_sqr()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::invalid("cannot normalise the zero vector"));
        }
        Ok(Self {
            amplitudes: self.amplitudes / Complex64::from(n),
        })
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &TwoQubitState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// Time series of two-qubit states on a window grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub taus: Vec<f64>,
    pub states: Vec<TwoQubitState>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn final_state(&self) -> Option<&TwoQubitState> {
        self.states.last()
    }

    /// Tail averages of the four basis populations.
    pub fn tail_populations(&self, start: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let p: Vec<f64> = self.states.iter().map(|s| s.populations()[k]).collect();
            *slot = tail_average(&self.taus, &p, start);
        }
        out
    }
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if (MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tolerance) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "tolerance must lie in [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}], got {tolerance:e}"
        )))
    }
}

fn reject_noisy(fields: &FieldProtocol) -> Result<()> {
    if matches!(fields, FieldProtocol::NoisyRamp { .. }) {
        Err(Error::invalid(
            "noisy protocols are propagated realisation by realisation (see openquantum)",
        ))
    } else {
        Ok(())
    }
}

fn check_normalized(state: &TwoQubitState) -> Result<()> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        Err(Error::invalid(format!(
            "initial state must be normalised, |psi|^2 = {n}"
        )))
    } else {
        Ok(())
    }
}

/// Integrate one effective block without its `±γz` offset.
///
/// `decay` adds `−i·upper/2` and `−i·lower/2` (physical rates) to the
/// diagonal.
pub fn propagate_block(
    block: &EffectiveBlock,
    window: &Window,
    tolerance: f64,
    decay: Option<BlockDecay>,
) -> Result<Vec<BlockPropagator>> {
    check_tolerance(tolerance)?;
    reject_noisy(&block.fields)?;
    let decay = decay.unwrap_or_default();
    decay.validate()?;
    let scale = block.fields.time_scale();
    let gamma = Complex64::from(block.gamma_block / scale);
    let loss_u = decay.upper / (2.0 * scale);
    let loss_l = decay.lower / (2.0 * scale);
    let omega = |tau: f64| block.omega(tau / scale).map(|w| w / scale);
    let control = StepControl::with_tolerance(tolerance);
    let tau_i = window.tau_i();

    if decay.is_zero() {
        // first column (a, −b*) determines the whole unitary
        let rhs = |tau: f64, y: &Vector2<Complex64>| -> Result<Vector2<Complex64>> {
            let w = omega(tau)?;
            Ok(Vector2::new(
                -I * (y[0] * w + gamma * y[1]),
                -I * (gamma * y[0] - y[1] * w),
            ))
        };
        let y0 = Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let cols = integrate(rhs, tau_i, y0, window.grid(), control)?;
        Ok(window
            .grid()
            .iter()
            .zip(cols)
            .map(|(&tau, c)| {
                // project back onto the unit sphere; the step error in the
                // norm is far below the phase error but accumulates
                let c = c / Complex64::from(c.norm());
                BlockPropagator::from_ab(c[0], -c[1].conj(), tau, tau_i)
            })
            .collect())
    } else {
        let rhs = |tau: f64, u: &Matrix2c| -> Result<Matrix2c> {
            let w = omega(tau)?;
            let h = Matrix2::new(
                Complex64::new(w, -loss_u),
                gamma,
                gamma,
                Complex64::new(-w, -loss_l),
            );
            Ok(-(h * u) * I)
        };
        let mats = integrate(rhs, tau_i, Matrix2c::identity(), window.grid(), control)?;
        Ok(window
            .grid()
            .iter()
            .zip(mats)
            .map(|(&tau, m)| BlockPropagator::from_matrix(m, tau, tau_i))
            .collect())
    }
}

/// Propagate the two-qubit state through the two independent blocks.
pub fn propagate_two_qubit(
    coupling: &CouplingTensor,
    fields: &FieldProtocol,
    initial: &TwoQubitState,
    window: &Window,
    tolerance: f64,
    decay: Option<&DecayRates>,
) -> Result<StateTrajectory> {
    check_normalized(initial)?;
    fields.validate()?;
    let (plus, minus) = block_decompose(coupling, fields);
    let block_decay = |s: Sector| decay.map(|d| d.block_decay(s));
    let up = propagate_block(&plus, window, tolerance, block_decay(Sector::Plus))?;
    let um = propagate_block(&minus, window, tolerance, block_decay(Sector::Minus))?;
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

/// Integrate the full 4×4 Schrödinger equation, with no use of the block
/// structure. Serves as the reference for [`propagate_two_qubit`].
pub fn direct_propagate_4x4(
    coupling: &CouplingTensor,
    fields: &FieldProtocol,
    initial: &TwoQubitState,
    window: &Window,
    tolerance: f64,
) -> Result<StateTrajectory> {
    direct_propagate_4x4_with_decay(coupling, fields, initial, window, tolerance, None)
}

pub fn direct_propagate_4x4_with_decay(
    coupling: &CouplingTensor,
    fields: &FieldProtocol,
    initial: &TwoQubitState,
    window: &Window,
    tolerance: f64,
    decay: Option<&DecayRates>,
) -> Result<StateTrajectory> {
    check_tolerance(tolerance)?;
    check_normalized(initial)?;
    fields.validate()?;
    reject_noisy(fields)?;
    let scale = fields.time_scale();
    let inv = Complex64::from(1.0 / scale);
    let rhs = |tau: f64, psi: &Vector4<Complex64>| -> Result<Vector4<Complex64>> {
        let h = build_hamiltonian(coupling, fields, tau / scale, decay)?;
        Ok(-(h * psi) * (I * inv))
    };
    let states = integrate(
        rhs,
        window.tau_i(),
        *initial.as_vector(),
        window.grid(),
        StepControl::with_tolerance(tolerance),
    )?;
    Ok(StateTrajectory {
        taus: window.grid().to_vec(),
        states: states.into_iter().map(TwoQubitState::from_vector).collect(),
    })
}

/// Asymptotic LMSZ transition probability `1 − exp(−2πγ²/α)`.
pub fn lmsz_probability(gamma_block: f64, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if !gamma_block.is_finite() {
        return Err(Error::invalid("block coupling must be finite"));
    }
    let beta = gamma_block * gamma_block / alpha;
    Ok(-(-2.0 * std::f64::consts::PI * beta).exp_m1())
}

/// Tail average of `|b(τ)|²` along a block trajectory.
pub fn tail_transition_probability(traj: &[BlockPropagator], window: &Window) -> f64 {
    let taus: Vec<f64> = traj.iter().map(|p| p.tau).collect();
    let probs: Vec<f64> = traj.iter().map(|p| p.transition_probability()).collect();
    tail_average(&taus, &probs, window.tail_start())
}
