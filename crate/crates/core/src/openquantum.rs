//! Classical longitudinal noise and phenomenological decay.
//!
//! Noise runs are Monte Carlo ensembles. Each realisation draws a
//! piecewise-constant field from its own counter-based stream, so results do
//! not depend on scheduling and any realisation can be regenerated alone.
//! Blocks are advanced with fixed steps of a fourth-order Magnus scheme whose
//! su(2) exponentials are evaluated in closed form.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ramp_fields, CouplingTensor, DecayRates, FieldProtocol, FieldTarget, Sector};
use crate::propagation::{propagate_two_qubit, TwoQubitState, Window};

/// Largest admissible noise phase variance `2G·Δt` per step.
pub const MAX_NOISE_PHASE_VARIANCE: f64 = 0.5;
/// Largest admissible deterministic rotation angle `Δτ·(|Ω|max + |γ|)` per step.
pub const MAX_STEP_ROTATION: f64 = 4.0;
/// Default fixed step in the dimensionless time.
pub const DEFAULT_TAU_STEP: f64 = 0.01;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// `G` in `⟨η(t)η(t′)⟩ = 2Gδ(t − t′)`, physical units.
    pub strength: f64,
    pub n_realizations: usize,
    pub base_seed: u64,
    /// Fixed propagation step in `τ`.
    pub tau_step: f64,
}

impl NoiseSpec {
    pub fn new(strength: f64, n_realizations: usize, base_seed: u64) -> Result<Self> {
        let spec = Self {
            strength,
            n_realizations,
            base_seed,
            tau_step: DEFAULT_TAU_STEP,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_step(mut self, tau_step: f64) -> Result<Self> {
        self.tau_step = tau_step;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::invalid(format!(
                "noise strength must be finite and non-negative, got {}",
                self.strength
            )));
        }
        if self.n_realizations == 0 {
            return Err(Error::invalid("at least one realisation is required"));
        }
        if !(self.tau_step.is_finite() && self.tau_step > 0.0) {
            return Err(Error::invalid("the noise step must be positive"));
        }
        Ok(())
    }

    fn rng(&self, realization_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(realization_index);
        rng
    }
}

/// Piecewise-constant noise: `values[k]` holds on `[t₀ + kΔt, t₀ + (k+1)Δt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl NoisePath {
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t - self.t0) / self.dt).floor();
        let k = (k.max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }

    /// `∫ η dt` over the whole path.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt
    }
}

fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::Config("a noise grid needs at least two points".into()));
    }
    let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let tol = 1e-9 * dt.abs().max(grid[0].abs()).max(1.0);
    if dt.is_nan() || dt <= 0.0 || grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
        return Err(Error::Config("noise grid must be uniform and increasing".into()));
    }
    Ok(dt)
}

/// Gaussian values of variance `2G/Δt`, one per grid interval, from the
/// stream `(base_seed, realization_index)`.
pub fn sample_noise_path(
    noise: &NoiseSpec,
    realization_index: u64,
    grid: &[f64],
) -> Result<NoisePath> {
    let dt = uniform_step(grid)?;
    let sd = (2.0 * noise.strength / dt).sqrt();
    let mut rng = noise.rng(realization_index);
    let values = (0..grid.len() - 1)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    Ok(NoisePath {
        t0: grid[0],
        dt,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldGeometry {
    Spin1Only,
    BothHomogeneous,
}

impl FieldGeometry {
    pub fn target(self) -> FieldTarget {
        match self {
            FieldGeometry::Spin1Only => FieldTarget::Spin1,
            FieldGeometry::BothHomogeneous => FieldTarget::BothHomogeneous,
        }
    }

    pub fn from_target(target: FieldTarget) -> Result<Self> {
        match target {
            FieldTarget::Spin1 => Ok(FieldGeometry::Spin1Only),
            FieldTarget::BothHomogeneous => Ok(FieldGeometry::BothHomogeneous),
            FieldTarget::Spin2 => Err(Error::invalid(
                "noise runs support the spin1 and both_homogeneous geometries",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Final populations of `|++⟩, |+−⟩, |−+⟩, |−−⟩`.
    pub mean_populations: [f64; 4],
    pub standard_error: [f64; 4],
    pub n_realizations: usize,
    pub base_seed: u64,
    pub tau_step: f64,
}

impl EnsembleResult {
    pub fn sector_population(&self, sector: Sector) -> (f64, f64) {
        let (u, l) = sector.indices();
        let m = self.mean_populations[u] + self.mean_populations[l];
        // the two components are not independent; bound by the sum
        (m, self.standard_error[u] + self.standard_error[l])
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// One block in the reduced time: `Ω(τ) = slope·τ + coupling_to_noise·ξ`,
/// coupling `gamma`.
#[derive(Debug, Clone, Copy)]
struct NoisyBlock {
    slope: f64,
    noise_weight: f64,
    gamma: f64,
    upper: usize,
    lower: usize,
}

/// Advance `(x, y)` by one fourth-order Magnus step of length `h` starting at
/// `tau`, with the noise value `xi` held over the step.
#[inline]
fn magnus_step(b: &NoisyBlock, tau: f64, h: f64, xi: f64, psi: [Complex64; 2]) -> [Complex64; 2] {
    const OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
    let shift = b.noise_weight * xi;
    let w1 = b.slope * (tau + (0.5 - OFFSET) * h) + shift;
    let w2 = b.slope * (tau + (0.5 + OFFSET) * h) + shift;
    // exponent −i n·σ: mean generator plus the commutator [H₂, H₁] ∝ σʸ
    let nx = h * b.gamma;
    let ny = 2.0 * OFFSET * h * h * (w2 - w1) * b.gamma / 2.0;
    let nz = 0.5 * h * (w1 + w2);
    let norm = (nx * nx + ny * ny + nz * nz).sqrt();
    let (s, c) = norm.sin_cos();
    let k = if norm > 0.0 { s / norm } else { 1.0 };
    let u00 = Complex64::new(c, -k * nz);
    let u11 = Complex64::new(c, k * nz);
    let u01 = -I * k * Complex64::new(nx, -ny);
    let u10 = -I * k * Complex64::new(nx, ny);
    [u00 * psi[0] + u01 * psi[1], u10 * psi[0] + u11 * psi[1]]
}

/// Monte Carlo ensemble for a noisy ramp.
///
/// The ramp term `αt + η(t)` enters like the deterministic ramp: `ω₁ = (αt +
/// η)/2` for spin 1 alone, `ω₁ = ω₂ = (αt + η)/4` for the homogeneous field,
/// where only the plus sector feels it. Returns the populations at
/// `window.tau_f()`.
pub fn run_noisy_lmsz(
    coupling: &CouplingTensor,
    alpha: f64,
    noise: &NoiseSpec,
    initial: &TwoQubitState,
    window: &Window,
    field_geometry: FieldGeometry,
) -> Result<EnsembleResult> {
    noise.validate()?;
    FieldProtocol::ramp(alpha, field_geometry.target())?;
    let norm = initial.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "initial state must be normalised, |psi|^2 = {norm}"
        )));
    }

    let scale = alpha.sqrt();
    let (tau_i, tau_f) = (window.tau_i(), window.tau_f());
    let steps = ((tau_f - tau_i) / noise.tau_step).round().max(1.0) as usize;
    let h = (tau_f - tau_i) / steps as f64;
    // noise in the reduced time: ξ = η/√α has strength G/√α
    let reduced_strength = noise.strength / scale;
    if 2.0 * reduced_strength * h > MAX_NOISE_PHASE_VARIANCE {
        return Err(Error::Config(format!(
            "noise step too coarse: 2G·dt = {:.3} exceeds {MAX_NOISE_PHASE_VARIANCE}; use tau_step <= {:.3e}",
            2.0 * reduced_strength * h,
            MAX_NOISE_PHASE_VARIANCE / (2.0 * reduced_strength)
        )));
    }

    let (w1, w2) = ramp_fields(1.0, field_geometry.target());
    let blocks: Vec<NoisyBlock> = [Sector::Plus, Sector::Minus]
        .into_iter()
        .map(|sector| {
            let k = w1 + sector.parity() * w2;
            let (upper, lower) = sector.indices();
            NoisyBlock {
                slope: k,
                noise_weight: k,
                gamma: coupling.block_coupling(sector) / scale,
                upper,
                lower,
            }
        })
        .collect();
    let omega_max = tau_i.abs().max(tau_f.abs());
    for b in &blocks {
        let rot = h * (b.slope.abs() * omega_max + b.gamma.abs());
        if rot > MAX_STEP_ROTATION {
            return Err(Error::Config(format!(
                "fixed step {h:.3e} turns the state by {rot:.2} rad per step (limit {MAX_STEP_ROTATION})"
            )));
        }
    }

    let amps = initial.amplitudes();
    let grid_dt = h / scale;
    let noise_sd = (2.0 * noise.strength / grid_dt).sqrt() / scale;

    let run_one = |index: u64| -> [f64; 4] {
        let mut rng = noise.rng(index);
        let mut psi: Vec<[Complex64; 2]> = blocks
            .iter()
            .map(|b| [amps[b.upper], amps[b.lower]])
            .collect();
        for k in 0..steps {
            // one draw per step, shared by both blocks
            let z: f64 = StandardNormal.sample(&mut rng);
            let xi = noise_sd * z;
            let tau = tau_i + k as f64 * h;
            for (b, p) in blocks.iter().zip(psi.iter_mut()) {
                if b.gamma == 0.0 && b.slope == 0.0 {
                    continue;
                }
                *p = magnus_step(b, tau, h, xi, *p);
            }
        }
        let mut pops = [0.0; 4];
        for (b, p) in blocks.iter().zip(&psi) {
            pops[b.upper] = p[0].norm_sqr();
            pops[b.lower] = p[1].norm_sqr();
        }
        pops
    };

    let samples: Vec<[f64; 4]> = (0..noise.n_realizations as u64)
        .into_par_iter()
        .map(run_one)
        .collect();

    let n = samples.len() as f64;
    let mut mean = [0.0; 4];
    let mut se = [0.0; 4];
    for k in 0..4 {
        let mut s = CompensatedSum::default();
        samples.iter().for_each(|p| s.add(p[k]));
        let m = s.value() / n;
        let mut v = CompensatedSum::default();
        samples.iter().for_each(|p| v.add((p[k] - m) * (p[k] - m)));
        mean[k] = m.clamp(0.0, 1.0);
        se[k] = if samples.len() > 1 {
            (v.value() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
    }
    Ok(EnsembleResult {
        mean_populations: mean,
        standard_error: se,
        n_realizations: samples.len(),
        base_seed: noise.base_seed,
        tau_step: h,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrajectory {
    pub taus: Vec<f64>,
    /// Unnormalised populations.
    pub populations: Vec<[f64; 4]>,
    pub norms: Vec<f64>,
}

/// Ramp on spin 1 with the up states of the two spins decaying at `ξ₁`,
/// `ξ₂`.
pub fn run_decaying_lmsz(
    coupling: &CouplingTensor,
    alpha: f64,
    decay: &DecayRates,
    initial: &TwoQubitState,
    window: &Window,
    tolerance: f64,
) -> Result<DecayTrajectory> {
    let fields = FieldProtocol::ramp(alpha, FieldTarget::Spin1)?;
    let traj = propagate_two_qubit(coupling, &fields, initial, window, tolerance, Some(decay))?;
    let populations: Vec<[f64; 4]> = traj.states.iter().map(|s| s.populations()).collect();
    let norms = populations.iter().map(|p| p.iter().sum()).collect();
    Ok(DecayTrajectory {
        taus: traj.taus,
        populations,
        norms,
    })
}
