//! Coupling estimation from measured transition probabilities and from
//! constant-field Rabi oscillations.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::Sector;

/// Only `γ±²` enter the probabilities; the returned solution takes
/// `γ₊ ≥ 0` (so `γx ≥ γy`). Swapping `γx ↔ γy` fits equally well, as do the
/// overall sign flips.
pub const SIGN_AMBIGUITY_NOTE: &str =
    "only |gamma_plus| and |gamma_minus| are identifiable; reported gamma_x >= gamma_y, the reflection gamma_x <-> gamma_y is equivalent";

/// Success counts behind one sector's probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counts {
    pub successes: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityMeasurement {
    pub p_plus: f64,
    pub p_minus: f64,
    pub alpha: f64,
    pub counts_plus: Option<Counts>,
    pub counts_minus: Option<Counts>,
}

impl ProbabilityMeasurement {
    pub fn new(p_plus: f64, p_minus: f64, alpha: f64) -> Self {
        Self {
            p_plus,
            p_minus,
            alpha,
            counts_plus: None,
            counts_minus: None,
        }
    }

    pub fn with_counts(mut self, plus: Counts, minus: Counts) -> Self {
        self.counts_plus = Some(plus);
        self.counts_minus = Some(minus);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingEstimate {
    pub gamma_x: f64,
    pub gamma_y: f64,
    /// `|γ₊|` and `|γ₋|`.
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// One-sigma errors on `(γx, γy)` when counts were supplied.
    pub sigma: Option<(f64, f64)>,
}

fn check_probability(p: f64, which: &str) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "{which} must lie in [0, 1), got {p} (the inversion diverges at 1)"
        )));
    }
    Ok(())
}

/// `|γ|` from `P = 1 − exp(−2πγ²/α)`.
fn block_coupling_from(p: f64, alpha: f64) -> f64 {
    (alpha * -(-p).ln_1p() / (2.0 * PI)).sqrt()
}

fn block_sigma(p: f64, alpha: f64, counts: Counts) -> Result<f64> {
    if counts.trials == 0 || counts.successes > counts.trials {
        return Err(Error::invalid(format!(
            "counts {}/{} are not a valid binomial record",
            counts.successes, counts.trials
        )));
    }
    let n = counts.trials as f64;
    let ph = counts.successes as f64 / n;
    let sp = (ph * (1.0 - ph) / n).sqrt();
    let g = block_coupling_from(p, alpha);
    if g > 0.0 {
        Ok(sp * alpha / (4.0 * PI * g * (1.0 - p)))
    } else {
        // the Jacobian is singular at g = 0; map the interval end instead
        let upper = (p + sp.max(1.0 / n)).min(1.0 - 1e-15);
        Ok(block_coupling_from(upper, alpha))
    }
}

/// Recover `(γx, γy)` from the two asymptotic sector probabilities.
pub fn invert_probabilities(m: &ProbabilityMeasurement) -> Result<CouplingEstimate> {
    check_probability(m.p_plus, "p_plus")?;
    check_probability(m.p_minus, "p_minus")?;
    if !(m.alpha.is_finite() && m.alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive and finite, got {}",
            m.alpha
        )));
    }
    let gp = block_coupling_from(m.p_plus, m.alpha);
    let gm = block_coupling_from(m.p_minus, m.alpha);
    let sigma = match (m.counts_plus, m.counts_minus) {
        (Some(cp), Some(cm)) => {
            let sp = block_sigma(m.p_plus, m.alpha, cp)?;
            let sm = block_sigma(m.p_minus, m.alpha, cm)?;
            let s = 0.5 * sp.hypot(sm);
            Some((s, s))
        }
        (None, None) => None,
        _ => {
            return Err(Error::invalid(
                "counts must be given for both sectors or for neither",
            ))
        }
    };
    Ok(CouplingEstimate {
        gamma_x: 0.5 * (gm + gp),
        gamma_y: 0.5 * (gm - gp),
        gamma_plus: gp,
        gamma_minus: gm,
        sigma,
    })
}

/// `γ²/(ω₁² + γ²) · sin²(√(ω₁² + γ²) t)`.
pub fn rabi_probability(gamma_block: f64, omega1: f64, t: f64) -> f64 {
    let w2 = omega1 * omega1 + gamma_block * gamma_block;
    if w2 == 0.0 {
        return 0.0;
    }
    let s = (w2.sqrt() * t).sin();
    gamma_block * gamma_block / w2 * s * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiTrace {
    /// `(t, p)` samples, `t` strictly increasing, `p ∈ [0, 1]`.
    pub samples: Vec<(f64, f64)>,
    pub omega1: f64,
    pub sector: Sector,
    /// Fit a constant offset on top of the oscillation.
    pub fit_offset: bool,
}

impl RabiTrace {
    pub fn new(samples: Vec<(f64, f64)>, omega1: f64, sector: Sector) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::invalid("a Rabi trace needs at least four samples"));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("trace times must be strictly increasing"));
        }
        if samples
            .iter()
            .any(|&(t, p)| !t.is_finite() || !p.is_finite() || !(-0.5..=1.5).contains(&p))
        {
            return Err(Error::invalid("trace contains non-finite or out-of-range samples"));
        }
        if !omega1.is_finite() {
            return Err(Error::invalid("omega1 must be finite"));
        }
        Ok(Self {
            samples,
            omega1,
            sector,
            fit_offset: false,
        })
    }

    pub fn with_offset(mut self) -> Self {
        self.fit_offset = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiFit {
    pub gamma_block_abs: f64,
    /// Relative disagreement between the couplings implied by the fitted
    /// amplitude and by the fitted frequency alone (`NaN` at `ω₁ = 0`,
    /// where the amplitude carries no information).
    pub fit_residual: f64,
    /// Root-mean-square deviation of the samples from the final model.
    pub rms: f64,
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
}

/// Linear least squares for `c + u cos(ωt) + v sin(ωt)`; returns the
/// coefficients and the residual sum of squares.
fn sinusoid_lsq(samples: &[(f64, f64)], w: f64) -> ([f64; 3], f64) {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(t, p) in samples {
        let row = Vector3::new(1.0, (w * t).cos(), (w * t).sin());
        ata += row * row.transpose();
        atb += row * p;
    }
    let x = ata
        .cholesky()
        .map(|ch| ch.solve(&atb))
        .unwrap_or_else(Vector3::zeros);
    let rss = samples
        .iter()
        .map(|&(t, p)| {
            let r = p - (x[0] + x[1] * (w * t).cos() + x[2] * (w * t).sin());
            r * r
        })
        .sum();
    ([x[0], x[1], x[2]], rss)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

struct Model {
    omega1: f64,
    fit_offset: bool,
}

impl Model {
    // parameters (γ, φ, c); p = c + A sin²(Ωt + φ)
    fn eval(&self, x: &Vector3<f64>, t: f64) -> (f64, Vector3<f64>) {
        let (g, phi, c) = (x[0], x[1], if self.fit_offset { x[2] } else { 0.0 });
        let w1s = self.omega1 * self.omega1;
        let w2 = w1s + g * g;
        let big = w2.sqrt();
        let amp = g * g / w2;
        let th = big * t + phi;
        let s = th.sin();
        let s2 = (2.0 * th).sin();
        let damp = 2.0 * g * w1s / (w2 * w2);
        let dbig = g / big;
        let grad = Vector3::new(
            damp * s * s + amp * s2 * t * dbig,
            amp * s2,
            if self.fit_offset { 1.0 } else { 0.0 },
        );
        (c + amp * s * s, grad)
    }

    fn cost(&self, x: &Vector3<f64>, samples: &[(f64, f64)]) -> f64 {
        samples
            .iter()
            .map(|&(t, p)| {
                let r = p - self.eval(x, t).0;
                r * r
            })
            .sum()
    }

    fn levenberg_marquardt(&self, mut x: Vector3<f64>, samples: &[(f64, f64)]) -> Vector3<f64> {
        let mut lambda = 1e-3;
        let mut cost = self.cost(&x, samples);
        for _ in 0..200 {
            let mut jtj = Matrix3::<f64>::zeros();
            let mut jtr = Vector3::<f64>::zeros();
            for &(t, p) in samples {
                let (m, g) = self.eval(&x, t);
                jtj += g * g.transpose();
                jtr += g * (p - m);
            }
            if !self.fit_offset {
                jtj[(2, 2)] = 1.0;
            }
            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj;
                for k in 0..3 {
                    a[(k, k)] *= 1.0 + lambda;
                }
                let Some(step) = a.lu().solve(&jtr) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = x + step;
                let c = self.cost(&trial, samples);
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    x = trial;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        x
    }
}

/// Estimate `|γ|` from a constant-field Rabi trace.
///
/// A free sinusoid is located first (linear least squares for each trial
/// frequency, a coarse scan, then golden-section refinement); its frequency
/// seeds a nonlinear least-squares fit of `A sin²(Ωt + φ) (+ c)` with `A`
/// and `Ω` both determined by `γ`.
pub fn fit_rabi_trace(trace: &RabiTrace) -> Result<RabiFit> {
    const MIN_PERIODS: f64 = 2.0;
    const MIN_SAMPLES_PER_PERIOD: f64 = 16.0;
    let s = &trace.samples;
    let span = s[s.len() - 1].0 - s[0].0;
    let dt = span / (s.len() - 1) as f64;

    let mean = s.iter().map(|x| x.1).sum::<f64>() / s.len() as f64;
    let spread = s.iter().map(|x| (x.1 - mean).powi(2)).sum::<f64>() / s.len() as f64;
    if spread.sqrt() < 1e-9 {
        return Err(Error::Estimation(
            "trace is flat: no oscillation, coupling is unidentifiable".into(),
        ));
    }

    // p oscillates at angular frequency 2Ω; scan that frequency
    let w_lo = 2.0 * PI * MIN_PERIODS / span;
    let w_hi = 2.0 * PI / (MIN_SAMPLES_PER_PERIOD * dt);
    if w_lo >= w_hi {
        return Err(Error::Estimation(format!(
            "trace too short: {} samples over t = {span} cannot show {MIN_PERIODS} periods at {MIN_SAMPLES_PER_PERIOD} samples per period",
            s.len()
        )));
    }
    let w_start = w_lo.max(0.999 * 2.0 * trace.omega1.abs()).min(w_hi);
    let step = PI / (8.0 * span);
    let mut best = (f64::INFINITY, w_start);
    let mut w = w_start;
    while w <= w_hi {
        let (_, rss) = sinusoid_lsq(s, w);
        if rss < best.0 {
            best = (rss, w);
        }
        w += step;
    }
    let w_free = golden_min(|w| sinusoid_lsq(s, w).1, best.1 - step, best.1 + step);
    let ([c0, u, v], rss_free) = sinusoid_lsq(s, w_free);
    let amp_free = 2.0 * u.hypot(v);
    let noise = (rss_free / s.len() as f64).sqrt();
    if amp_free < 3.0 * noise || amp_free < 1e-9 {
        return Err(Error::Estimation(format!(
            "oscillation amplitude {amp_free:e} is below the noise floor {noise:e}"
        )));
    }
    if w_free <= w_lo * 1.0001 || w_free >= w_hi * 0.9999 {
        return Err(Error::Estimation(format!(
            "fitted frequency {w_free} sits at the edge of the resolvable band [{w_lo}, {w_hi}]: trace too short or too coarse"
        )));
    }

    let big_free = w_free / 2.0;
    let w1s = trace.omega1 * trace.omega1;
    let g_freq = (big_free * big_free - w1s).max(0.0).sqrt();
    let phi0 = 0.5 * v.atan2(-u);
    let model = Model {
        omega1: trace.omega1,
        fit_offset: trace.fit_offset,
    };
    let offset0 = if trace.fit_offset { c0 - amp_free / 2.0 } else { 0.0 };
    let x = model.levenberg_marquardt(Vector3::new(g_freq.max(1e-6), phi0, offset0), s);
    let g = x[0].abs();
    let big = (w1s + g * g).sqrt();
    let amp = g * g / (w1s + g * g);
    let rms = (model.cost(&x, s) / s.len() as f64).sqrt();

    // independent coupling read off the free amplitude
    let fit_residual = if trace.omega1 == 0.0 || amp_free >= 1.0 {
        f64::NAN
    } else {
        let g_amp = trace.omega1.abs() * (amp_free / (1.0 - amp_free)).sqrt();
        (g_amp - g_freq).abs() / g.max(1e-300)
    };

    let periods = span * big / PI;
    if periods < MIN_PERIODS {
        return Err(Error::Estimation(format!(
            "trace covers {periods:.2} periods, at least {MIN_PERIODS} needed"
        )));
    }

    Ok(RabiFit {
        gamma_block_abs: g,
        fit_residual,
        rms,
        frequency: big,
        amplitude: amp,
        phase: x[1],
        offset: if trace.fit_offset { x[2] } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::lmsz_probability;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(g: f64, w1: f64, t0: f64, n: usize, dt: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                (t, rabi_probability(g, w1, t))
            })
            .collect()
    }

    #[test]
    fn closed_form_inversions() {
        let q = 1.0 - (-1.0f64).exp();
        let e = invert_probabilities(&ProbabilityMeasurement::new(q, q, 2.0 * PI)).unwrap();
        assert!((e.gamma_x - 1.0).abs() < 1e-12);
        assert!(e.gamma_y.abs() < 1e-12);

        let pm = 1.0 - (-2.0 * PI).exp();
        let e = invert_probabilities(&ProbabilityMeasurement::new(0.0, pm, 1.0)).unwrap();
        assert!((e.gamma_x - 0.5).abs() < 1e-12);
        assert!((e.gamma_y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_certain_transitions() {
        assert!(invert_probabilities(&ProbabilityMeasurement::new(1.0, 0.3, 1.0)).is_err());
        assert!(invert_probabilities(&ProbabilityMeasurement::new(0.2, 1.2, 1.0)).is_err());
        assert!(invert_probabilities(&ProbabilityMeasurement::new(0.2, 0.3, 0.0)).is_err());
    }

    #[test]
    fn round_trip_through_the_closed_form() {
        for &(gp, gm, alpha) in &[(0.3, 1.1, 2.0), (0.0, 0.4, 0.5), (0.9, 0.2, 3.3)] {
            let m = ProbabilityMeasurement::new(
                lmsz_probability(gp, alpha).unwrap(),
                lmsz_probability(gm, alpha).unwrap(),
                alpha,
            );
            let e = invert_probabilities(&m).unwrap();
            assert!((e.gamma_plus - gp).abs() < 1e-12);
            assert!((e.gamma_minus - gm).abs() < 1e-12);
            assert!(e.gamma_x >= e.gamma_y);
        }
    }

    #[test]
    fn binomial_errors_follow_the_jacobian() {
        let alpha = 1.0;
        let g = 0.3f64;
        let p = lmsz_probability(g, alpha).unwrap();
        let n = 10_000u64;
        let k = (p * n as f64).round() as u64;
        let m = ProbabilityMeasurement::new(p, p, alpha).with_counts(
            Counts { successes: k, trials: n },
            Counts { successes: k, trials: n },
        );
        let (sx, sy) = invert_probabilities(&m).unwrap().sigma.unwrap();
        // finite-difference derivative of g(P)
        let h = 1e-7;
        let dg = (block_coupling_from(p + h, alpha) - block_coupling_from(p - h, alpha)) / (2.0 * h);
        let ph = k as f64 / n as f64;
        let sp = (ph * (1.0 - ph) / n as f64).sqrt();
        let expected = 0.5 * (2.0f64).sqrt() * dg * sp;
        assert!((sx - expected).abs() / expected < 1e-6);
        assert_eq!(sx, sy);

        let zero = ProbabilityMeasurement::new(0.0, p, alpha).with_counts(
            Counts { successes: 0, trials: n },
            Counts { successes: k, trials: n },
        );
        let s = invert_probabilities(&zero).unwrap().sigma.unwrap();
        assert!(s.0.is_finite() && s.0 > 0.0);
    }

    #[test]
    fn rabi_formula_limits() {
        assert!((rabi_probability(0.8, 0.0, 1.3) - (0.8f64 * 1.3).sin().powi(2)).abs() < 1e-15);
        assert_eq!(rabi_probability(0.0, 1.0, 4.0), 0.0);
        let t = PI / (2.0 * 2f64.sqrt());
        assert!((rabi_probability(1.0, 1.0, t) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noiseless_fit_recovers_coupling() {
        let s = synthetic(0.7, 1.0, 0.0, 800, 0.02);
        let fit = fit_rabi_trace(&RabiTrace::new(s, 1.0, Sector::Plus).unwrap()).unwrap();
        assert!((fit.gamma_block_abs - 0.7).abs() < 1e-6, "{fit:?}");
        assert!(fit.fit_residual < 1e-6);
    }

    #[test]
    fn fit_ignores_a_time_offset() {
        let a = fit_rabi_trace(&RabiTrace::new(synthetic(0.7, 1.0, 0.0, 800, 0.02), 1.0, Sector::Plus).unwrap())
            .unwrap();
        let b = fit_rabi_trace(&RabiTrace::new(synthetic(0.7, 1.0, 3.7, 800, 0.02), 1.0, Sector::Plus).unwrap())
            .unwrap();
        assert!((a.gamma_block_abs - b.gamma_block_abs).abs() < 1e-8);
    }

    #[test]
    fn noisy_fits_stay_within_two_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.01).unwrap();
        for _ in 0..100 {
            let s: Vec<(f64, f64)> = synthetic(0.7, 1.0, 0.0, 800, 0.02)
                .into_iter()
                .map(|(t, p)| (t, p + noise.sample(&mut rng)))
                .collect();
            let fit = fit_rabi_trace(&RabiTrace::new(s, 1.0, Sector::Minus).unwrap().with_offset())
                .unwrap();
            assert!((fit.gamma_block_abs - 0.7).abs() / 0.7 < 0.02, "{fit:?}");
        }
    }

    #[test]
    fn unidentifiable_traces_are_errors() {
        let flat: Vec<(f64, f64)> = (0..200).map(|k| (k as f64 * 0.05, 0.0)).collect();
        assert!(matches!(
            fit_rabi_trace(&RabiTrace::new(flat, 1.0, Sector::Plus).unwrap()),
            Err(Error::Estimation(_))
        ));
        // a fraction of one period
        let short = synthetic(0.7, 1.0, 0.0, 100, 0.005);
        assert!(fit_rabi_trace(&RabiTrace::new(short, 1.0, Sector::Plus).unwrap()).is_err());
        // five samples per period
        let coarse = synthetic(0.7, 1.0, 0.0, 60, 0.45);
        assert!(fit_rabi_trace(&RabiTrace::new(coarse, 1.0, Sector::Plus).unwrap()).is_err());
    }
}
