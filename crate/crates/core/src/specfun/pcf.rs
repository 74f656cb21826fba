//! Parabolic cylinder function `D_ν(z)` for complex order and argument.
//!
//! Inside the crossover radius the Kummer representation
//!
//! ```text
//! D_ν(z) = 2^{ν/2} e^{−z²/4} [ √π/Γ((1−ν)/2) · M(−ν/2, 1/2, z²/2)
//!                             − √(2π)/Γ(−ν/2) · z · M((1−ν)/2, 3/2, z²/2) ]
//! ```
//!
//! is summed in double-double arithmetic: on the rays `arg z = ±π/4, ±3π/4`
//! the series argument is imaginary and the terms cancel to about
//! `e^{−|z|²/2}`. Outside, the large-`|z|` expansion is used, with the
//! exponentially large companion term added for `|arg z| > π/2`.

use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

use super::dd::CDd;
use super::gamma::recip_gamma;
use crate::error::{Error, Result};

/// Numerical knobs of [`pcf_d_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcfConfig {
    /// `|z|` below which the Kummer series is used.
    pub crossover_radius: f64,
    pub max_series_terms: usize,
    pub max_asymptotic_terms: usize,
    /// Overflow guard on `|z|`.
    pub z_max: f64,
}

impl Default for PcfConfig {
    fn default() -> Self {
        Self {
            crossover_radius: 9.0,
            max_series_terms: 2000,
            max_asymptotic_terms: 400,
            z_max: 200.0,
        }
    }
}

pub fn pcf_d(nu: Complex64, z: Complex64) -> Result<Complex64> {
    pcf_d_with(nu, z, &PcfConfig::default())
}

pub fn pcf_d_with(nu: Complex64, z: Complex64, config: &PcfConfig) -> Result<Complex64> {
    let finite = |w: Complex64| w.re.is_finite() && w.im.is_finite();
    if !finite(nu) || !finite(z) {
        return Err(Error::invalid(format!(
            "parabolic cylinder arguments must be finite, got nu = {nu}, z = {z}"
        )));
    }
    if z.norm() > config.z_max {
        return Err(Error::Range(format!(
            "|z| = {} exceeds the guard z_max = {}",
            z.norm(),
            config.z_max
        )));
    }
    if z.norm() <= config.crossover_radius {
        series(nu, z, config)
    } else {
        asymptotic(nu, z, config)
    }
}

fn checked_exp(w: Complex64) -> Result<Complex64> {
    if w.re > 709.0 {
        return Err(Error::Range(format!("D_nu overflows (log-modulus {})", w.re)));
    }
    Ok(w.exp())
}

/// `M(a, b, x)` in double-double; `b` is real and positive.
fn kummer(a: Complex64, b: f64, x: Complex64, cap: usize) -> Result<CDd> {
    let one = CDd::from_c64(Complex64::new(1.0, 0.0));
    let mut term = one;
    let mut sum = one;
    let xr = x.norm();
    let xd = CDd::from_c64(x);
    for n in 0..cap {
        let nf = n as f64;
        // the ratio must not be rounded to double: the relative error would
        // compound over the terms and be amplified by their size
        term = (term.mul_c64(a + nf) * xd).div_f64((b + nf) * (nf + 1.0));
        sum = sum + term;
        let t = term.norm_hi();
        if nf > xr && (t <= 1e-33 * sum.norm_hi() || t == 0.0) {
            return Ok(sum);
        }
    }
    Err(Error::Range(format!(
        "Kummer series did not converge in {cap} terms (|x| = {xr})"
    )))
}

fn series(nu: Complex64, z: Complex64, config: &PcfConfig) -> Result<Complex64> {
    let x = z * z / 2.0;
    let c1 = recip_gamma((1.0 - nu) / 2.0)? * PI.sqrt();
    let c2 = recip_gamma(-nu / 2.0)? * (2.0 * PI).sqrt() * z;
    let mut acc = CDd::default();
    if c1 != Complex64::new(0.0, 0.0) {
        acc = acc + kummer(-nu / 2.0, 0.5, x, config.max_series_terms)?.mul_c64(c1);
    }
    if c2 != Complex64::new(0.0, 0.0) {
        acc = acc - kummer((1.0 - nu) / 2.0, 1.5, x, config.max_series_terms)?.mul_c64(c2);
    }
    let bracket = acc.to_c64();
    if bracket == Complex64::new(0.0, 0.0) {
        return Ok(bracket);
    }
    checked_exp(nu * (LN_2 / 2.0) - z * z / 4.0 + bracket.ln())
}

/// `Σ_s sign^s (c)_{2s} / (s! (2z²)^s)`, truncated at the smallest term.
fn asymptotic_sum(c: Complex64, sign: f64, z2: Complex64, cap: usize) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = 1.0;
    for s in 0..cap {
        let sf = s as f64;
        term *= sign * (c + 2.0 * sf) * (c + 2.0 * sf + 1.0) / ((sf + 1.0) * 2.0 * z2);
        let t = term.norm();
        if t > last {
            break;
        }
        sum += term;
        last = t;
        if t <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn asymptotic(nu: Complex64, z: Complex64, config: &PcfConfig) -> Result<Complex64> {
    let z2 = z * z;
    let lnz = z.ln();
    let cap = config.max_asymptotic_terms;
    let s1 = asymptotic_sum(-nu, -1.0, z2, cap);
    let mut result = checked_exp(-z2 / 4.0 + nu * lnz + s1.ln())?;
    let ph = z.arg();
    if ph.abs() > PI / 2.0 {
        let rg = recip_gamma(-nu)?;
        if rg != Complex64::new(0.0, 0.0) {
            let side = if ph > 0.0 { 1.0 } else { -1.0 };
            let s2 = asymptotic_sum(nu + 1.0, 1.0, z2, cap);
            let log_mag = Complex64::new(0.0, side * PI) * nu + z2 / 4.0 - (nu + 1.0) * lnz
                + (rg * (2.0 * PI).sqrt() * s2).ln();
            result -= checked_exp(log_mag)?;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma::gamma_complex;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn order_zero_and_one_closed_forms() {
        let z = c(1.3, 0.2);
        assert!(rel(pcf_d(c(0.0, 0.0), z).unwrap(), (-z * z / 4.0).exp()) < 1e-12);
        let z = c(0.0, 0.5);
        assert!(rel(pcf_d(c(1.0, 0.0), z).unwrap(), z * (-z * z / 4.0).exp()) < 1e-12);
        // and past the crossover
        let z = c(9.5, -3.0);
        assert!(rel(pcf_d(c(1.0, 0.0), z).unwrap(), z * (-z * z / 4.0).exp()) < 1e-12);
    }

    #[test]
    fn value_at_origin() {
        let nu = c(0.0, 0.3);
        let expected =
            (nu * (LN_2 / 2.0)).exp() * PI.sqrt() / gamma_complex((1.0 - nu) / 2.0).unwrap();
        assert!(rel(pcf_d(nu, c(0.0, 0.0)).unwrap(), expected) < 1e-13);
    }

    #[test]
    fn recurrence_in_the_order() {
        // D_{ν+1}(z) − z D_ν(z) + ν D_{ν−1}(z) = 0
        for &(nr, ni, zr, zi) in &[
            (0.0, 0.7, 2.0, -2.0),
            (0.0, 2.0, -6.0, 6.0),
            (0.3, -1.0, 12.0, -12.0),
            (0.0, 1.1, -20.0, 20.0),
        ] {
            let nu = c(nr, ni);
            let z = c(zr, zi);
            let d0 = pcf_d(nu, z).unwrap();
            let dp = pcf_d(nu + 1.0, z).unwrap();
            let dm = pcf_d(nu - 1.0, z).unwrap();
            let scale = dp.norm().max((z * d0).norm());
            assert!((dp - z * d0 + nu * dm).norm() / scale < 1e-10, "nu = {nu}, z = {z}");
        }
    }

    #[test]
    fn branches_agree_across_the_crossover() {
        let inner = PcfConfig::default();
        let outer = PcfConfig {
            crossover_radius: 0.0,
            ..inner
        };
        for beta in [0.05, 0.5, 2.0, 10.0] {
            for ph in [-PI / 4.0, 3.0 * PI / 4.0] {
                for r in [9.0, 9.5] {
                    let nu = c(0.0, beta);
                    let z = Complex64::from_polar(r, ph);
                    let a = series(nu, z, &inner).unwrap();
                    let b = pcf_d_with(nu, z, &outer).unwrap();
                    assert!(rel(a, b) < 1e-9, "beta {beta} ph {ph} r {r}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn guard_and_bad_input() {
        assert!(matches!(
            pcf_d(c(0.0, 1.0), c(300.0, 0.0)),
            Err(Error::Range(_))
        ));
        assert!(pcf_d(c(f64::NAN, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn matches_high_precision_reference_values() {
        // 30-digit reference evaluations: (nu, z, D_nu(z))
        let cases = [
            ((0.0, 0.3), (3.0, -3.0), (0.27920719925413597, -1.2242915525219479)),
            ((0.0, 0.11), (-5.0, 5.0), (0.78241481534384417, 0.084563838952210431)),
            ((0.0, 2.0), (7.0, -7.0), (-3.2123845735291405, -3.5179941728376932)),
            ((-1.0, 2.0), (-7.0, 7.0), (-2.574068101097406, 2.1739301488829922)),
            ((0.0, 0.5), (15.0, -15.0), (0.8845820331689696, 1.1867459087871472)),
            ((0.0, 1.0), (-30.0, 30.0), (-0.019642888790571878, 0.059528314824951432)),
            ((0.0, 10.0), (6.0, -6.0), (-1629.5774307076473, 1822.8127029664395)),
            ((0.0, 0.05), (70.7, -70.7), (0.34517064706437733, -0.98110052401165555)),
            ((-1.0, 1.0), (-40.0, 40.0), (2.1807069854655818, -0.19679697825735228)),
        ];
        for ((nr, ni), (zr, zi), (dr, di)) in cases {
            let got = pcf_d(c(nr, ni), c(zr, zi)).unwrap();
            let want = c(dr, di);
            assert!(rel(got, want) < 1e-10, "nu = {nr}+{ni}i, z = {zr}+{zi}i: {got} vs {want}");
        }
    }
}
