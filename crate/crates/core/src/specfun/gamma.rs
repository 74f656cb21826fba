//! Complex Gamma function: Lanczos approximation for `Re z ≥ 1/2`, reflection
//! below. Everything is computed as a logarithm first so large imaginary
//! parts neither overflow nor underflow prematurely.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_R: f64 = 10.900511;
#[allow(clippy::excessive_precision)]
const LANCZOS_D: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];
// ln(2·√(e/π))
const LN_TWO_SQRT_E_OVER_PI: f64 = 0.6207822376352452;

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// `ln Γ(z)` on some branch (the imaginary part is only meaningful modulo
/// `2π`, which is all that `exp` needs).
pub fn ln_gamma_complex(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::invalid(format!("gamma argument must be finite, got {z}")));
    }
    if is_pole(z) {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    if z.re < 0.5 {
        // Γ(z) Γ(1 − z) = π / sin(πz)
        return Ok(Complex64::from(PI.ln()) - ln_sin_pi(z) - ln_gamma_lanczos(1.0 - z));
    }
    Ok(ln_gamma_lanczos(z))
}

pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    let lg = ln_gamma_complex(z)?;
    let g = lg.exp();
    if g.re.is_finite() && g.im.is_finite() {
        Ok(g)
    } else {
        Err(Error::Range(format!("Gamma({z}) overflows")))
    }
}

/// `1/Γ(z)`, entire, zero at the poles of Γ.
pub fn recip_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok((-ln_gamma_complex(z)?).exp())
}

fn ln_gamma_lanczos(z: Complex64) -> Complex64 {
    let mut s = Complex64::from(LANCZOS_D[0]);
    for (k, d) in LANCZOS_D.iter().enumerate().skip(1) {
        s += *d / (z + (k as f64 - 1.0));
    }
    let zh = z - 0.5;
    s.ln() + LN_TWO_SQRT_E_OVER_PI + zh * ((zh + LANCZOS_R).ln() - 1.0)
}

fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 20.0 {
        return (z * PI).sin().ln();
    }
    // keep the dominant exponential of sin(πz) = (e^{iπz} − e^{−iπz})/2i
    // analytically and the other one as a small correction
    let i = Complex64::new(0.0, 1.0);
    if z.im > 0.0 {
        -i * PI * z + (i / 2.0).ln() + (1.0 - (2.0 * i * PI * z).exp()).ln()
    } else {
        i * PI * z + (-i / 2.0).ln() + (1.0 - (-2.0 * i * PI * z).exp()).ln()
    }
}
