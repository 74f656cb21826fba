//! Dormand–Prince 5(4) integrator for linear complex systems
//! `dY/dτ = f(τ, Y)` with `Y` a small fixed-size complex matrix.
//!
//! Step size follows a PI controller on the embedded error estimate; results
//! are reported on a caller-supplied grid through the fourth-order continuous
//! extension of the method.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 50_000_000,
        }
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn cx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Integrate from `(tau0, y0)` and return the solution at every point of
/// `grid`, which must be non-decreasing and start at or after `tau0`.
pub fn integrate<const R: usize, const C: usize, F>(
    mut rhs: F,
    tau0: f64,
    y0: SMatrix<Complex64, R, C>,
    grid: &[f64],
    control: StepControl,
) -> Result<Vec<SMatrix<Complex64, R, C>>>
where
    F: FnMut(f64, &SMatrix<Complex64, R, C>) -> Result<SMatrix<Complex64, R, C>>,
{
    type M<const R: usize, const C: usize> = SMatrix<Complex64, R, C>;

    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if grid[0] < tau0 || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "output grid must be non-decreasing and start at the initial time",
        ));
    }

    let mut out: Vec<M<R, C>> = Vec::with_capacity(grid.len());
    let mut next = 0;
    while next < grid.len() && grid[next] <= tau0 {
        out.push(y0);
        next += 1;
    }
    let t_end = grid[grid.len() - 1];

    let mut t = tau0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;

    // initial step from the scale of the derivative
    let mut h = {
        let d0 = max_abs(&y).max(1e-300);
        let d1 = max_abs(&k1).max(1e-300);
        let h0 = 0.01 * d0 / d1;
        h0.min(0.1).min((t_end - t).max(0.0)).max(1e-10)
    };
    let mut err_old: f64 = 1e-4;
    let mut rejected = false;
    let mut steps = 0usize;

    while t < t_end {
        steps += 1;
        if steps > control.max_steps {
            return Err(Error::Integration {
                tau: t,
                reason: format!("exceeded {} steps", control.max_steps),
            });
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min || !h.is_finite() {
            return Err(Error::Integration {
                tau: t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        if t + h >= t_end || t + 1.01 * h > t_end {
            h = t_end - t;
        }

        let k2 = rhs(t + C2 * h, &(y + k1 * cx(h * A21)))?;
        let k3 = rhs(t + C3 * h, &(y + k1 * cx(h * A31) + k2 * cx(h * A32)))?;
        let k4 = rhs(
            t + C4 * h,
            &(y + k1 * cx(h * A41) + k2 * cx(h * A42) + k3 * cx(h * A43)),
        )?;
        let k5 = rhs(
            t + C5 * h,
            &(y + k1 * cx(h * A51) + k2 * cx(h * A52) + k3 * cx(h * A53) + k4 * cx(h * A54)),
        )?;
        let k6 = rhs(
            t + h,
            &(y + k1 * cx(h * A61)
                + k2 * cx(h * A62)
                + k3 * cx(h * A63)
                + k4 * cx(h * A64)
                + k5 * cx(h * A65)),
        )?;
        let y_new = y
            + k1 * cx(h * A71)
            + k3 * cx(h * A73)
            + k4 * cx(h * A74)
            + k5 * cx(h * A75)
            + k6 * cx(h * A76);
        let k7 = rhs(t + h, &y_new)?;

        let err_vec = k1 * cx(h * E1)
            + k3 * cx(h * E3)
            + k4 * cx(h * E4)
            + k5 * cx(h * E5)
            + k6 * cx(h * E6)
            + k7 * cx(h * E7);
        let mut err: f64 = 0.0;
        for ((e, a), b) in err_vec.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = control.atol + control.rtol * a.norm().max(b.norm());
            let r = e.norm() / sc;
            // NaN must not be swallowed by f64::max
            err = if r.is_nan() { f64::NAN } else { err.max(r) };
        }
        if !err.is_finite() || y_new.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Integration {
                tau: t,
                reason: "non-finite error estimate".into(),
            });
        }

        if err <= 1.0 {
            let t_new = t + h;
            if next < grid.len() && grid[next] <= t_new {
                let r2 = y_new - y;
                let r3 = k1 * cx(h) - r2;
                let r4 = r2 - k7 * cx(h) - r3;
                let r5 = (k1 * cx(D1)
                    + k3 * cx(D3)
                    + k4 * cx(D4)
                    + k5 * cx(D5)
                    + k6 * cx(D6)
                    + k7 * cx(D7))
                    * cx(h);
                while next < grid.len() && grid[next] <= t_new {
                    let th = ((grid[next] - t) / h).clamp(0.0, 1.0);
                    let th1 = 1.0 - th;
                    let val = if grid[next] == t_new {
                        y_new
                    } else {
                        y + (r2 + (r3 + (r4 + r5 * cx(th1)) * cx(th)) * cx(th1)) * cx(th)
                    };
                    out.push(val);
                    next += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;

            let fac11 = err.max(1e-16).powf(0.17);
            let mut fac = (fac11 / err_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
            if rejected {
                fac = fac.max(1.0);
            }
            h /= fac;
            err_old = err.max(1e-4);
            rejected = false;
        } else {
            let fac = (err.powf(0.17) / 0.9).min(5.0);
            h /= fac;
            rejected = true;
        }
    }

    // any grid points left coincide with t_end up to rounding
    while out.len() < grid.len() {
        out.push(y);
    }
    Ok(out)
}

fn max_abs<const R: usize, const C: usize>(m: &SMatrix<Complex64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    // y' = -i w y has y = exp(-i w t)
    #[test]
    fn scalar_rotation_is_accurate() {
        let w = 3.0;
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let out = integrate(
            |_, y: &SMatrix<Complex64, 1, 1>| Ok(y * Complex64::new(0.0, -w)),
            0.0,
            SMatrix::<Complex64, 1, 1>::new(Complex64::new(1.0, 0.0)),
            &grid,
            StepControl::with_tolerance(1e-12),
        )
        .unwrap();
        for (t, y) in grid.iter().zip(&out) {
            let exact = Complex64::from_polar(1.0, -w * t);
            assert!((y[0] - exact).norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn dense_output_between_steps() {
        // time-dependent frequency: y = exp(-i t^2 / 2)
        let grid: Vec<f64> = (0..=1000).map(|k| -5.0 + k as f64 * 0.01).collect();
        let out = integrate(
            |t, y: &Vector2<Complex64>| Ok(y * Complex64::new(0.0, -t)),
            -5.0,
            Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            &grid,
            StepControl::with_tolerance(1e-11),
        )
        .unwrap();
        for (t, y) in grid.iter().zip(&out) {
            let exact = Complex64::from_polar(1.0, -(t * t - 25.0) / 2.0);
            assert!((y[0] - exact).norm() < 1e-8, "t = {t}");
            assert_eq!(y[1], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn underflow_reports_last_good_time() {
        let grid = [0.0, 1.0, 2.0];
        let res = integrate(
            |t, y: &SMatrix<Complex64, 1, 1>| {
                if t > 0.5 {
                    Ok(y * Complex64::new(f64::INFINITY, 0.0))
                } else {
                    Ok(*y)
                }
            },
            0.0,
            SMatrix::<Complex64, 1, 1>::new(Complex64::new(1.0, 0.0)),
            &grid,
            StepControl::with_tolerance(1e-10),
        );
        match res {
            Err(Error::Integration { tau, .. }) => assert!(tau <= 0.5 + 1e-12),
            other => panic!("expected integration error, got {other:?}"),
        }
    }
}
