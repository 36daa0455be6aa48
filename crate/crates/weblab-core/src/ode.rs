//! Shared numerical kernels: an embedded Dormand–Prince 5(4) stepper,
//! adaptive Gauss–Legendre quadrature and Brent root bracketing.

use crate::{Error, Result};

/// Integration controls for the adaptive stepper.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; keeps observers (event detection, domain
    /// checks) from being skipped over.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 100_000,
            max_step: f64::INFINITY,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dy/dt = f(t, y) from `t0` to `t1` with an embedded 5(4)
/// pair. `f` may fail (singular field), which aborts the integration.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    opts: &OdeOptions,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut observer = |_: f64, _: &[f64; N]| true;
    integrate_observed(&mut f, t0, t1, y0, opts, &mut observer).map(|(y, _)| y)
}

/// Integrate with a per-step observer; the observer may return `false`
/// to stop early, in which case the state at the interrupting step
/// boundary is returned together with its time.
pub fn integrate_observed<const N: usize, F, O>(
    f: &mut F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    observer: &mut O,
) -> Result<([f64; N], f64)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    O: FnMut(f64, &[f64; N]) -> bool,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, t0));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = (span.abs() * 0.1).min(0.1).max(1e-8) * dir;
    let mut k = [[0.0; N]; 7];

    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok((y, t));
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }

        k[0] = f(t, &y)?;
        for s in 0..6 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s + 1] = f(t + C[s] * h, &ys)?;
        }

        let mut y5 = y;
        let mut err = 0.0_f64;
        for i in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] += h * d5;
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (d5 - d4)).abs() / sc);
        }

        if err <= 1.0 {
            t += h;
            y = y5;
            if !observer(t, &y) {
                return Ok((y, t));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() > opts.max_step {
            h = opts.max_step * dir;
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Integration(format!(
                "step underflow at t = {t:.6e} (err = {err:.3e})"
            )));
        }
    }
    Err(Error::Integration("step budget exhausted".into()))
}

/// Brent root bracketing for a scalar function on [a, b] with f(a)f(b) ≤ 0.
pub fn brent<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::Integration("root not bracketed".into()));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let cond = !( (lo.min(b) < s && s < lo.max(b))
            && (!mflag || (s - b).abs() < 0.5 * (b - c).abs())
            && (mflag || (s - b).abs() < 0.5 * d.abs()) );
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s)?;
        d = c - b;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}

// 16-point Gauss–Legendre nodes/weights on [-1, 1] (positive half;
// mirrored below).
const GL16_X: [f64; 8] = [
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

fn gl16<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        acc += GL16_W[i] * (f(mid + half * GL16_X[i]) + f(mid - half * GL16_X[i]));
    }
    acc * half
}

/// Adaptive Gauss–Legendre quadrature by interval bisection.
pub fn quad_adaptive<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = gl16(f, a, mid);
        let right = gl16(f, mid, b);
        if depth >= 24 || (left + right - whole).abs() <= tol {
            left + right
        } else {
            rec(f, a, mid, left, 0.5 * tol, depth + 1) + rec(f, mid, b, right, 0.5 * tol, depth + 1)
        }
    }
    let whole = gl16(f, a, b);
    rec(f, a, b, whole, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let y = integrate(
            |_, y: &[f64; 1]| Ok([-y[0]]),
            0.0,
            2.0,
            [1.0],
            &OdeOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(y[0], (-2.0_f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn circular_orbit_preserves_radius() {
        let y = integrate(
            |_, y: &[f64; 2]| Ok([-y[1], y[0]]),
            0.0,
            10.0,
            [1.0, 0.0],
            &OdeOptions::default(),
        )
        .unwrap();
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        assert_relative_eq!(r, 1.0, epsilon = 1e-8);
        assert_relative_eq!(y[0], 10.0_f64.cos(), epsilon = 1e-8);
    }

    #[test]
    fn zero_span_is_identity() {
        let y = integrate(
            |_, y: &[f64; 1]| Ok([y[0]]),
            1.0,
            1.0,
            [3.5],
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(y[0], 3.5);
    }

    #[test]
    fn brent_finds_cosine_root() {
        let r = brent(|x| Ok(x.cos()), 1.0, 2.0, 1e-14, 100).unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_of_smooth_function() {
        let v = quad_adaptive(&mut |x: f64| (x * x).exp(), 0.0, 1.0, 1e-13);
        // reference: ∫₀¹ e^{x²} dx
        assert_relative_eq!(v, 1.4626517459071816, epsilon = 1e-12);
    }
}
