//! Interpolation utilities: periodic cubic splines on uniform grids (with a
//! cyclic tridiagonal solve), natural cubic interpolation for base families,
//! and monotone circle-lift inversion.

use crate::error::{Error, Result};

/// C2 periodic cubic spline through uniform samples of a `2*pi`-periodic
/// function, `x_i = 2*pi*i/n`.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    /// second derivatives at the nodes
    m2: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 4 {
            return Err(Error::InvalidGrid(format!(
                "periodic spline needs >= 4 nodes, got {n}"
            )));
        }
        let h = std::f64::consts::TAU / n as f64;
        // (1/6) m_{i-1} + (2/3) m_i + (1/6) m_{i+1} = (y_{i+1} - 2 y_i + y_{i-1}) / h^2
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let ym = values[(i + n - 1) % n];
                let yp = values[(i + 1) % n];
                (yp - 2.0 * values[i] + ym) / (h * h)
            })
            .collect();
        let m2 = solve_cyclic_tridiagonal(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, &rhs)?;
        Ok(Self { values: values.to_vec(), m2, h })
    }

    fn locate(&self, x: f64) -> (usize, usize, f64) {
        let n = self.values.len();
        let span = std::f64::consts::TAU;
        let xr = x.rem_euclid(span);
        let mut i = (xr / self.h).floor() as usize;
        if i >= n {
            i = n - 1;
        }
        let t = xr - i as f64 * self.h;
        (i, (i + 1) % n, t)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, j, t) = self.locate(x);
        let h = self.h;
        let a = (h - t) / h;
        let b = t / h;
        a * self.values[i]
            + b * self.values[j]
            + ((a * a * a - a) * self.m2[i] + (b * b * b - b) * self.m2[j]) * h * h / 6.0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (i, j, t) = self.locate(x);
        let h = self.h;
        let a = (h - t) / h;
        let b = t / h;
        (self.values[j] - self.values[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m2[i] + (3.0 * b * b - 1.0) * self.m2[j]) * h / 6.0
    }
}

/// Cyclic tridiagonal solve (constant bands) by Sherman-Morrison on the
/// Thomas algorithm.
fn solve_cyclic_tridiagonal(lo: f64, diag: f64, hi: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n < 3 {
        return Err(Error::LinearSolve("cyclic system too small".into()));
    }
    let gamma = -diag;
    // modified diagonal
    let mut d = vec![diag; n];
    d[0] = diag - gamma;
    d[n - 1] = diag - lo * hi / gamma;
    let solve_tri = |d: &[f64], b: &[f64]| -> Result<Vec<f64>> {
        let mut c_star = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut denom = d[0];
        if denom.abs() < 1e-300 {
            return Err(Error::LinearSolve("tridiagonal pivot vanished".into()));
        }
        c_star[0] = hi / denom;
        x[0] = b[0] / denom;
        for i in 1..n {
            denom = d[i] - lo * c_star[i - 1];
            if denom.abs() < 1e-300 {
                return Err(Error::LinearSolve("tridiagonal pivot vanished".into()));
            }
            c_star[i] = hi / denom;
            x[i] = (b[i] - lo * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c_star[i] * x[i + 1];
        }
        Ok(x)
    };
    let x = solve_tri(&d, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = hi;
    let z = solve_tri(&d, &u)?;
    // v = (1, lo/gamma) at the two corners
    let vx = x[0] + (lo / gamma) * x[n - 1];
    let vz = 1.0 + z[0] + (lo / gamma) * z[n - 1];
    if vz.abs() < 1e-300 {
        return Err(Error::LinearSolve("cyclic correction degenerate".into()));
    }
    let f = vx / vz;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - f * zi).collect())
}

/// Local 4-point cubic Lagrange interpolation through (xs, ys); fourth
/// order in the spacing, used for the base-family smoothness checks.
/// xs strictly increasing.
pub fn cubic_interp_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    assert!(n >= 4 && ys.len() == n);
    // locate the interval and centre a 4-point stencil on it
    let mut i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    };
    if x < xs[0] {
        i = 0;
    }
    let lo = i.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for a in lo..lo + 4 {
        let mut w = 1.0;
        for b in lo..lo + 4 {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += w * ys[a];
    }
    acc
}

/// A monotone circle diffeomorphism stored through its lift on a uniform
/// grid, `g(x) = x + periodic part`.
#[derive(Clone, Debug)]
pub struct CircleLift {
    pub lift: Vec<f64>,
    spline: PeriodicSpline,
}

impl CircleLift {
    pub fn fit(lift_values: &[f64]) -> Result<Self> {
        let n = lift_values.len();
        let periodic: Vec<f64> = lift_values
            .iter()
            .enumerate()
            .map(|(i, &g)| g - std::f64::consts::TAU * i as f64 / n as f64)
            .collect();
        let spline = PeriodicSpline::fit(&periodic)?;
        Ok(Self { lift: lift_values.to_vec(), spline })
    }

    pub fn eval(&self, x: f64) -> f64 {
        x + self.spline.eval(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        1.0 + self.spline.deriv(x)
    }

    /// Strict monotonicity of the lift on a dense sample; the invertibility
    /// criterion on the circle.
    pub fn is_monotone(&self, oversample: usize) -> bool {
        let n = self.lift.len() * oversample;
        (0..n).all(|i| self.deriv(std::f64::consts::TAU * i as f64 / n as f64) > 0.0)
    }

    /// Invert the lift by Newton iteration with a bisection fallback.
    pub fn invert(&self, y: f64, tol: f64, max_iter: usize) -> Result<f64> {
        let span = std::f64::consts::TAU;
        // reduce to g(x) = y with x in [0, span): g(x + span) = g(x) + span
        let g0 = self.eval(0.0);
        let k = ((y - g0) / span).floor();
        let yr = y - k * span;
        let (mut lo, mut hi) = (0.0, span);
        let mut x = (yr - self.spline.eval(yr)).clamp(lo, hi);
        for it in 0..max_iter {
            let f = self.eval(x) - yr;
            if f.abs() < tol {
                return Ok(x.rem_euclid(span));
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.deriv(x);
            let mut next = x - f / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            x = next;
            let _ = it;
        }
        Err(Error::InversionFailed { node: 0, iters: max_iter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_a_smooth_periodic_function_at_fourth_order() {
        let f = |x: f64| (x.sin() + 0.3 * (2.0 * x).cos()).exp().ln_1p();
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let values: Vec<f64> = (0..n)
                .map(|i| f(std::f64::consts::TAU * i as f64 / n as f64))
                .collect();
            let s = PeriodicSpline::fit(&values).unwrap();
            let mut sup: f64 = 0.0;
            for j in 0..1000 {
                let x = std::f64::consts::TAU * j as f64 / 1000.0;
                sup = sup.max((s.eval(x) - f(x)).abs());
            }
            errs.push(sup);
        }
        // halving h divides the error by about 16
        assert!(errs[0] / errs[1] > 8.0, "{errs:?}");
        assert!(errs[1] / errs[2] > 8.0, "{errs:?}");
    }

    #[test]
    fn spline_derivative_matches() {
        let n = 128;
        let values: Vec<f64> = (0..n)
            .map(|i| (std::f64::consts::TAU * i as f64 / n as f64).sin())
            .collect();
        let s = PeriodicSpline::fit(&values).unwrap();
        assert!((s.deriv(1.0) - 1.0_f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn lift_inversion_round_trip() {
        let n = 256;
        let lift: Vec<f64> = (0..n)
            .map(|i| {
                let x = std::f64::consts::TAU * i as f64 / n as f64;
                x + 0.1 * x.sin()
            })
            .collect();
        let g = CircleLift::fit(&lift).unwrap();
        assert!(g.is_monotone(4));
        for &x in &[0.0, 0.7, 3.3, 6.0] {
            let y = g.eval(x);
            let back = g.invert(y, 1e-10, 50).unwrap();
            let d = (back - x).rem_euclid(std::f64::consts::TAU);
            let d = d.min(std::f64::consts::TAU - d);
            assert!(d < 1e-9, "x = {x}, got {back}");
        }
    }

    #[test]
    fn local_cubic_is_exact_on_cubics() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.5).collect();
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for &x in &[0.25, 2.25, 3.9] {
            assert!((cubic_interp_eval(&xs, &ys, x) - f(x)).abs() < 1e-12);
        }
    }
}
