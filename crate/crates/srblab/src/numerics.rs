//! Small numerical helpers shared across modules.

use crate::error::{Error, Result};

/// Safeguarded Newton iteration for `f(t) = target` with `f` monotone on
/// `[lo, hi]`. `f` returns the value and derivative. Falls back to bisection
/// whenever a Newton step leaves the bracket.
pub fn solve_monotone<F>(f: F, target: f64, lo: f64, hi: f64, start: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a).0 - target;
    let fb = f(b).0 - target;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFailed(format!(
            "target {target} not bracketed on [{lo}, {hi}] (residuals {fa:e}, {fb:e})"
        )));
    }
    let increasing = fb > 0.0;
    let mut t = start.clamp(a, b);
    for _ in 0..200 {
        let (v, d) = f(t);
        let r = v - target;
        if r == 0.0 {
            return Ok(t);
        }
        if (r > 0.0) == increasing {
            b = t;
        } else {
            a = t;
        }
        let mut next = t - r / d;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        if next == t || b - a <= f64::EPSILON * (a.abs().max(b.abs()).max(1e-300)) {
            return Ok(next);
        }
        // Newton has converged once the step is at roundoff level.
        if (next - t).abs() <= 1e-16 * t.abs().max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Nodes and weights of 8-point Gauss-Legendre quadrature on [-1, 1].
pub const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Integrate `f` over `[a, b]` with composite 8-point Gauss-Legendre on
/// `pieces` equal panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for &(t, w) in &GAUSS8 {
            s += w * f(mid + 0.5 * h * t);
        }
        total += 0.5 * h * s;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_solves_cubic() {
        let r = solve_monotone(|t| (t * t * t + t, 3.0 * t * t + 1.0), 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decreasing_functions_are_handled() {
        let r = solve_monotone(|t| (1.0 - t, -1.0), 0.25, 0.0, 1.0, 0.9).unwrap();
        assert!((r - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unbracketed_target_is_an_error() {
        assert!(solve_monotone(|t| (t, 1.0), 3.0, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let v = gauss_legendre(|x| x.powi(9) - 2.0 * x * x, 0.0, 1.0, 1);
        assert!((v - (0.1 - 2.0 / 3.0)).abs() < 1e-15);
    }
}
