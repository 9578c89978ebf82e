//! Branch families: the per-branch data behind a [`PiecewiseMap`].
//!
//! [`PiecewiseMap`]: super::PiecewiseMap

use std::f64::consts::PI;
use std::fmt;

use super::expr::Expr;
use super::jet::{Jet, Point2};
use crate::error::{Error, Result};
use crate::numerics::solve_monotone;

/// Analytic description of a family of branches f_i on posts E_i.
///
/// Branch indices start at 1. Countable families report `None` from
/// [`Family::branch_count`]; callers then truncate at an explicit N_max.
pub trait Family: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn branch_count(&self) -> Option<usize>;

    /// `(x_left(y), x_right(y))` of post E_i.
    fn post_bounds(&self, i: usize, y: f64) -> (f64, f64);

    /// `(Y_bottom(X), Y_top(X))` of strip S_i.
    fn strip_bounds(&self, i: usize, x: f64) -> (f64, f64) {
        generic_strip_bounds(self, i, x)
    }

    /// Jet of f_i at (x, y). Must be valid on a neighbourhood of the post.
    fn jet(&self, i: usize, x: f64, y: f64) -> Jet;

    fn eval(&self, i: usize, x: f64, y: f64) -> Point2 {
        self.jet(i, x, y).value
    }

    /// Preimage of (x, y) under f_i.
    fn inverse(&self, i: usize, x: f64, y: f64) -> Result<Point2> {
        newton_inverse(self, i, x, y)
    }

    /// Candidate owner of (x, y) among branches `1..=limit` using the
    /// half-open convention `x_left <= x < x_right` (the rightmost post also
    /// keeps its right edge). `None` if no enumerated post contains x.
    fn locate(&self, x: f64, y: f64, limit: usize) -> Option<usize> {
        let mut closed = None;
        for i in 1..=limit {
            let (l, r) = self.post_bounds(i, y);
            if l <= x && x < r {
                return Some(i);
            }
            if l <= x && x <= r {
                closed = Some(i);
            }
        }
        closed
    }

    fn is_affine(&self) -> bool {
        false
    }

    fn disjoint_strips(&self) -> bool;

    /// For power maps: branch index of a base-symbol word.
    fn branch_for_word(&self, _word: &[usize]) -> Option<usize> {
        None
    }

    /// For power maps: base-symbol word of a branch.
    fn word_of(&self, _i: usize) -> Option<Vec<usize>> {
        None
    }
}

fn generic_strip_bounds<F: Family + ?Sized>(fam: &F, i: usize, x: f64) -> (f64, f64) {
    let edge = |y: f64| -> f64 {
        let (l, r) = fam.post_bounds(i, y);
        let f = |t: f64| {
            let j = fam.jet(i, t, y);
            (j.value.x, j.f1x())
        };
        match solve_monotone(f, x, l, r, 0.5 * (l + r)) {
            Ok(t) => fam.eval(i, t, y).y,
            Err(_) => f64::NAN,
        }
    };
    let (a, b) = (edge(0.0), edge(1.0));
    (a.min(b), a.max(b))
}

/// Damped Newton for f_i(z) = w, started from the post centre.
fn newton_inverse<F: Family + ?Sized>(fam: &F, i: usize, x: f64, y: f64) -> Result<Point2> {
    let (l, r) = fam.post_bounds(i, 0.5);
    let mut z = Point2::new(0.5 * (l + r), 0.5);
    let resid = |z: Point2| {
        let v = fam.eval(i, z.x, z.y);
        (v.x - x).abs().max((v.y - y).abs())
    };
    for _ in 0..100 {
        let j = fam.jet(i, z.x, z.y);
        let (rx, ry) = (j.value.x - x, j.value.y - y);
        let err = rx.abs().max(ry.abs());
        if err < 1e-15 {
            return Ok(z);
        }
        let det = j.det();
        let dx = (j.f2y() * rx - j.f1y() * ry) / det;
        let dy = (-j.f2x() * rx + j.f1x() * ry) / det;
        let mut step = 1.0;
        loop {
            let cand = Point2::new(z.x - step * dx, z.y - step * dy);
            if resid(cand) < err || step < 1e-6 {
                if cand == z {
                    return Ok(z);
                }
                z = cand;
                break;
            }
            step *= 0.5;
        }
    }
    if resid(z) < 1e-12 {
        Ok(z)
    } else {
        Err(Error::RootFailed(format!("inverse of branch {i} at ({x}, {y})")))
    }
}

/// Affine baker's transformation with N equal vertical posts.
#[derive(Debug, Clone)]
pub struct Baker {
    pub n: usize,
}

impl Family for Baker {
    fn name(&self) -> String {
        format!("baker({})", self.n)
    }
    fn branch_count(&self) -> Option<usize> {
        Some(self.n)
    }
    fn post_bounds(&self, i: usize, _y: f64) -> (f64, f64) {
        let n = self.n as f64;
        ((i - 1) as f64 / n, i as f64 / n)
    }
    fn strip_bounds(&self, i: usize, _x: f64) -> (f64, f64) {
        self.post_bounds(i, 0.0)
    }
    fn jet(&self, i: usize, x: f64, y: f64) -> Jet {
        let n = self.n as f64;
        let s = (i - 1) as f64;
        Jet::affine(Point2::new(n * x - s, (y + s) / n), [[n, 0.0], [0.0, 1.0 / n]])
    }
    fn inverse(&self, i: usize, x: f64, y: f64) -> Result<Point2> {
        let n = self.n as f64;
        let s = (i - 1) as f64;
        Ok(Point2::new((x + s) / n, n * y - s))
    }
    fn locate(&self, x: f64, _y: f64, _limit: usize) -> Option<usize> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        let n = self.n;
        let mut i = ((x * n as f64).floor() as usize + 1).clamp(1, n);
        while i > 1 && x < self.post_bounds(i, 0.0).0 {
            i -= 1;
        }
        while i < n && x >= self.post_bounds(i, 0.0).1 {
            i += 1;
        }
        Some(i)
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn disjoint_strips(&self) -> bool {
        true
    }
}

/// Lüroth-type countable baker map: post E_n = [1/(n+1), 1/n] is stretched
/// onto [0,1] and the unit square is stacked into the strip
/// [1 - 1/n, 1 - 1/(n+1)]. Area preserving, so Lebesgue measure is invariant.
#[derive(Debug, Clone, Default)]
pub struct Lueroth;

impl Lueroth {
    fn slope(n: usize) -> f64 {
        (n as f64) * (n as f64 + 1.0)
    }
}

impl Family for Lueroth {
    fn name(&self) -> String {
        "lueroth".into()
    }
    fn branch_count(&self) -> Option<usize> {
        None
    }
    fn post_bounds(&self, n: usize, _y: f64) -> (f64, f64) {
        (1.0 / (n as f64 + 1.0), 1.0 / n as f64)
    }
    fn strip_bounds(&self, n: usize, _x: f64) -> (f64, f64) {
        (1.0 - 1.0 / n as f64, 1.0 - 1.0 / (n as f64 + 1.0))
    }
    fn jet(&self, n: usize, x: f64, y: f64) -> Jet {
        let a = Lueroth::slope(n);
        let v = Point2::new(a * x - n as f64, (1.0 - 1.0 / n as f64) + y / a);
        Jet::affine(v, [[a, 0.0], [0.0, 1.0 / a]])
    }
    fn inverse(&self, n: usize, x: f64, y: f64) -> Result<Point2> {
        let a = Lueroth::slope(n);
        Ok(Point2::new((x + n as f64) / a, a * (y - (1.0 - 1.0 / n as f64))))
    }
    fn locate(&self, x: f64, _y: f64, limit: usize) -> Option<usize> {
        if !(x > 0.0 && x <= 1.0) {
            return None;
        }
        if x >= 0.5 {
            return Some(1);
        }
        // x in [1/(n+1), 1/n)  <=>  n = ceil(1/x) - 1, then fix rounding.
        let guess = (1.0 / x).ceil() - 1.0;
        if guess > limit as f64 + 1.0 {
            return None;
        }
        let mut n = (guess as usize).max(1);
        while n > 1 && x >= self.post_bounds(n, 0.0).1 {
            n -= 1;
        }
        while x < self.post_bounds(n, 0.0).0 {
            n += 1;
        }
        (n <= limit).then_some(n)
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn disjoint_strips(&self) -> bool {
        true
    }
}

/// Nonlinear deformation ψ ∘ L ∘ φ of the Lüroth baker map L with
/// φ(x, y) = (x + ε y sin πx, y) and ψ(X, Y) = (X, Y + ε X sin πY).
///
/// Both φ and ψ fix the boundary of the square, so posts φ⁻¹(E_n) are
/// full-height curvilinear rectangles and strips ψ(S_n) are full-width.
#[derive(Debug, Clone)]
pub struct PerturbedLueroth {
    pub eps: f64,
}

impl PerturbedLueroth {
    fn phi_jet(&self, x: f64, y: f64) -> Jet {
        let e = self.eps;
        let (s, c) = (PI * x).sin_cos();
        Jet {
            value: Point2::new(x + e * y * s, y),
            d1: [[1.0 + e * y * PI * c, e * s], [0.0, 1.0]],
            d2: [[[-e * y * PI * PI * s, e * PI * c], [e * PI * c, 0.0]], [[0.0; 2]; 2]],
        }
    }

    fn psi_jet(&self, x: f64, y: f64) -> Jet {
        let e = self.eps;
        let (s, c) = (PI * y).sin_cos();
        Jet {
            value: Point2::new(x, y + e * x * s),
            d1: [[1.0, 0.0], [e * s, 1.0 + e * x * PI * c]],
            d2: [[[0.0; 2]; 2], [[0.0, e * PI * c], [e * PI * c, -e * x * PI * PI * s]]],
        }
    }

    /// Solve x + ε y sin(πx) = u for x.
    fn phi1_inv(&self, u: f64, y: f64) -> f64 {
        if u == 0.0 || u == 1.0 {
            return u;
        }
        let e = self.eps * y;
        let f = |t: f64| {
            let (s, c) = (PI * t).sin_cos();
            (t + e * s, 1.0 + e * PI * c)
        };
        let w = e.abs() + 1e-15;
        solve_monotone(f, u, u - w, u + w, u).unwrap_or(u)
    }

    /// Solve Y + ε X sin(πY) = v for Y.
    fn psi2_inv(&self, x: f64, v: f64) -> f64 {
        if v == 0.0 || v == 1.0 {
            return v;
        }
        let e = self.eps * x;
        let f = |t: f64| {
            let (s, c) = (PI * t).sin_cos();
            (t + e * s, 1.0 + e * PI * c)
        };
        let w = e.abs() + 1e-15;
        solve_monotone(f, v, v - w, v + w, v).unwrap_or(v)
    }
}

impl Family for PerturbedLueroth {
    fn name(&self) -> String {
        format!("perturbed_lueroth({})", self.eps)
    }
    fn branch_count(&self) -> Option<usize> {
        None
    }
    fn post_bounds(&self, n: usize, y: f64) -> (f64, f64) {
        let (l, r) = Lueroth.post_bounds(n, y);
        (self.phi1_inv(l, y), self.phi1_inv(r, y))
    }
    fn strip_bounds(&self, n: usize, x: f64) -> (f64, f64) {
        let (b, t) = Lueroth.strip_bounds(n, x);
        let psi2 = |y: f64| y + self.eps * x * (PI * y).sin();
        (if b == 0.0 { 0.0 } else { psi2(b) }, psi2(t))
    }
    fn jet(&self, n: usize, x: f64, y: f64) -> Jet {
        let p = self.phi_jet(x, y);
        let l = Lueroth.jet(n, p.value.x, p.value.y);
        let q = self.psi_jet(l.value.x, l.value.y);
        Jet::compose(&q, &Jet::compose(&l, &p))
    }
    fn eval(&self, n: usize, x: f64, y: f64) -> Point2 {
        let u = x + self.eps * y * (PI * x).sin();
        let l = Lueroth.eval(n, u, y);
        Point2::new(l.x, l.y + self.eps * l.x * (PI * l.y).sin())
    }
    fn inverse(&self, n: usize, x: f64, y: f64) -> Result<Point2> {
        let ly = self.psi2_inv(x, y);
        let p = Lueroth.inverse(n, x, ly)?;
        Ok(Point2::new(self.phi1_inv(p.x, p.y), p.y))
    }
    fn locate(&self, x: f64, y: f64, limit: usize) -> Option<usize> {
        if !(0.0..=1.0).contains(&x) || x == 0.0 {
            return None;
        }
        let u = (x + self.eps * y * (PI * x).sin()).clamp(0.0, 1.0);
        Lueroth.locate(u, y, limit)
    }
    fn disjoint_strips(&self) -> bool {
        true
    }
}

/// Expressions defining one family given in a config file. Every expression
/// may use `x`, `y` and the branch index `n`; post bounds use `y` and `n`.
#[derive(Debug, Clone)]
pub struct CustomFamily {
    pub label: String,
    pub branches: Option<usize>,
    pub f1: Expr,
    pub f2: Expr,
    /// f1x, f1y, f2x, f2y.
    pub first: [Expr; 4],
    /// f1xx, f1xy, f1yy, f2xx, f2xy, f2yy.
    pub second: [Expr; 6],
    pub x_left: Expr,
    pub x_right: Expr,
    pub disjoint: bool,
    pub affine: bool,
}

impl Family for CustomFamily {
    fn name(&self) -> String {
        format!("custom({})", self.label)
    }
    fn branch_count(&self) -> Option<usize> {
        self.branches
    }
    fn post_bounds(&self, i: usize, y: f64) -> (f64, f64) {
        let n = i as f64;
        (self.x_left.eval(0.0, y, n), self.x_right.eval(0.0, y, n))
    }
    fn jet(&self, i: usize, x: f64, y: f64) -> Jet {
        let n = i as f64;
        let e = |k: &Expr| k.eval(x, y, n);
        let s = &self.second;
        Jet {
            value: Point2::new(e(&self.f1), e(&self.f2)),
            d1: [[e(&self.first[0]), e(&self.first[1])], [e(&self.first[2]), e(&self.first[3])]],
            d2: [
                [[e(&s[0]), e(&s[1])], [e(&s[1]), e(&s[2])]],
                [[e(&s[3]), e(&s[4])], [e(&s[4]), e(&s[5])]],
            ],
        }
    }
    fn eval(&self, i: usize, x: f64, y: f64) -> Point2 {
        let n = i as f64;
        Point2::new(self.f1.eval(x, y, n), self.f2.eval(x, y, n))
    }
    fn is_affine(&self) -> bool {
        self.affine
    }
    fn disjoint_strips(&self) -> bool {
        self.disjoint
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_jet_matches_finite_differences() {
        let f = PerturbedLueroth { eps: 0.01 };
        let h = 1e-6;
        for &(n, x, y) in &[(1usize, 0.7, 0.3), (2, 0.4, 0.8), (5, 0.18, 0.55)] {
            let j = f.jet(n, x, y);
            let ex = f.eval(n, x + h, y);
            let wx = f.eval(n, x - h, y);
            let ny = f.eval(n, x, y + h);
            let sy = f.eval(n, x, y - h);
            let fd = [
                [(ex.x - wx.x) / (2.0 * h), (ny.x - sy.x) / (2.0 * h)],
                [(ex.y - wx.y) / (2.0 * h), (ny.y - sy.y) / (2.0 * h)],
            ];
            for k in 0..2 {
                for m in 0..2 {
                    let scale = j.d1[k][m].abs().max(1.0);
                    assert!((fd[k][m] - j.d1[k][m]).abs() < 1e-6 * scale, "{n} {k} {m}");
                }
            }
            // Second partials from differences of first partials.
            let jx = f.jet(n, x + h, y);
            let jwx = f.jet(n, x - h, y);
            let jy = f.jet(n, x, y + h);
            let jsy = f.jet(n, x, y - h);
            for k in 0..2 {
                let fxx = (jx.d1[k][0] - jwx.d1[k][0]) / (2.0 * h);
                let fxy = (jy.d1[k][0] - jsy.d1[k][0]) / (2.0 * h);
                let fyy = (jy.d1[k][1] - jsy.d1[k][1]) / (2.0 * h);
                let scale = j.second_norm().max(1.0);
                assert!((fxx - j.d2[k][0][0]).abs() < 1e-5 * scale);
                assert!((fxy - j.d2[k][0][1]).abs() < 1e-5 * scale);
                assert!((fyy - j.d2[k][1][1]).abs() < 1e-5 * scale);
            }
        }
    }

    #[test]
    fn perturbed_posts_and_strips_are_full() {
        let f = PerturbedLueroth { eps: 0.02 };
        for &y in &[0.0, 0.3, 1.0] {
            assert_eq!(f.post_bounds(1, y).1, 1.0);
            let (l, _) = f.post_bounds(3, y);
            let img = f.eval(3, l, y);
            assert!(img.x.abs() < 1e-14);
        }
        let (b, t) = f.strip_bounds(1, 0.4);
        assert_eq!(b, 0.0);
        let top = f.eval(1, 0.8, 1.0);
        assert!((f.strip_bounds(1, top.x).1 - top.y).abs() < 1e-14);
        assert!(t > b);
    }

    #[test]
    fn lueroth_locate_respects_half_open_posts() {
        let f = Lueroth;
        assert_eq!(f.locate(0.3, 0.5, 100), Some(3));
        assert_eq!(f.locate(0.25, 0.5, 100), Some(3));
        assert_eq!(f.locate(1.0 / 3.0, 0.5, 100), Some(2));
        assert_eq!(f.locate(1.0, 0.5, 100), Some(1));
        assert_eq!(f.locate(0.5, 0.5, 100), Some(1));
        assert_eq!(f.locate(1e-4, 0.5, 100), None);
        assert_eq!(f.locate(0.0, 0.5, 100), None);
    }

    #[test]
    fn generic_strip_bounds_agree_with_closed_form() {
        let f = PerturbedLueroth { eps: 0.01 };
        for n in 1..5 {
            for &x in &[0.1, 0.5, 0.9] {
                let (b, t) = f.strip_bounds(n, x);
                let (gb, gt) = generic_strip_bounds(&f, n, x);
                assert!((b - gb).abs() < 1e-12 && (t - gt).abs() < 1e-12);
            }
        }
    }
}
