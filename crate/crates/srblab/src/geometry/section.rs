//! Intersections of cylinder sets with graphs, by bisection on itinerary
//! order.
//!
//! Along a curve in the unstable cone, points left of E_{w0...wk} stay left
//! of it after any number of steps, so "which side of the cylinder" is a
//! monotone predicate in the curve parameter. Both endpoints of the section
//! are then found by bisection without knowing an interior point.

use std::cmp::Ordering;

use super::map::PiecewiseMap;

/// Working-coordinate view of a map for section computations: `bounds`
/// gives the domain of a symbol on the level set `second = s`, `step`
/// applies the symbol's branch, and `orientation` is +1 when the branch
/// preserves the order of the first coordinate.
pub(crate) trait SectionOps {
    fn bounds(&self, w: usize, s: f64) -> (f64, f64);
    fn step(&self, w: usize, p: [f64; 2]) -> [f64; 2];
    fn orientation(&self, w: usize) -> f64;
}

/// Posts and forward branches.
pub(crate) struct Forward<'a>(pub &'a PiecewiseMap);

impl SectionOps for Forward<'_> {
    fn bounds(&self, w: usize, s: f64) -> (f64, f64) {
        self.0.family().post_bounds(w, s)
    }
    fn step(&self, w: usize, p: [f64; 2]) -> [f64; 2] {
        let v = self.0.family().eval(w, p[0], p[1]);
        [v.x, v.y]
    }
    fn orientation(&self, w: usize) -> f64 {
        let (l, r) = self.0.family().post_bounds(w, 0.5);
        self.0.family().jet(w, 0.5 * (l + r), 0.5).f1x().signum()
    }
}

/// Strips and inverse branches, in swapped coordinates (y, x).
pub(crate) struct Backward<'a>(pub &'a PiecewiseMap);

impl SectionOps for Backward<'_> {
    fn bounds(&self, w: usize, s: f64) -> (f64, f64) {
        self.0.family().strip_bounds(w, s)
    }
    fn step(&self, w: usize, p: [f64; 2]) -> [f64; 2] {
        match self.0.family().inverse(w, p[1], p[0]) {
            Ok(q) => [q.y, q.x],
            Err(_) => [f64::NAN, f64::NAN],
        }
    }
    fn orientation(&self, w: usize) -> f64 {
        let (l, r) = self.0.family().post_bounds(w, 0.5);
        let j = self.0.family().jet(w, 0.5 * (l + r), 0.5);
        // (DF^{-1})_{22} = f1x / det.
        (j.f1x() / j.det()).signum()
    }
}

/// Position of the curve point with parameter `t` relative to the cylinder
/// of `word`: Less (left), Equal (inside, boundaries included) or Greater.
pub(crate) fn classify<S: SectionOps, C: Fn(f64) -> f64>(
    ops: &S,
    word: &[usize],
    orient: &[f64],
    curve: &C,
    t: f64,
) -> Ordering {
    let mut p = [t, curve(t)];
    let mut sign = 1.0;
    for (k, &w) in word.iter().enumerate() {
        let (l, r) = ops.bounds(w, p[1]);
        if p[0].is_nan() {
            return Ordering::Greater;
        }
        let side = if p[0] < l {
            Ordering::Less
        } else if p[0] > r {
            Ordering::Greater
        } else {
            Ordering::Equal
        };
        if side != Ordering::Equal {
            return if sign > 0.0 { side } else { side.reverse() };
        }
        if k + 1 < word.len() {
            p = ops.step(w, p);
            sign *= orient[k];
        }
    }
    Ordering::Equal
}

/// Parameter interval `[lo, hi]` of the curve `t -> (t, curve(t))`,
/// `t in [a, b]`, lying in the cylinder of `word`; `None` if empty.
pub(crate) fn section<S: SectionOps, C: Fn(f64) -> f64>(
    ops: &S,
    word: &[usize],
    curve: &C,
    a: f64,
    b: f64,
) -> Option<(f64, f64)> {
    if word.is_empty() {
        return Some((a, b));
    }
    let orient: Vec<f64> = word.iter().map(|&w| ops.orientation(w)).collect();
    let cls = |t: f64| classify(ops, word, &orient, curve, t);
    // Left end: boundary between Less and not-Less.
    let lo = if cls(a) != Ordering::Less {
        a
    } else if cls(b) == Ordering::Less {
        return None;
    } else {
        bisect(a, b, |t| cls(t) == Ordering::Less).1
    };
    let hi = if cls(b) != Ordering::Greater {
        b
    } else if cls(a) == Ordering::Greater {
        return None;
    } else {
        bisect(a, b, |t| cls(t) != Ordering::Greater).0
    };
    (lo <= hi).then_some((lo, hi))
}

/// Given `pred(a)` true and `pred(b)` false with a single switch, returns
/// the last true and first false parameters found (adjacent floats at
/// convergence).
fn bisect<P: Fn(f64) -> bool>(mut a: f64, mut b: f64, pred: P) -> (f64, f64) {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    (a, b)
}

/// Section of the post cylinder E_word along the horizontal line at `y`.
pub fn post_cylinder_row(map: &PiecewiseMap, word: &[usize], y: f64) -> Option<(f64, f64)> {
    section(&Forward(map), word, &|_| y, 0.0, 1.0)
}

/// Section of the strip cylinder along the vertical line at `x`. `word`
/// lists the symbols in backward order: `word[0]` is the most recent
/// symbol i_0, `word[1]` is i_{-1}, and so on.
pub fn strip_cylinder_column(map: &PiecewiseMap, word: &[usize], x: f64) -> Option<(f64, f64)> {
    section(&Backward(map), word, &|_| x, 0.0, 1.0)
}

/// Section of E_word along the graph of `g` over `[a, b]`.
pub fn post_cylinder_on_curve<C: Fn(f64) -> f64>(
    map: &PiecewiseMap,
    word: &[usize],
    g: &C,
    a: f64,
    b: f64,
) -> Option<(f64, f64)> {
    section(&Forward(map), word, g, a, b)
}
