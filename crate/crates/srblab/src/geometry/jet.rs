//! Points, max-norm vectors, cones and second-order jets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane. Points produced by the library lie in the closed
/// unit square; jet values of branch extensions may fall slightly outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Validating constructor: finite coordinates inside the closed square.
    pub fn in_square(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() && (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
            Ok(Point2 { x, y })
        } else {
            Err(Error::OutOfDomain { x, y })
        }
    }

    pub fn is_in_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    pub fn clamped(self) -> Self {
        Point2::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }

    /// Max-norm distance.
    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vector2 {
    pub v1: f64,
    pub v2: f64,
}

impl Vector2 {
    pub const fn new(v1: f64, v2: f64) -> Self {
        Vector2 { v1, v2 }
    }

    pub fn norm(&self) -> f64 {
        self.v1.abs().max(self.v2.abs())
    }

    pub fn normalized(&self) -> Vector2 {
        let n = self.norm();
        Vector2::new(self.v1 / n, self.v2 / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub alpha: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
}

impl ConeParams {
    pub fn new(alpha: f64, k0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ConfigInvalid(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if k0.is_nan() || k0 <= 1.0 || k0.is_infinite() {
            return Err(Error::ConfigInvalid(format!("K0 must exceed 1, got {k0}")));
        }
        Ok(ConeParams { alpha, k0 })
    }

    /// |v2| <= alpha |v1| up to an absolute slack `tol` (relative to |v|).
    pub fn in_unstable(&self, v: Vector2, tol: f64) -> bool {
        v.v2.abs() <= self.alpha * v.v1.abs() + tol * v.norm()
    }

    pub fn in_stable(&self, v: Vector2, tol: f64) -> bool {
        v.v1.abs() <= self.alpha * v.v2.abs() + tol * v.norm()
    }
}

/// Value, Jacobian and Hessians of a planar map at a point.
///
/// `d1[k][j]` is the derivative of output `k` along input `j` (0 = x, 1 = y);
/// `d2[k]` is the symmetric Hessian of output `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub value: Point2,
    pub d1: [[f64; 2]; 2],
    pub d2: [[[f64; 2]; 2]; 2],
}

impl Jet {
    pub fn affine(value: Point2, d1: [[f64; 2]; 2]) -> Self {
        Jet { value, d1, d2: [[[0.0; 2]; 2]; 2] }
    }

    pub fn identity(at: Point2) -> Self {
        Jet::affine(at, [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn f1x(&self) -> f64 {
        self.d1[0][0]
    }
    pub fn f1y(&self) -> f64 {
        self.d1[0][1]
    }
    pub fn f2x(&self) -> f64 {
        self.d1[1][0]
    }
    pub fn f2y(&self) -> f64 {
        self.d1[1][1]
    }

    /// Jacobian determinant J_F.
    pub fn det(&self) -> f64 {
        self.d1[0][0] * self.d1[1][1] - self.d1[0][1] * self.d1[1][0]
    }

    /// |D^2 f|: the largest absolute second partial over both components.
    pub fn second_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for h in &self.d2 {
            m = m.max(h[0][0].abs()).max(h[0][1].abs()).max(h[1][1].abs());
        }
        m
    }

    pub fn apply(&self, v: Vector2) -> Vector2 {
        Vector2::new(
            self.d1[0][0] * v.v1 + self.d1[0][1] * v.v2,
            self.d1[1][0] * v.v1 + self.d1[1][1] * v.v2,
        )
    }

    /// Max-norm operator norm of the Jacobian (largest absolute row sum).
    pub fn operator_norm(&self) -> f64 {
        (self.d1[0][0].abs() + self.d1[0][1].abs()).max(self.d1[1][0].abs() + self.d1[1][1].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.value.x.is_finite()
            && self.value.y.is_finite()
            && self.d1.iter().flatten().all(|v| v.is_finite())
            && self.d2.iter().flatten().flatten().all(|v| v.is_finite())
    }

    /// Jet of `outer ∘ inner` at the base point of `inner`; `outer` must be
    /// the jet at `inner.value`.
    pub fn compose(outer: &Jet, inner: &Jet) -> Jet {
        let a = &outer.d1;
        let b = &inner.d1;
        let mut d1 = [[0.0; 2]; 2];
        for k in 0..2 {
            for j in 0..2 {
                d1[k][j] = a[k][0] * b[0][j] + a[k][1] * b[1][j];
            }
        }
        let mut d2 = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for p in 0..2 {
                        for q in 0..2 {
                            s += outer.d2[k][p][q] * b[p][i] * b[q][j];
                        }
                        s += a[k][p] * inner.d2[p][i][j];
                    }
                    d2[k][i][j] = s;
                }
            }
        }
        Jet { value: outer.value, d1, d2 }
    }

    /// Jet of the local inverse at `self.value`, based at `at` (the
    /// preimage point, i.e. the point where `self` was taken).
    pub fn inverse(&self, at: Point2) -> Jet {
        let det = self.det();
        let inv = [
            [self.d1[1][1] / det, -self.d1[0][1] / det],
            [-self.d1[1][0] / det, self.d1[0][0] / det],
        ];
        let mut d2 = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for m in 0..2 {
                        let mut t = 0.0;
                        for p in 0..2 {
                            for q in 0..2 {
                                t += self.d2[m][p][q] * inv[p][i] * inv[q][j];
                            }
                        }
                        s += inv[k][m] * t;
                    }
                    d2[k][i][j] = -s;
                }
            }
        }
        Jet { value: at, d1: inv, d2 }
    }

    /// Conjugate by the coordinate swap (x, y) -> (y, x) on both sides.
    pub fn swapped(&self) -> Jet {
        let d1 = [[self.d1[1][1], self.d1[1][0]], [self.d1[0][1], self.d1[0][0]]];
        let sw = |h: &[[f64; 2]; 2]| [[h[1][1], h[1][0]], [h[0][1], h[0][0]]];
        Jet {
            value: Point2::new(self.value.y, self.value.x),
            d1,
            d2: [sw(&self.d2[1]), sw(&self.d2[0])],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_jet() -> Jet {
        Jet {
            value: Point2::new(0.3, 0.4),
            d1: [[3.0, 0.2], [0.1, 0.5]],
            d2: [[[0.7, -0.2], [-0.2, 0.1]], [[0.05, 0.3], [0.3, -0.4]]],
        }
    }

    #[test]
    fn inverse_of_inverse_round_trips() {
        let j = sample_jet();
        let at = Point2::new(0.1, 0.2);
        let back = j.inverse(at).inverse(j.value);
        for k in 0..2 {
            for i in 0..2 {
                assert!((back.d1[k][i] - j.d1[k][i]).abs() < 1e-12);
                for m in 0..2 {
                    assert!((back.d2[k][i][m] - j.d2[k][i][m]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn composing_with_inverse_gives_identity() {
        let j = sample_jet();
        let at = Point2::new(0.1, 0.2);
        let id = Jet::compose(&j.inverse(at), &j);
        assert!((id.d1[0][0] - 1.0).abs() < 1e-14 && id.d1[0][1].abs() < 1e-14);
        assert!(id.second_norm() < 1e-13);
    }

    #[test]
    fn swap_is_an_involution() {
        let j = sample_jet();
        assert_eq!(j.swapped().swapped(), j);
        assert_eq!(j.swapped().f1x(), j.f2y());
    }

    #[test]
    fn cone_membership_uses_max_norm() {
        let c = ConeParams::new(0.5, 2.0).unwrap();
        assert!(c.in_unstable(Vector2::new(1.0, 0.5), 0.0));
        assert!(!c.in_unstable(Vector2::new(1.0, 0.51), 0.0));
        assert!(c.in_stable(Vector2::new(-0.5, 1.0), 0.0));
        assert!(ConeParams::new(1.0, 2.0).is_err());
        assert!(ConeParams::new(0.5, 1.0).is_err());
    }
}
