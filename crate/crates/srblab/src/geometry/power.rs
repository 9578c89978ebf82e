//! Powers F^t of a piecewise map. Branches of F^t are the compositions
//! f_{w_{t-1}} ∘ … ∘ f_{w_0} on the post cylinders E_{w_0…w_{t-1}}.

use std::collections::HashMap;

use super::family::Family;
use super::jet::{ConeParams, Jet, Point2};
use super::map::PiecewiseMap;
use super::section::post_cylinder_row;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct PowerFamily {
    base: PiecewiseMap,
    t: usize,
    words: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

pub(crate) fn power_map(base: &PiecewiseMap, t: usize, depth_limit: usize) -> Result<PiecewiseMap> {
    if t == 0 {
        return Err(Error::ConfigInvalid("power must be at least 1".into()));
    }
    // Symbols per position: all of a finite alphabet, or the largest
    // prefix of a countable one whose t-fold product fits the limit.
    let alphabet = match base.family().branch_count() {
        Some(n) => {
            let count = (n as f64).powi(t as i32);
            if count > depth_limit as f64 {
                return Err(Error::TailTruncated { x: f64::NAN, y: f64::NAN, n_max: depth_limit });
            }
            n
        }
        None => {
            let cap = (depth_limit as f64).powf(1.0 / t as f64).floor() as usize;
            if cap == 0 {
                return Err(Error::TailTruncated { x: f64::NAN, y: f64::NAN, n_max: depth_limit });
            }
            cap.min(base.n_max)
        }
    };
    let mut words = vec![Vec::new()];
    for _ in 0..t {
        let mut next = Vec::with_capacity(words.len() * alphabet);
        for w in &words {
            for s in 1..=alphabet {
                let mut v = w.clone();
                v.push(s);
                next.push(v);
            }
        }
        words = next;
    }
    let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i + 1)).collect();
    let cone = ConeParams { alpha: base.cone.alpha, k0: base.cone.k0.powi(t as i32) };
    let fam = PowerFamily { base: base.clone(), t, words, index };
    let n = fam.words.len();
    Ok(PiecewiseMap::new(fam, cone, base.c0, n))
}

impl PowerFamily {
    fn word(&self, i: usize) -> &[usize] {
        &self.words[i - 1]
    }
}

impl Family for PowerFamily {
    fn name(&self) -> String {
        format!("power({}, {})", self.base.name(), self.t)
    }

    fn branch_count(&self) -> Option<usize> {
        Some(self.words.len())
    }

    fn post_bounds(&self, i: usize, y: f64) -> (f64, f64) {
        post_cylinder_row(&self.base, self.word(i), y).unwrap_or((f64::NAN, f64::NAN))
    }

    fn jet(&self, i: usize, x: f64, y: f64) -> Jet {
        let mut acc = Jet::identity(Point2::new(x, y));
        for &w in self.word(i) {
            let outer = self.base.jet(w, acc.value);
            acc = Jet::compose(&outer, &acc);
        }
        acc
    }

    fn eval(&self, i: usize, x: f64, y: f64) -> Point2 {
        let mut p = Point2::new(x, y);
        for &w in self.word(i) {
            p = self.base.eval(w, p);
        }
        p
    }

    fn inverse(&self, i: usize, x: f64, y: f64) -> Result<Point2> {
        let mut p = Point2::new(x, y);
        for &w in self.word(i).iter().rev() {
            p = self.base.inverse(w, p)?;
        }
        Ok(p)
    }

    fn locate(&self, x: f64, y: f64, _limit: usize) -> Option<usize> {
        let mut p = Point2::new(x, y);
        let mut word = Vec::with_capacity(self.t);
        for _ in 0..self.t {
            let (hit, next) = self.base.step(p.clamped()).ok()?;
            word.push(hit.index);
            p = next;
        }
        self.index.get(&word).copied()
    }

    fn is_affine(&self) -> bool {
        self.base.is_affine()
    }

    fn disjoint_strips(&self) -> bool {
        self.base.family().disjoint_strips()
    }

    fn branch_for_word(&self, word: &[usize]) -> Option<usize> {
        self.index.get(word).copied()
    }

    fn word_of(&self, i: usize) -> Option<Vec<usize>> {
        self.words.get(i.wrapping_sub(1)).cloned()
    }
}
