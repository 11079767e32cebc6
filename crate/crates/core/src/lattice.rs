//! Boxes and the box lattice.
//!
//! A [`HyperBox`] is stored as a minimum corner plus a nonnegative offset per
//! dimension, so `max = min + delta`. Meet is the intersection box, join is the
//! smallest enclosing box, and the empty set is the explicit
//! [`LatticeElement::Bottom`] variant. Intervals that only touch (zero width)
//! meet in `Bottom`, since their measure is zero anyway.
//!
//! Volumes are accumulated as sums of log side lengths and exponentiated at the
//! end, which keeps 50+ dimensional boxes with small sides representable.

use crate::error::{Error, Result};
use crate::measure::ProductMeasure;

#[derive(Clone, Debug, PartialEq)]
pub struct HyperBox {
    min: Vec<f64>,
    delta: Vec<f64>,
}

impl HyperBox {
    pub fn new(min: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if min.len() != delta.len() {
            return Err(Error::DimensionMismatch { expected: min.len(), actual: delta.len() });
        }
        if min.is_empty() {
            return Err(Error::InvalidBox("zero-dimensional box".into()));
        }
        for (i, (&m, &d)) in min.iter().zip(&delta).enumerate() {
            if !m.is_finite() {
                return Err(Error::InvalidBox(format!("min[{i}] = {m} is not finite")));
            }
            if d.is_nan() || d < 0.0 {
                return Err(Error::InvalidBox(format!("delta[{i}] = {d} is negative")));
            }
        }
        Ok(HyperBox { min, delta })
    }

    /// Builds a box from its lower and upper corners.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), actual: hi.len() });
        }
        let delta = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
        Self::new(lo.to_vec(), delta)
    }

    /// One-dimensional box `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::from_bounds(&[lo], &[hi])
    }

    /// The full-support box of `m`.
    pub fn top(m: &ProductMeasure) -> Self {
        let (lo, hi) = m.support();
        HyperBox { min: vec![lo; m.dim()], delta: vec![hi - lo; m.dim()] }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn max_at(&self, i: usize) -> f64 {
        self.min[i] + self.delta[i]
    }

    pub fn maxs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.max_at(i)).collect()
    }

    pub fn log_volume(&self, m: &ProductMeasure) -> f64 {
        self.min.iter().zip(&self.delta).map(|(&lo, &d)| m.log_side(lo, d)).sum()
    }

    pub fn volume(&self, m: &ProductMeasure) -> f64 {
        self.log_volume(m).exp()
    }

    /// Errors if any corner lies outside the support of `m`.
    pub fn check_support(&self, m: &ProductMeasure) -> Result<()> {
        if self.dim() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), actual: self.dim() });
        }
        for i in 0..self.dim() {
            m.check_support(self.min[i], i)?;
            m.check_support(self.max_at(i), i)?;
        }
        Ok(())
    }

    /// True iff `other` lies inside `self`.
    pub fn contains(&self, other: &HyperBox) -> Result<bool> {
        same_dim(self, other)?;
        Ok((0..self.dim()).all(|i| self.min[i] <= other.min[i] && other.max_at(i) <= self.max_at(i)))
    }

    pub fn meet(&self, other: &HyperBox) -> Result<LatticeElement> {
        same_dim(self, other)?;
        let n = self.dim();
        let mut min = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        for i in 0..n {
            let (lo, lo_from_self) = pick(self.min[i], other.min[i], |a, b| a >= b);
            let (hi, hi_from_self) = pick(self.max_at(i), other.max_at(i), |a, b| a <= b);
            if lo >= hi {
                return Ok(LatticeElement::Bottom);
            }
            min.push(lo);
            delta.push(if lo_from_self == hi_from_self {
                // both endpoints from one box: keep its stored offset exactly
                if lo_from_self { self.delta[i] } else { other.delta[i] }
            } else {
                hi - lo
            });
        }
        Ok(LatticeElement::Box(HyperBox { min, delta }))
    }

    pub fn join(&self, other: &HyperBox) -> Result<HyperBox> {
        same_dim(self, other)?;
        let n = self.dim();
        let mut min = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        for i in 0..n {
            let (lo, lo_from_self) = pick(self.min[i], other.min[i], |a, b| a <= b);
            let (hi, hi_from_self) = pick(self.max_at(i), other.max_at(i), |a, b| a >= b);
            min.push(lo);
            delta.push(if lo_from_self == hi_from_self {
                if lo_from_self { self.delta[i] } else { other.delta[i] }
            } else {
                hi - lo
            });
        }
        Ok(HyperBox { min, delta })
    }
}

fn pick(a: f64, b: f64, prefer_a: impl Fn(f64, f64) -> bool) -> (f64, bool) {
    if prefer_a(a, b) {
        (a, true)
    } else {
        (b, false)
    }
}

fn same_dim(a: &HyperBox, b: &HyperBox) -> Result<()> {
    if a.dim() != b.dim() {
        Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() })
    } else {
        Ok(())
    }
}

/// An element of the bounded box lattice.
#[derive(Clone, Debug, PartialEq)]
pub enum LatticeElement {
    Bottom,
    Box(HyperBox),
}

impl From<HyperBox> for LatticeElement {
    fn from(b: HyperBox) -> Self {
        LatticeElement::Box(b)
    }
}

impl LatticeElement {
    pub fn is_bottom(&self) -> bool {
        matches!(self, LatticeElement::Bottom)
    }

    pub fn as_box(&self) -> Option<&HyperBox> {
        match self {
            LatticeElement::Bottom => None,
            LatticeElement::Box(b) => Some(b),
        }
    }

    pub fn log_volume(&self, m: &ProductMeasure) -> f64 {
        match self {
            LatticeElement::Bottom => f64::NEG_INFINITY,
            LatticeElement::Box(b) => b.log_volume(m),
        }
    }

    pub fn volume(&self, m: &ProductMeasure) -> f64 {
        match self {
            LatticeElement::Bottom => 0.0,
            LatticeElement::Box(b) => b.volume(m),
        }
    }
}

pub fn meet(a: &LatticeElement, b: &LatticeElement) -> Result<LatticeElement> {
    match (a, b) {
        (LatticeElement::Box(x), LatticeElement::Box(y)) => x.meet(y),
        _ => Ok(LatticeElement::Bottom),
    }
}

pub fn join(a: &LatticeElement, b: &LatticeElement) -> Result<LatticeElement> {
    match (a, b) {
        (LatticeElement::Box(x), LatticeElement::Box(y)) => Ok(LatticeElement::Box(x.join(y)?)),
        (LatticeElement::Bottom, other) | (other, LatticeElement::Bottom) => Ok(other.clone()),
    }
}

/// Pearson correlation of the two Bernoulli variables whose probabilities are
/// the volumes of `a`, `b` and their meet.
pub fn correlation(a: &HyperBox, b: &HyperBox, m: &ProductMeasure) -> Result<f64> {
    let pa = a.volume(m);
    let pb = b.volume(m);
    for p in [pa, pb] {
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateMarginal(p));
        }
    }
    let pab = a.meet(b)?.volume(m);
    let r = (pab - pa * pb) / (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

/// Returns `(min, delta)` with `min + delta == upper` exactly in floating point,
/// and `min` within one ulp of `lo`. Expects `0 <= lo <= upper`.
pub fn pin_to_upper(lo: f64, upper: f64) -> (f64, f64) {
    let d = upper - lo;
    let m = upper - d;
    (m, upper - m)
}
