//! Product probability measures over the embedding space.
//!
//! A [`ProductMeasure`] factorizes per coordinate, so the mass of a box is the
//! product of per-dimension CDF differences. Two kinds are provided: uniform on
//! the unit interval and the unit-rate exponential on the nonnegative half line.
//! The exponential support is clipped at a configurable coordinate; the mass
//! beyond the default cap of 50 is below 2e-22 and treated as zero.
//!
//! [`cone_to_box`] maps an upward cone `{z : z >= x}` to the box
//! `prod_i [F_i(x_i), 1]` in the unit cube, which has the same mass under the
//! uniform measure as the cone has under the original one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{pin_to_upper, HyperBox};

pub const DEFAULT_EXP_CAP: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Uniform,
    Exponential,
}

impl MeasureKind {
    pub fn token(self) -> &'static str {
        match self {
            MeasureKind::Uniform => "uniform",
            MeasureKind::Exponential => "exponential",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MeasureKind::Uniform),
            "exponential" => Ok(MeasureKind::Exponential),
            other => Err(Error::InvalidData(format!("unknown measure `{other}`"))),
        }
    }
}

/// Per-coordinate CDFs of a product measure.
///
/// Implemented by [`ProductMeasure`]; tests implement it for arbitrary
/// monotone CDFs.
pub trait CoordinateCdf {
    fn dim(&self) -> usize;
    fn cdf_at(&self, dim: usize, t: f64) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductMeasure {
    kind: MeasureKind,
    dim: usize,
    exp_cap: f64,
}

impl ProductMeasure {
    pub fn new(kind: MeasureKind, dim: usize) -> Self {
        ProductMeasure { kind, dim, exp_cap: DEFAULT_EXP_CAP }
    }

    pub fn uniform(dim: usize) -> Self {
        Self::new(MeasureKind::Uniform, dim)
    }

    pub fn exponential(dim: usize) -> Self {
        Self::new(MeasureKind::Exponential, dim)
    }

    /// Overrides the exponential support cap. Ignored for the uniform kind.
    pub fn with_exp_cap(mut self, cap: f64) -> Self {
        assert!(cap > 0.0 && cap.is_finite(), "exponential cap must be positive");
        self.exp_cap = cap;
        self
    }

    pub fn exp_cap(&self) -> f64 {
        self.exp_cap
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Closed support interval of every coordinate.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            MeasureKind::Uniform => (0.0, 1.0),
            MeasureKind::Exponential => (0.0, self.exp_cap),
        }
    }

    pub fn in_support(&self, t: f64) -> bool {
        let (lo, hi) = self.support();
        t >= lo && t <= hi
    }

    pub fn check_support(&self, t: f64, dim: usize) -> Result<()> {
        if self.in_support(t) {
            Ok(())
        } else {
            let (lo, hi) = self.support();
            Err(Error::OutsideSupport { value: t, dim, lo, hi })
        }
    }

    pub fn cdf(&self, t: f64, dim: usize) -> Result<f64> {
        if dim >= self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: dim + 1 });
        }
        self.check_support(t, dim)?;
        Ok(self.cdf_unchecked(t))
    }

    fn cdf_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            MeasureKind::Uniform => t,
            MeasureKind::Exponential => -(-t).exp_m1(),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match self.kind {
            MeasureKind::Uniform => 1.0,
            MeasureKind::Exponential => (-t).exp(),
        }
    }

    /// `ln(F(lo + width) - F(lo))`, computed without forming the difference.
    pub fn log_side(&self, lo: f64, width: f64) -> f64 {
        if width <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            MeasureKind::Uniform => width.ln(),
            MeasureKind::Exponential => -lo + (-(-width).exp_m1()).ln(),
        }
    }

    /// Partial derivatives of [`log_side`](Self::log_side) with respect to the
    /// lower and upper endpoints of the interval.
    pub fn log_side_grad(&self, width: f64) -> (f64, f64) {
        match self.kind {
            MeasureKind::Uniform => (-1.0 / width, 1.0 / width),
            // d/dlo = -f(lo)/s = 1/expm1(-w); d/dhi = f(hi)/s = 1/expm1(w)
            MeasureKind::Exponential => (1.0 / (-width).exp_m1(), 1.0 / width.exp_m1()),
        }
    }
}

impl CoordinateCdf for ProductMeasure {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cdf_at(&self, dim: usize, t: f64) -> Result<f64> {
        self.cdf(t, dim)
    }
}

/// Maps the cone `{z : z >= x}` to the max-pinned unit-cube box
/// `prod_i [F_i(x_i), 1]`.
pub fn cone_to_box<C: CoordinateCdf + ?Sized>(x: &[f64], cdfs: &C) -> Result<HyperBox> {
    if x.len() != cdfs.dim() {
        return Err(Error::DimensionMismatch { expected: cdfs.dim(), actual: x.len() });
    }
    let mut min = Vec::with_capacity(x.len());
    let mut delta = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let u = cdfs.cdf_at(i, xi)?;
        let (lo, d) = pin_to_upper(u, 1.0);
        min.push(lo);
        delta.push(d);
    }
    HyperBox::new(min, delta)
}
