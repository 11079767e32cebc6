//! Probabilistic order embeddings: concepts as upward cones under the
//! exponential measure.
//!
//! A cone with apex `x` has mass `exp(-sum x)` and two cones meet at their
//! coordinatewise maximum. The covariance of any two cone variables is
//! nonnegative, so conditioning can only raise probabilities. Trained POE
//! models are represented as boxes whose max is pinned to the support's upper
//! bound (see [`crate::measure::cone_to_box`] and
//! [`crate::train::TrainConfig::poe_mode`]).

use crate::error::{Error, Result};
use crate::lattice::HyperBox;
use crate::measure::{cone_to_box, ProductMeasure};

#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    apex: Vec<f64>,
}

impl Cone {
    pub fn new(apex: Vec<f64>) -> Result<Self> {
        for (dim, &value) in apex.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(Error::NegativeCoordinate { value, dim });
            }
        }
        Ok(Cone { apex })
    }

    pub fn apex(&self) -> &[f64] {
        &self.apex
    }

    pub fn dim(&self) -> usize {
        self.apex.len()
    }

    /// The measure-equivalent max-pinned box in the unit cube.
    pub fn to_box(&self) -> Result<HyperBox> {
        let m = ProductMeasure::exponential(self.dim()).with_exp_cap(f64::MAX);
        cone_to_box(&self.apex, &m)
    }
}

fn check_dims(a: &Cone, b: &Cone) -> Result<()> {
    if a.dim() != b.dim() {
        Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() })
    } else {
        Ok(())
    }
}

pub fn poe_prob(c: &Cone) -> f64 {
    (-c.apex.iter().sum::<f64>()).exp()
}

pub fn poe_joint(a: &Cone, b: &Cone) -> Result<f64> {
    check_dims(a, b)?;
    let s: f64 = a.apex.iter().zip(&b.apex).map(|(x, y)| x.max(*y)).sum();
    Ok((-s).exp())
}

pub fn poe_covariance(a: &Cone, b: &Cone) -> Result<f64> {
    Ok(poe_joint(a, b)? - poe_prob(a) * poe_prob(b))
}

/// `P(a | b)` under the cone measure.
pub fn poe_conditional(a: &Cone, b: &Cone) -> Result<f64> {
    let pb = poe_prob(b);
    if pb == 0.0 {
        return Err(Error::NullEvidence);
    }
    Ok(poe_joint(a, b)? / pb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn cone(v: &[f64]) -> Cone {
        Cone::new(v.to_vec()).unwrap()
    }

    #[test]
    fn prob_examples() {
        assert_eq!(poe_prob(&cone(&[0.0, 0.0, 0.0])), 1.0);
        assert!((poe_prob(&cone(&[LN_2, LN_2])) - 0.25).abs() < 1e-15);
        assert_eq!(poe_prob(&cone(&[1.0, f64::INFINITY])), 0.0);
    }

    #[test]
    fn negative_apex_is_rejected() {
        assert!(matches!(Cone::new(vec![0.1, -0.2]), Err(Error::NegativeCoordinate { dim: 1, .. })));
    }

    #[test]
    fn joint_examples() {
        let a = cone(&[0.3, 1.2]);
        assert_eq!(poe_joint(&a, &a).unwrap(), poe_prob(&a));
        let x = cone(&[1.0, 0.0]);
        let y = cone(&[0.0, 1.0]);
        assert!((poe_joint(&x, &y).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(poe_joint(&a, &cone(&[0.0, 0.0])).unwrap(), poe_prob(&a));
        assert!(poe_joint(&a, &cone(&[0.0])).is_err());
    }

    #[test]
    fn covariance_examples() {
        let half = cone(&[LN_2]);
        assert!((poe_covariance(&half, &half).unwrap() - 0.25).abs() < 1e-15);
        let x = cone(&[1.0, 0.0]);
        let y = cone(&[0.0, 1.0]);
        assert!(poe_covariance(&x, &y).unwrap().abs() < 1e-16);
    }

    #[test]
    fn pinned_box_preserves_mass() {
        let c = cone(&[0.2, 1.5, 3.0]);
        let b = c.to_box().unwrap();
        let v = b.volume(&ProductMeasure::uniform(3));
        assert!((v - poe_prob(&c)).abs() < 1e-12);
        assert!(b.maxs().iter().all(|&m| m == 1.0));
    }
}
