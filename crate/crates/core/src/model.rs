//! The embedded knowledge base: one box per concept under a product measure.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::HyperBox;
use crate::measure::ProductMeasure;

/// Bidirectional concept-id to dense-index map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::default();
        for name in names {
            let name = name.into();
            if v.index.contains_key(&name) {
                return Err(Error::InvalidData(format!("duplicate concept `{name}`")));
            }
            v.push(name);
        }
        Ok(v)
    }

    /// Returns the index of `name`, inserting it if new.
    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.push(name.to_string())
    }

    fn push(&mut self, name: String) -> usize {
        let i = self.names.len();
        self.index.insert(name.clone(), i);
        self.names.push(name);
        i
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownConcept(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    vocab: Vocab,
    measure: ProductMeasure,
    poe: bool,
    // row-major, one row of `dim` values per concept
    min: Vec<f64>,
    delta: Vec<f64>,
}

impl Model {
    pub fn new(vocab: Vocab, boxes: Vec<HyperBox>, measure: ProductMeasure, poe: bool) -> Result<Self> {
        if boxes.len() != vocab.len() {
            return Err(Error::InvalidData(format!(
                "{} boxes for a vocabulary of {}",
                boxes.len(),
                vocab.len()
            )));
        }
        let dim = measure.dim();
        let mut min = Vec::with_capacity(dim * boxes.len());
        let mut delta = Vec::with_capacity(dim * boxes.len());
        for b in &boxes {
            b.check_support(&measure)?;
            min.extend_from_slice(b.min());
            delta.extend_from_slice(b.delta());
        }
        Ok(Model { vocab, measure, poe, min, delta })
    }

    /// Builds a model from row-major parameter arrays (`dim` values per
    /// concept). Only shape and finiteness are checked; use
    /// [`validate`](Self::validate) for the full box invariants.
    pub fn from_params(vocab: Vocab, measure: ProductMeasure, poe: bool, min: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let expected = vocab.len() * measure.dim();
        for len in [min.len(), delta.len()] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, actual: len });
            }
        }
        if min.iter().any(|x| !x.is_finite()) || delta.iter().any(|&d| d.is_nan() || d < 0.0) {
            return Err(Error::InvalidData("non-finite or negative model parameter".into()));
        }
        Ok(Model { vocab, measure, poe, min, delta })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn is_poe(&self) -> bool {
        self.poe
    }

    pub fn min_row(&self, id: usize) -> &[f64] {
        let d = self.dim();
        &self.min[id * d..(id + 1) * d]
    }

    pub fn delta_row(&self, id: usize) -> &[f64] {
        let d = self.dim();
        &self.delta[id * d..(id + 1) * d]
    }

    pub fn box_at(&self, id: usize) -> HyperBox {
        HyperBox::new(self.min_row(id).to_vec(), self.delta_row(id).to_vec())
            .expect("model rows are valid boxes")
    }

    pub fn box_of(&self, name: &str) -> Result<HyperBox> {
        Ok(self.box_at(self.vocab.id(name)?))
    }

    pub fn marginal(&self, id: usize) -> f64 {
        self.box_at(id).volume(&self.measure)
    }

    /// Row-major `(min, delta)` parameter arrays.
    pub fn params(&self) -> (&[f64], &[f64]) {
        (&self.min, &self.delta)
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.min, &mut self.delta)
    }

    /// Checks the box invariants: every offset at least `eps_min`, every
    /// corner inside the support, and pinned maxima for POE models.
    pub fn validate(&self, eps_min: f64) -> Result<()> {
        let (_, upper) = self.measure.support();
        for id in 0..self.len() {
            let b = self.box_at(id);
            b.check_support(&self.measure)?;
            for i in 0..self.dim() {
                if b.delta()[i] < eps_min {
                    return Err(Error::InvalidBox(format!(
                        "`{}` has delta[{i}] = {} below {eps_min}",
                        self.vocab.name(id),
                        b.delta()[i]
                    )));
                }
                if self.poe && b.max_at(i) != upper {
                    return Err(Error::InvalidBox(format!(
                        "POE box `{}` is not pinned in dimension {i}",
                        self.vocab.name(id)
                    )));
                }
            }
        }
        Ok(())
    }
}
