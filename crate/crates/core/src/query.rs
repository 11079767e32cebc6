//! Multi-variable inference over a trained [`Model`].
//!
//! Joints are volumes of meets. Queries with negated concepts use
//! inclusion-exclusion over the negated boxes: with `T` the meet of the
//! positive concepts and `F` the negated boxes,
//! `P(T, not F) = vol(T ∪ F) - vol(F)`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lattice::{HyperBox, LatticeElement};
use crate::measure::ProductMeasure;
use crate::model::Model;

pub const DEFAULT_UNION_CAP: usize = 20;

/// A conjunction of concepts, some of them negated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Query {
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

impl Query {
    pub fn new<S: Into<String>>(positives: impl IntoIterator<Item = S>, negatives: impl IntoIterator<Item = S>) -> Self {
        Query {
            positives: positives.into_iter().map(Into::into).collect(),
            negatives: negatives.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses a comma-separated literal list; `!` marks a negated concept.
    /// Blank input is the empty (always true) query.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut q = Query::default();
        for raw in spec.split(',') {
            let lit = raw.trim();
            if lit.is_empty() {
                continue;
            }
            match lit.strip_prefix('!') {
                Some(name) => {
                    let name = name.trim();
                    if name.is_empty() {
                        return Err(Error::InvalidQuery(format!("dangling negation in `{spec}`")));
                    }
                    q.negatives.push(name.to_string());
                }
                None => q.positives.push(lit.to_string()),
            }
        }
        Ok(q)
    }

    pub fn and(&self, other: &Query) -> Query {
        let mut q = self.clone();
        q.positives.extend(other.positives.iter().cloned());
        q.negatives.extend(other.negatives.iter().cloned());
        q
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

fn resolve(model: &Model, names: &[String]) -> Result<Vec<usize>> {
    let ids: BTreeSet<usize> = names.iter().map(|n| model.vocab().id(n)).collect::<Result<_>>()?;
    Ok(ids.into_iter().collect())
}

fn meet_all(model: &Model, ids: &[usize]) -> LatticeElement {
    let mut it = ids.iter();
    let Some(&first) = it.next() else {
        return LatticeElement::Box(HyperBox::top(model.measure()));
    };
    let mut acc = LatticeElement::Box(model.box_at(first));
    for &id in it {
        acc = match &acc {
            LatticeElement::Box(b) => b.meet(&model.box_at(id)).expect("model boxes share a dimension"),
            LatticeElement::Bottom => break,
        };
    }
    acc
}

/// Probability that every concept in `concepts` holds.
pub fn joint<S: AsRef<str>>(model: &Model, concepts: &[S]) -> Result<f64> {
    if concepts.is_empty() {
        return Err(Error::InvalidQuery("joint of an empty concept set".into()));
    }
    let names: Vec<String> = concepts.iter().map(|s| s.as_ref().to_string()).collect();
    let ids = resolve(model, &names)?;
    Ok(meet_all(model, &ids).volume(model.measure()))
}

/// `P(target | evidence)`; empty evidence gives the marginal.
pub fn conditional<S: AsRef<str>>(model: &Model, target: &str, evidence: &[S]) -> Result<f64> {
    let ev: Vec<String> = evidence.iter().map(|s| s.as_ref().to_string()).collect();
    conditional_query(model, &Query::new([target.to_string()], Vec::<String>::new()), &Query::new(ev, Vec::new()))
}

/// `P(target | given)` for arbitrary literal conjunctions.
pub fn conditional_query(model: &Model, target: &Query, given: &Query) -> Result<f64> {
    let denom = query_prob(model, given)?;
    if denom <= 0.0 {
        return Err(Error::NullEvidence);
    }
    let num = query_prob(model, &target.and(given))?;
    Ok((num / denom).clamp(0.0, 1.0))
}

/// Volume of the union of at most `cap` boxes by inclusion-exclusion.
pub fn union_volume(boxes: &[HyperBox], m: &ProductMeasure, cap: usize) -> Result<f64> {
    if boxes.len() > cap {
        return Err(Error::TooManyBoxes { count: boxes.len(), cap });
    }
    for b in boxes {
        if b.dim() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), actual: b.dim() });
        }
    }
    Ok(inclusion_exclusion(boxes, m).clamp(0.0, 1.0))
}

fn inclusion_exclusion(boxes: &[HyperBox], m: &ProductMeasure) -> f64 {
    // Depth-first over index-ordered subsets. Once a running meet is empty,
    // every extension of that subset is empty too and the branch is skipped.
    fn visit(boxes: &[HyperBox], start: usize, current: &HyperBox, size: usize, m: &ProductMeasure, acc: &mut Neumaier) {
        let v = current.volume(m);
        acc.add(if size % 2 == 1 { v } else { -v });
        for (j, next) in boxes.iter().enumerate().skip(start) {
            if let LatticeElement::Box(b) = current.meet(next).expect("dimensions checked") {
                visit(boxes, j + 1, &b, size + 1, m, acc);
            }
        }
    }
    let mut acc = Neumaier::default();
    for (i, b) in boxes.iter().enumerate() {
        visit(boxes, i + 1, b, 1, m, &mut acc);
    }
    acc.total()
}

/// Probability of a conjunction of positive and negated concepts.
pub fn query_prob(model: &Model, q: &Query) -> Result<f64> {
    query_prob_with_cap(model, q, DEFAULT_UNION_CAP)
}

pub fn query_prob_with_cap(model: &Model, q: &Query, cap: usize) -> Result<f64> {
    let pos = resolve(model, &q.positives)?;
    let neg = resolve(model, &q.negatives)?;
    if neg.len() > cap {
        return Err(Error::TooManyBoxes { count: neg.len(), cap });
    }
    if pos.iter().any(|p| neg.binary_search(p).is_ok()) {
        return Ok(0.0);
    }
    let m = model.measure();
    let t = match meet_all(model, &pos) {
        LatticeElement::Bottom => return Ok(0.0),
        LatticeElement::Box(b) => b,
    };
    let t_vol = t.volume(m);
    if neg.is_empty() {
        return Ok(t_vol);
    }
    let neg_boxes: Vec<HyperBox> = neg.iter().map(|&id| model.box_at(id)).collect();
    let mut with_t = Vec::with_capacity(neg_boxes.len() + 1);
    with_t.push(t);
    with_t.extend(neg_boxes.iter().cloned());
    let v1 = inclusion_exclusion(&with_t, m).clamp(0.0, 1.0);
    let v2 = inclusion_exclusion(&neg_boxes, m).clamp(0.0, 1.0);
    Ok((v1 - v2).clamp(0.0, t_vol))
}

/// Compensated summation (Neumaier's variant of Kahan).
#[derive(Default, Clone, Copy, Debug)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
