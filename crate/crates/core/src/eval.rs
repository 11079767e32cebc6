//! Evaluation metrics: thresholded pair classification, Bernoulli KL and
//! Pearson correlation against gold probabilities.

use crate::error::{Error, Result};
use crate::model::Model;

const PROB_CLAMP: f64 = 1e-12;
const SWEEP_GRID: usize = 200;

/// A `(descendant, ancestor)` pair with a binary label or gold probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPair {
    pub a: usize,
    pub b: usize,
    pub label: f64,
}

impl LabeledPair {
    pub fn new(a: usize, b: usize, label: f64) -> Self {
        LabeledPair { a, b, label }
    }

    pub fn is_positive(&self) -> bool {
        self.label >= 0.5
    }
}

/// `P(target | given)` from two boxes of the model, or `None` when the
/// conditioning box has zero mass.
pub fn pair_conditional(model: &Model, target: usize, given: usize) -> Option<f64> {
    let m = model.measure();
    let g = model.box_at(given);
    let lg = g.log_volume(m);
    if lg == f64::NEG_INFINITY {
        return None;
    }
    let meet = g.meet(&model.box_at(target)).ok()?;
    Some((meet.log_volume(m) - lg).exp().min(1.0))
}

/// `P(b | a)` for every pair.
pub fn pair_scores(model: &Model, pairs: &[LabeledPair]) -> Result<Vec<Option<f64>>> {
    pairs
        .iter()
        .map(|p| {
            if p.a >= model.len() || p.b >= model.len() {
                Err(Error::UnknownConcept(format!("#{}", p.a.max(p.b))))
            } else {
                Ok(pair_conditional(model, p.b, p.a))
            }
        })
        .collect()
}

/// Fraction of pairs classified correctly when predicting positive iff the
/// score is at least `t`. Missing scores predict negative.
pub fn accuracy_at(scores: &[Option<f64>], labels: &[bool], t: f64) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| s.is_some_and(|s| s >= t) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

pub fn classify_accuracy(model: &Model, pairs: &[LabeledPair], t: f64) -> Result<f64> {
    let scores = pair_scores(model, pairs)?;
    let labels: Vec<bool> = pairs.iter().map(LabeledPair::is_positive).collect();
    accuracy_at(&scores, &labels, t)
}

/// Sweeps thresholds over a 200-point grid spanning the observed scores plus
/// every observed score, returning `(t, accuracy)` with the smallest `t` among
/// the best.
pub fn best_threshold(scores: &[Option<f64>], labels: &[bool]) -> Result<(f64, f64)> {
    check_lengths(scores.len(), labels.len())?;
    let mut seen: Vec<(f64, bool)> =
        scores.iter().zip(labels).filter_map(|(s, &y)| s.map(|s| (s, y))).collect();
    seen.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = labels.len();
    let missing_neg = scores.iter().zip(labels).filter(|(s, &y)| s.is_none() && !y).count();
    // pos_below[k]: positives among the k smallest scores
    let mut pos_below = Vec::with_capacity(seen.len() + 1);
    pos_below.push(0usize);
    for &(_, y) in &seen {
        pos_below.push(pos_below.last().unwrap() + y as usize);
    }
    let total_pos = *pos_below.last().unwrap();
    let acc = |t: f64| {
        let k = seen.partition_point(|&(s, _)| s < t);
        let tp = total_pos - pos_below[k];
        let tn = k - pos_below[k] + missing_neg;
        (tp + tn) as f64 / n as f64
    };

    let mut candidates: Vec<f64> = seen.iter().map(|&(s, _)| s).collect();
    if let (Some(&(lo, _)), Some(&(hi, _))) = (seen.first(), seen.last()) {
        for k in 0..SWEEP_GRID {
            candidates.push(lo + (hi - lo) * k as f64 / (SWEEP_GRID - 1) as f64);
        }
        // above every score: predict all negative
        candidates.push(f64::INFINITY);
    } else {
        candidates.push(0.0);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (candidates[0], acc(candidates[0]));
    for &t in &candidates[1..] {
        let a = acc(t);
        if a > best.1 {
            best = (t, a);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbMetrics {
    pub kl: f64,
    pub pearson: f64,
}

/// Mean Bernoulli KL of gold against predicted, both clamped away from 0 and 1.
pub fn bernoulli_kl(predicted: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), gold.len())?;
    let clamp = |p: f64| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let total: f64 = predicted
        .iter()
        .zip(gold)
        .map(|(&q, &g)| {
            let (q, g) = (clamp(q), clamp(g));
            g * (g / q).ln() + (1.0 - g) * ((1.0 - g) / (1.0 - q)).ln()
        })
        .sum();
    Ok(total / gold.len() as f64)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::InvalidData("Pearson correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidData("Pearson correlation is undefined for a constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn prob_metrics(predicted: &[f64], gold: &[f64]) -> Result<ProbMetrics> {
    if predicted.len() < 2 {
        return Err(Error::InvalidData("need at least two probabilities".into()));
    }
    Ok(ProbMetrics { kl: bernoulli_kl(predicted, gold)?, pearson: pearson(predicted, gold)? })
}

/// Pearson correlation restricted to pairs whose gold probability falls in
/// `[lo, hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_gold: f64,
    pub mean_predicted: f64,
    pub pearson: Option<f64>,
}

/// Splits `[0, 1]` into `bins` equal gold-probability ranges, the last one
/// closed.
pub fn calibration_bins(predicted: &[f64], gold: &[f64], bins: usize) -> Result<Vec<CalibrationBin>> {
    check_lengths(predicted.len(), gold.len())?;
    if bins == 0 {
        return Err(Error::InvalidConfig("at least one bin is required".into()));
    }
    let mut members: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); bins];
    for (&p, &g) in predicted.iter().zip(gold) {
        let k = ((g * bins as f64) as usize).min(bins - 1);
        members[k].0.push(p);
        members[k].1.push(g);
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(k, (p, g))| {
            let count = p.len();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            CalibrationBin {
                lo: k as f64 / bins as f64,
                hi: (k + 1) as f64 / bins as f64,
                count,
                mean_gold: mean(&g),
                mean_predicted: mean(&p),
                pearson: pearson(&p, &g).ok(),
            }
        })
        .collect())
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, actual: b });
    }
    if a == 0 {
        return Err(Error::InvalidData("no pairs to evaluate".into()));
    }
    Ok(())
}
