//! Maximum-likelihood training of box models from unary marginals and pairwise
//! conditionals.
//!
//! Each batch contributes weighted binary cross-entropy terms:
//!
//! * unary: `BCE(t, p(a))`
//! * pair: `BCE(t, P(a|b))` with `P(a|b) = p(a ∧ b) / p(b)` while the boxes
//!   intersect. When they are disjoint the exact joint has no gradient, so a
//!   positive target instead minimizes `t * ln(p(a ∨ b) - p(a) - p(b) + eps)`,
//!   the negated surrogate lower bound `p(a) + p(b) - p(a ∨ b) <= p(a ∧ b)`.
//! * an L1 penalty `1 - F(max_i)` pulling every box's upper corner toward the
//!   top of the support.
//!
//! Gradients are analytic. A volume is a product of per-dimension sides, so its
//! log-gradient is a sum of per-side terms; meet and join sides route their
//! gradient to whichever box attains the coordinatewise extremum (the first
//! argument at exact ties). After every Adam step the parameters are projected
//! back onto the feasible set.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{pin_to_upper, HyperBox, LatticeElement};
use crate::measure::{MeasureKind, ProductMeasure};
use crate::model::{Model, Vocab};

/// Floor applied to `1 - p` inside logarithms.
const COMPLEMENT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExampleKind {
    Unary { concept: usize, target: f64 },
    /// Target is `P(a | b)`.
    Pair { a: usize, b: usize, target: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainExample {
    pub kind: ExampleKind,
    pub weight: f64,
    pub is_negative: bool,
}

impl TrainExample {
    pub fn unary(concept: usize, target: f64) -> Self {
        TrainExample { kind: ExampleKind::Unary { concept, target }, weight: 1.0, is_negative: false }
    }

    pub fn pair(a: usize, b: usize, target: f64) -> Self {
        TrainExample { kind: ExampleKind::Pair { a, b, target }, weight: 1.0, is_negative: false }
    }

    /// A corrupted pair with target 0 whose offsets are frozen during updates.
    pub fn negative(a: usize, b: usize) -> Self {
        TrainExample { kind: ExampleKind::Pair { a, b, target: 0.0 }, weight: 1.0, is_negative: true }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn target(&self) -> f64 {
        match self.kind {
            ExampleKind::Unary { target, .. } | ExampleKind::Pair { target, .. } => target,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let t = self.target();
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidData(format!("target {t} outside [0, 1]")));
        }
        if self.weight.is_nan() || self.weight < 0.0 {
            return Err(Error::InvalidData(format!("negative example weight {}", self.weight)));
        }
        let ids = match self.kind {
            ExampleKind::Unary { concept, .. } => [concept, concept],
            ExampleKind::Pair { a, b, .. } => [a, b],
        };
        if ids.iter().any(|&i| i >= n) {
            return Err(Error::InvalidData(format!("example refers to concept index outside vocabulary of {n}")));
        }
        Ok(())
    }
}

/// Random initialization ranges.
///
/// Free boxes draw `min ~ U(0, min_hi)` and `delta ~ U(side_lo, side_hi)` per
/// dimension. Pinned (POE) boxes draw a CDF-space side `s ~ U(side_lo, side_hi)`
/// and start at `F^{-1}(1 - s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitSpec {
    pub min_hi: f64,
    pub side_lo: f64,
    pub side_hi: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec { min_hi: 0.1, side_lo: 0.2, side_hi: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub measure: MeasureKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub unary_weight: f64,
    pub edge_weight: f64,
    /// Minimum per-dimension offset.
    pub eps_min: f64,
    /// Constant added inside the surrogate logarithm.
    pub surrogate_eps: f64,
    /// Weight of the L1 penalty pulling box maxima to the top of the support.
    pub max_reg: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Pin every box's max to the support's upper bound (POE baseline).
    pub poe_mode: bool,
    /// In POE mode, use twice `dim` so both models have the same parameter count.
    pub poe_double_dim: bool,
    /// Pair terms conditioning on concepts with less mass than this are skipped.
    pub min_evidence_prob: f64,
    pub init: InitSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            measure: MeasureKind::Uniform,
            learning_rate: 0.001,
            batch_size: 800,
            unary_weight: 9.0,
            edge_weight: 1.0,
            eps_min: 1e-6,
            surrogate_eps: 1e-8,
            max_reg: 0.005,
            epochs: 50,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            poe_mode: false,
            poe_double_dim: false,
            min_evidence_prob: 1e-12,
            init: InitSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn effective_dim(&self) -> usize {
        if self.poe_mode && self.poe_double_dim {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn product_measure(&self) -> ProductMeasure {
        ProductMeasure::new(self.measure, self.effective_dim())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("unary_weight", self.unary_weight),
            ("edge_weight", self.edge_weight),
            ("surrogate_eps", self.surrogate_eps),
            ("max_reg", self.max_reg),
            ("min_evidence_prob", self.min_evidence_prob),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and nonnegative")));
            }
        }
        if !(self.eps_min > 0.0 && self.eps_min < 0.5) {
            return bad("eps_min must be in (0, 0.5)");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must be in [0, 1)");
        }
        let i = self.init;
        if !(0.0 <= i.min_hi && 0.0 < i.side_lo && i.side_lo <= i.side_hi && i.side_hi <= 1.0) {
            return bad("init ranges must satisfy 0 <= min_hi, 0 < side_lo <= side_hi <= 1");
        }
        Ok(())
    }
}

/// Dense gradient with the same row-major layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub min: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient { min: vec![0.0; len], delta: vec![0.0; len] }
    }
}

/// Output of [`pair_log_prob`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairLogProb {
    /// `ln p(a ∧ b)` when the boxes intersect; otherwise the surrogate
    /// `ln(p(a ∨ b) - p(a) - p(b) + eps)`, which training minimizes.
    pub value: f64,
    pub used_surrogate: bool,
}

/// `p(a) + p(b) - p(a ∨ b)`, a lower bound on `p(a ∧ b)` that is negative for
/// disjoint boxes.
pub fn surrogate_gap(a: &HyperBox, b: &HyperBox, m: &ProductMeasure) -> Result<f64> {
    let join = a.join(b)?.volume(m);
    let (pa, pb) = (a.volume(m), b.volume(m));
    // exact when one box contains the other: the join then equals the larger one
    Ok(pa.min(pb) + (pa.max(pb) - join))
}

pub fn pair_log_prob(a: &HyperBox, b: &HyperBox, m: &ProductMeasure, surrogate_eps: f64) -> Result<PairLogProb> {
    match a.meet(b)? {
        LatticeElement::Box(ab) => Ok(PairLogProb { value: ab.log_volume(m), used_surrogate: false }),
        LatticeElement::Bottom => {
            let neg_gap = -surrogate_gap(a, b, m)?;
            Ok(PairLogProb { value: (neg_gap.max(0.0) + surrogate_eps).ln(), used_surrogate: true })
        }
    }
}

/// Weighted loss of `batch` and its gradient with respect to every parameter.
pub fn loss(model: &Model, batch: &[TrainExample], cfg: &TrainConfig) -> Result<(f64, Gradient)> {
    let n = model.len();
    for ex in batch {
        ex.validate(n)?;
    }
    let (min, _) = model.params();
    let mut grad = Gradient::zeros(min.len());
    let mut touched = Touched::new(n);
    let value = loss_into(model, batch, cfg, &mut grad, &mut touched)?;
    Ok((value, grad))
}

struct Touched {
    flag: Vec<bool>,
    ids: Vec<usize>,
}

impl Touched {
    fn new(n: usize) -> Self {
        Touched { flag: vec![false; n], ids: Vec::new() }
    }

    fn mark(&mut self, id: usize) {
        if !self.flag[id] {
            self.flag[id] = true;
            self.ids.push(id);
        }
    }

    fn clear(&mut self) {
        for &id in &self.ids {
            self.flag[id] = false;
        }
        self.ids.clear();
    }
}

#[derive(Clone, Copy)]
enum Bound {
    Meet,
    Join,
}

/// Read-only view of the parameters plus gradient accumulation helpers.
struct Geometry<'a> {
    m: &'a ProductMeasure,
    d: usize,
    min: &'a [f64],
    delta: &'a [f64],
}

/// One side of a (possibly combined) box: endpoints and which concept owns each.
#[derive(Clone, Copy)]
struct Side {
    lo: f64,
    lo_owner: usize,
    width: f64,
    hi_owner: usize,
}

impl<'a> Geometry<'a> {
    fn side(&self, id: usize, i: usize) -> Side {
        let k = id * self.d + i;
        Side { lo: self.min[k], lo_owner: id, width: self.delta[k], hi_owner: id }
    }

    fn combined_side(&self, a: usize, b: usize, i: usize, bound: Bound) -> Side {
        let (ka, kb) = (a * self.d + i, b * self.d + i);
        let (amin, bmin) = (self.min[ka], self.min[kb]);
        let (amax, bmax) = (amin + self.delta[ka], bmin + self.delta[kb]);
        let (lo, lo_owner, hi, hi_owner) = match bound {
            Bound::Meet => {
                let (lo, lo_o) = if amin >= bmin { (amin, a) } else { (bmin, b) };
                let (hi, hi_o) = if amax <= bmax { (amax, a) } else { (bmax, b) };
                (lo, lo_o, hi, hi_o)
            }
            Bound::Join => {
                let (lo, lo_o) = if amin <= bmin { (amin, a) } else { (bmin, b) };
                let (hi, hi_o) = if amax >= bmax { (amax, a) } else { (bmax, b) };
                (lo, lo_o, hi, hi_o)
            }
        };
        let width = if lo_owner == hi_owner { self.delta[lo_owner * self.d + i] } else { hi - lo };
        Side { lo, lo_owner, width, hi_owner }
    }

    fn log_vol(&self, id: usize) -> f64 {
        (0..self.d).map(|i| {
            let s = self.side(id, i);
            self.m.log_side(s.lo, s.width)
        }).sum()
    }

    /// `None` when the meet is empty.
    fn log_vol_combined(&self, a: usize, b: usize, bound: Bound) -> Option<f64> {
        let mut acc = 0.0;
        for i in 0..self.d {
            let s = self.combined_side(a, b, i, bound);
            if s.width <= 0.0 {
                return None;
            }
            acc += self.m.log_side(s.lo, s.width);
        }
        Some(acc)
    }

    fn add_side_grad(&self, s: Side, i: usize, g: f64, grad: &mut Gradient, freeze_delta: bool) {
        let (dlo, dhi) = self.m.log_side_grad(s.width);
        grad.min[s.lo_owner * self.d + i] += g * dlo;
        let k = s.hi_owner * self.d + i;
        grad.min[k] += g * dhi;
        if !freeze_delta {
            grad.delta[k] += g * dhi;
        }
    }

    /// Adds `g * d ln vol(id)`.
    fn add_log_vol_grad(&self, id: usize, g: f64, grad: &mut Gradient, freeze_delta: bool) {
        for i in 0..self.d {
            self.add_side_grad(self.side(id, i), i, g, grad, freeze_delta);
        }
    }

    fn add_log_vol_combined_grad(&self, a: usize, b: usize, bound: Bound, g: f64, grad: &mut Gradient, freeze_delta: bool) {
        for i in 0..self.d {
            let s = self.combined_side(a, b, i, bound);
            self.add_side_grad(s, i, g, grad, freeze_delta);
        }
    }

    /// Adds `g * d(1 - F(max))` summed over dimensions; returns the penalty.
    fn add_max_penalty(&self, id: usize, g: f64, grad: &mut Gradient, freeze_delta: bool) -> f64 {
        let mut pen = 0.0;
        for i in 0..self.d {
            let k = id * self.d + i;
            let hi = self.min[k] + self.delta[k];
            let f_hi = match self.m.kind() {
                MeasureKind::Uniform => hi,
                MeasureKind::Exponential => -(-hi).exp_m1(),
            };
            pen += 1.0 - f_hi;
            let dens = self.m.density(hi);
            grad.min[k] -= g * dens;
            if !freeze_delta {
                grad.delta[k] -= g * dens;
            }
        }
        pen
    }
}

/// `ln(1 - exp(lp))` floored at `ln(COMPLEMENT_FLOOR)`, and the derivative of
/// the floored value with respect to `lp`.
fn log_complement(lp: f64) -> (f64, f64) {
    let q = -lp.exp_m1();
    if q > COMPLEMENT_FLOOR {
        (q.ln(), -lp.exp() / q)
    } else {
        (COMPLEMENT_FLOOR.ln(), 0.0)
    }
}

fn loss_into(model: &Model, batch: &[TrainExample], cfg: &TrainConfig, grad: &mut Gradient, touched: &mut Touched) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let (min, delta) = model.params();
    let geo = Geometry { m: model.measure(), d: model.dim(), min, delta };
    let scale = 1.0 / batch.len() as f64;
    let log_floor = cfg.min_evidence_prob.ln();
    let mut total = 0.0;
    let mut skipped = 0usize;

    for ex in batch {
        let freeze = ex.is_negative;
        match ex.kind {
            ExampleKind::Unary { concept: a, target: t } => {
                touched.mark(a);
                let w = cfg.unary_weight * ex.weight * scale;
                let lp = geo.log_vol(a);
                let (lq, dlq) = log_complement(lp);
                total += w * (-t * lp - (1.0 - t) * lq);
                let g = w * (-t - (1.0 - t) * dlq);
                geo.add_log_vol_grad(a, g, grad, freeze);
                if cfg.max_reg > 0.0 {
                    total += cfg.max_reg * scale * geo.add_max_penalty(a, cfg.max_reg * scale, grad, freeze);
                }
            }
            ExampleKind::Pair { a, b, target: t } => {
                touched.mark(a);
                touched.mark(b);
                let w = cfg.edge_weight * ex.weight * scale;
                if cfg.max_reg > 0.0 {
                    let r = cfg.max_reg * scale;
                    total += r * geo.add_max_penalty(a, r, grad, freeze);
                    total += r * geo.add_max_penalty(b, r, grad, freeze);
                }
                let lp_b = geo.log_vol(b);
                if lp_b < log_floor {
                    skipped += 1;
                    continue;
                }
                match geo.log_vol_combined(a, b, Bound::Meet) {
                    Some(lp_ab) => {
                        let lc = (lp_ab - lp_b).min(0.0);
                        let (lq, dlq) = log_complement(lc);
                        total += w * (-t * lc - (1.0 - t) * lq);
                        let g = w * (-t - (1.0 - t) * dlq);
                        if g != 0.0 {
                            geo.add_log_vol_combined_grad(a, b, Bound::Meet, g, grad, freeze);
                            geo.add_log_vol_grad(b, -g, grad, freeze);
                        }
                    }
                    None if t > 0.0 => {
                        let lp_a = geo.log_vol(a);
                        let lp_join = geo.log_vol_combined(a, b, Bound::Join).expect("join is never empty");
                        let (pa, pb, pj) = (lp_a.exp(), lp_b.exp(), lp_join.exp());
                        let neg_gap = pj - pa - pb;
                        let inner = neg_gap.max(0.0) + cfg.surrogate_eps;
                        // shifted by -ln(eps) so the term is zero at its minimum
                        total += w * t * (inner.ln() - cfg.surrogate_eps.ln());
                        if neg_gap > 0.0 {
                            let g = w * t / inner;
                            geo.add_log_vol_combined_grad(a, b, Bound::Join, g * pj, grad, freeze);
                            geo.add_log_vol_grad(a, -g * pa, grad, freeze);
                            geo.add_log_vol_grad(b, -g * pb, grad, freeze);
                        }
                    }
                    None => {}
                }
            }
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} pair terms conditioning on concepts with mass below {}", cfg.min_evidence_prob);
    }

    if model.is_poe() {
        // max is pinned: delta = upper - min, so fold the offset gradient into min
        for &id in &touched.ids {
            for k in id * geo.d..(id + 1) * geo.d {
                grad.min[k] -= grad.delta[k];
                grad.delta[k] = 0.0;
            }
        }
    }

    let mut bad = Vec::new();
    for &id in &touched.ids {
        let rng = id * geo.d..(id + 1) * geo.d;
        if grad.min[rng.clone()].iter().chain(&grad.delta[rng]).any(|g| !g.is_finite()) {
            bad.push(model.vocab().name(id).to_string());
        }
    }
    if !bad.is_empty() {
        return Err(Error::NonFiniteGradient { concepts: bad });
    }
    Ok(total)
}

/// Largest `min` with `min + delta <= upper` in floating point.
fn largest_min(upper: f64, delta: f64) -> f64 {
    let mut m = upper - delta;
    while m + delta > upper {
        m = m.next_down();
    }
    m
}

fn project_params(min: &mut [f64], delta: &mut [f64], m: &ProductMeasure, eps_min: f64, poe: bool) {
    let (lower, upper) = m.support();
    if poe {
        let mut hi = upper - eps_min;
        while upper - hi < eps_min {
            hi = hi.next_down();
        }
        for (mn, dl) in min.iter_mut().zip(delta.iter_mut()) {
            let (p, d) = pin_to_upper(mn.clamp(lower, hi), upper);
            *mn = p;
            *dl = d;
        }
    } else {
        for (mn, dl) in min.iter_mut().zip(delta.iter_mut()) {
            *dl = dl.clamp(eps_min, upper - lower);
            *mn = mn.clamp(lower, largest_min(upper, *dl));
        }
    }
}

/// Euclidean projection onto the feasible set: offsets in `[eps_min, width of
/// support]`, boxes inside the support, and pinned maxima in POE mode.
pub fn project(model: &Model, cfg: &TrainConfig) -> Model {
    let mut out = model.clone();
    let m = *out.measure();
    let poe = out.is_poe();
    let (min, delta) = out.params_mut();
    project_params(min, delta, &m, cfg.eps_min, poe);
    out
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(len: usize, cfg: &TrainConfig) -> Self {
        Adam { beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.adam_eps, t: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    fn step(&mut self, lr: f64, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let step = lr * bc2.sqrt() / bc1;
        let eps_hat = self.eps * bc2.sqrt();
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step * *m / (v.sqrt() + eps_hat);
        }
    }
}

/// Random initial model for `vocab` under `cfg`.
pub fn init_model(vocab: &Vocab, cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    let m = cfg.product_measure();
    let n = vocab.len() * m.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1417);
    let (lower, upper) = m.support();
    let i = cfg.init;
    let mut min = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for _ in 0..n {
        let side = if i.side_hi > i.side_lo { rng.gen_range(i.side_lo..i.side_hi) } else { i.side_lo };
        if cfg.poe_mode {
            let lo = match m.kind() {
                MeasureKind::Uniform => 1.0 - side,
                MeasureKind::Exponential => -side.ln(),
            };
            min.push(lo);
            delta.push(upper - lo);
        } else {
            let lo = if i.min_hi > 0.0 { rng.gen_range(0.0..i.min_hi) } else { 0.0 };
            min.push(lower + lo);
            delta.push(side);
        }
    }
    project_params(&mut min, &mut delta, &m, cfg.eps_min, cfg.poe_mode);
    Model::from_params(vocab.clone(), m, cfg.poe_mode, min, delta)
}

pub enum Init {
    Random,
    From(Model),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev_metric: Option<f64>,
}

/// Stateful projected-Adam trainer.
pub struct Trainer {
    cfg: TrainConfig,
    model: Model,
    adam_min: Adam,
    adam_delta: Adam,
    rng: ChaCha8Rng,
    grad: Gradient,
    touched: Touched,
    order: Vec<usize>,
    epoch: usize,
}

impl Trainer {
    pub fn new(vocab: &Vocab, cfg: &TrainConfig, init: Init) -> Result<Self> {
        cfg.validate()?;
        let model = match init {
            Init::Random => init_model(vocab, cfg)?,
            Init::From(m) => {
                if m.vocab() != vocab || m.dim() != cfg.effective_dim() || m.is_poe() != cfg.poe_mode {
                    return Err(Error::InvalidConfig("initial model does not match vocabulary or config".into()));
                }
                m
            }
        };
        let len = model.len() * model.dim();
        Ok(Trainer {
            cfg: cfg.clone(),
            adam_min: Adam::new(len, cfg),
            adam_delta: Adam::new(len, cfg),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            grad: Gradient::zeros(len),
            touched: Touched::new(model.len()),
            order: Vec::new(),
            epoch: 0,
            model,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// One shuffled pass over `data`; returns the mean batch loss.
    pub fn run_epoch(&mut self, data: &[TrainExample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidData("no training examples".into()));
        }
        for ex in data {
            ex.validate(self.model.len())?;
        }
        self.order.clear();
        self.order.extend(0..data.len());
        self.order.shuffle(&mut self.rng);
        let mut weighted = 0.0;
        let mut batch = Vec::with_capacity(self.cfg.batch_size);
        let order = std::mem::take(&mut self.order);
        for (bi, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            let l = self.step(&batch)?;
            if !l.is_finite() {
                return Err(Error::Diverged { epoch: self.epoch, batch: bi });
            }
            weighted += l * chunk.len() as f64;
        }
        self.order = order;
        self.epoch += 1;
        Ok(weighted / data.len() as f64)
    }

    fn step(&mut self, batch: &[TrainExample]) -> Result<f64> {
        let l = loss_into(&self.model, batch, &self.cfg, &mut self.grad, &mut self.touched);
        let l = match l {
            Ok(l) => l,
            Err(e) => {
                self.reset_grad();
                return Err(e);
            }
        };
        let lr = self.cfg.learning_rate;
        let measure = *self.model.measure();
        let poe = self.model.is_poe();
        let (min, delta) = self.model.params_mut();
        self.adam_min.step(lr, min, &self.grad.min);
        if !poe {
            self.adam_delta.step(lr, delta, &self.grad.delta);
        }
        project_params(min, delta, &measure, self.cfg.eps_min, poe);
        self.reset_grad();
        Ok(l)
    }

    fn reset_grad(&mut self) {
        let d = self.model.dim();
        for &id in &self.touched.ids {
            self.grad.min[id * d..(id + 1) * d].fill(0.0);
            self.grad.delta[id * d..(id + 1) * d].fill(0.0);
        }
        self.touched.clear();
    }
}

pub struct FitResult {
    pub model: Model,
    pub log: Vec<EpochLog>,
}

/// Trains for `cfg.epochs` epochs. `dev`, when given, is evaluated after each
/// epoch and recorded in the log.
pub fn fit(
    vocab: &Vocab,
    data: &[TrainExample],
    cfg: &TrainConfig,
    init: Init,
    mut dev: Option<&mut dyn FnMut(&Model) -> f64>,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::InvalidData("no training examples".into()));
    }
    let mut trainer = Trainer::new(vocab, cfg, init)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss = trainer.run_epoch(data)?;
        let dev_metric = dev.as_mut().map(|f| f(trainer.model()));
        log.push(EpochLog { epoch, loss, dev_metric });
    }
    Ok(FitResult { model: trainer.into_model(), log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_model(boxes: &[(&[f64], &[f64])]) -> Model {
        let d = boxes[0].0.len();
        let vocab = Vocab::new((0..boxes.len()).map(|i| format!("c{i}"))).unwrap();
        let hb = boxes.iter().map(|(lo, hi)| HyperBox::from_bounds(lo, hi).unwrap()).collect();
        Model::new(vocab, hb, ProductMeasure::uniform(d), false).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig { dim: 1, max_reg: 0.0, ..TrainConfig::default() }
    }

    #[test]
    fn surrogate_gap_examples() {
        let u = ProductMeasure::uniform(1);
        let a = HyperBox::interval(0.1, 0.5).unwrap();
        assert!((surrogate_gap(&a, &a, &u).unwrap() - 0.4).abs() < 1e-15);
        let gap = surrogate_gap(&HyperBox::interval(0.0, 0.2).unwrap(), &HyperBox::interval(0.8, 1.0).unwrap(), &u).unwrap();
        assert!((gap + 0.6).abs() < 1e-15);
        let inner = HyperBox::interval(0.3, 0.4).unwrap();
        assert!((surrogate_gap(&inner, &a, &u).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pair_log_prob_branches() {
        let u = ProductMeasure::uniform(1);
        let a = HyperBox::interval(0.0, 0.5).unwrap();
        let r = pair_log_prob(&a, &HyperBox::interval(0.25, 1.0).unwrap(), &u, 1e-8).unwrap();
        assert!(!r.used_surrogate);
        assert!((r.value - 0.25f64.ln()).abs() < 1e-12);
        let r = pair_log_prob(&a, &HyperBox::interval(0.6, 1.0).unwrap(), &u, 1e-8).unwrap();
        assert!(r.used_surrogate);
        let touching = pair_log_prob(&a, &HyperBox::interval(0.5, 1.0).unwrap(), &u, 1e-8).unwrap();
        assert!(touching.used_surrogate);
    }

    #[test]
    fn unary_gradient_vanishes_at_target() {
        let m = uniform_model(&[(&[0.2, 0.1], &[0.7, 0.5])]);
        let p = m.marginal(0);
        let (_, g) = loss(&m, &[TrainExample::unary(0, p)], &TrainConfig { dim: 2, max_reg: 0.0, ..cfg() }).unwrap();
        assert!(g.min.iter().chain(&g.delta).all(|x| x.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn negative_examples_freeze_offsets() {
        let m = uniform_model(&[(&[0.1], &[0.6]), (&[0.4], &[0.9])]);
        let (_, g) = loss(&m, &[TrainExample::negative(0, 1)], &TrainConfig { max_reg: 0.005, ..cfg() }).unwrap();
        assert!(g.delta.iter().all(|&x| x == 0.0));
        assert!(g.min.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn contained_pair_with_target_one_has_zero_gradient() {
        // b inside a: P(a|b) = 1
        let m = uniform_model(&[(&[0.1, 0.1], &[0.9, 0.8]), (&[0.3, 0.2], &[0.5, 0.6])]);
        let (l, g) = loss(&m, &[TrainExample::pair(0, 1, 1.0)], &TrainConfig { dim: 2, ..cfg() }).unwrap();
        assert!(l.abs() < 1e-12);
        assert!(g.min.iter().chain(&g.delta).all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn projection_examples() {
        let c = TrainConfig { dim: 1, ..TrainConfig::default() };
        let inb = uniform_model(&[(&[0.2], &[0.5])]);
        assert_eq!(project(&inb, &c), inb);

        let vocab = Vocab::new(["x"]).unwrap();
        let u = ProductMeasure::uniform(1);
        let zero = Model::from_params(vocab.clone(), u, false, vec![0.3], vec![0.0]).unwrap();
        assert_eq!(project(&zero, &c).delta_row(0), &[1e-6]);

        let over = Model::from_params(vocab.clone(), u, false, vec![0.9], vec![0.3]).unwrap();
        let p = project(&over, &c);
        assert_eq!(p.delta_row(0), &[0.3]);
        assert!((p.min_row(0)[0] - 0.7).abs() < 1e-15);
        p.validate(c.eps_min).unwrap();

        let wide = Model::from_params(vocab, u, false, vec![-0.2], vec![1.7]).unwrap();
        let p = project(&wide, &c);
        assert_eq!((p.min_row(0)[0], p.delta_row(0)[0]), (0.0, 1.0));
    }

    #[test]
    fn poe_projection_pins_max() {
        let vocab = Vocab::new(["x", "y"]).unwrap();
        let u = ProductMeasure::uniform(2);
        let m = Model::from_params(vocab, u, true, vec![0.3, 0.11, 1.2, -0.5], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = TrainConfig { dim: 2, poe_mode: true, ..TrainConfig::default() };
        let p = project(&m, &c);
        p.validate(c.eps_min).unwrap();
        for id in 0..2 {
            assert_eq!(p.box_at(id).maxs(), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let vocab = Vocab::new(["a", "b"]).unwrap();
        let c = TrainConfig { dim: 3, epochs: 0, ..TrainConfig::default() };
        let init = init_model(&vocab, &c).unwrap();
        let r = fit(&vocab, &[TrainExample::unary(0, 0.3)], &c, Init::From(init.clone()), None).unwrap();
        assert_eq!(r.model, init);
        assert!(r.log.is_empty());
    }

    #[test]
    fn init_respects_invariants() {
        let vocab = Vocab::new(["a", "b", "c"]).unwrap();
        for poe in [false, true] {
            for kind in [MeasureKind::Uniform, MeasureKind::Exponential] {
                let c = TrainConfig { dim: 4, poe_mode: poe, measure: kind, ..TrainConfig::default() };
                init_model(&vocab, &c).unwrap().validate(c.eps_min).unwrap();
            }
        }
    }

    #[test]
    fn poe_dim_doubling() {
        let c = TrainConfig { dim: 5, poe_mode: true, poe_double_dim: true, ..TrainConfig::default() };
        assert_eq!(c.effective_dim(), 10);
        assert_eq!(TrainConfig { poe_mode: false, ..c.clone() }.effective_dim(), 5);
    }

    #[test]
    fn invalid_examples_and_configs_are_rejected() {
        let m = uniform_model(&[(&[0.1], &[0.6])]);
        assert!(loss(&m, &[TrainExample::unary(0, 1.5)], &cfg()).is_err());
        assert!(loss(&m, &[TrainExample::unary(3, 0.5)], &cfg()).is_err());
        assert!(loss(&m, &[TrainExample::unary(0, 0.5).with_weight(-1.0)], &cfg()).is_err());
        assert!(TrainConfig { batch_size: 0, ..cfg() }.validate().is_err());
        assert!(TrainConfig { eps_min: 0.0, ..cfg() }.validate().is_err());
    }
}
