#![allow(dead_code)]

use boxlat::{HyperBox, MeasureKind, Model, ProductMeasure, Vocab};
use rand::Rng;

/// Random box inside the support, sides in `[lo_side, hi_side]` (CDF units for
/// the uniform measure, raw units for the exponential one).
pub fn random_box<R: Rng>(rng: &mut R, m: &ProductMeasure, lo_side: f64, hi_side: f64) -> HyperBox {
    let mut min = Vec::with_capacity(m.dim());
    let mut delta = Vec::with_capacity(m.dim());
    for _ in 0..m.dim() {
        let side = rng.gen_range(lo_side..hi_side);
        let lo = match m.kind() {
            MeasureKind::Uniform => rng.gen_range(0.0..1.0 - side),
            MeasureKind::Exponential => rng.gen_range(0.0..3.0),
        };
        min.push(lo);
        delta.push(side);
    }
    HyperBox::new(min, delta).unwrap()
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

pub fn model_of(boxes: Vec<HyperBox>, m: ProductMeasure) -> Model {
    let vocab = Vocab::new(names(boxes.len())).unwrap();
    Model::new(vocab, boxes, m, false).unwrap()
}

/// Draw from the measure by inverting its CDF.
pub fn sample_coord<R: Rng>(rng: &mut R, kind: MeasureKind) -> f64 {
    let u: f64 = rng.gen();
    match kind {
        MeasureKind::Uniform => u,
        MeasureKind::Exponential => -(-u).ln_1p(),
    }
}

pub fn inside(b: &HyperBox, x: &[f64]) -> bool {
    x.iter().enumerate().all(|(i, &t)| t >= b.min()[i] && t <= b.max_at(i))
}
