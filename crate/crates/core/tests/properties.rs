mod common;

use std::collections::HashSet;

use boxlat::dag::{asymmetrize, is_acyclic, oe_cycle_probe, perturb_ties, CpdTable};
use boxlat::data::{corrupt_edges, leaf_cooccurrence_cpd, node_marginals, random_hierarchy, transitive_closure};
use boxlat::eval::{bernoulli_kl, pearson};
use boxlat::io::{model_to_string, parse_model};
use boxlat::lattice::{join, meet, LatticeElement};
use boxlat::measure::CoordinateCdf;
use boxlat::query::{joint, query_prob, union_volume, DEFAULT_UNION_CAP};
use boxlat::train::surrogate_gap;
use boxlat::{cone_to_box, project, HyperBox, MeasureKind, Model, ProductMeasure, Query, Result, TrainConfig, Vocab};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn interval() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.9f64, 0.01..0.5f64).prop_map(|(lo, w)| (lo, (lo + w).min(1.0)))
}

fn uniform_box(d: usize) -> impl Strategy<Value = HyperBox> {
    prop::collection::vec(interval(), d).prop_map(|iv| {
        let lo: Vec<f64> = iv.iter().map(|x| x.0).collect();
        let hi: Vec<f64> = iv.iter().map(|x| x.1).collect();
        HyperBox::from_bounds(&lo, &hi).unwrap()
    })
}

fn three_boxes() -> impl Strategy<Value = (HyperBox, HyperBox, HyperBox)> {
    (1..4usize).prop_flat_map(|d| (uniform_box(d), uniform_box(d), uniform_box(d)))
}

fn el(b: &HyperBox) -> LatticeElement {
    LatticeElement::Box(b.clone())
}

fn approx_eq(x: &LatticeElement, y: &LatticeElement) -> bool {
    match (x.as_box(), y.as_box()) {
        (None, None) => true,
        (Some(a), Some(b)) => (0..a.dim())
            .all(|i| (a.min()[i] - b.min()[i]).abs() < 1e-12 && (a.max_at(i) - b.max_at(i)).abs() < 1e-12),
        _ => false,
    }
}

struct PowerCdfs(Vec<f64>);

impl CoordinateCdf for PowerCdfs {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn cdf_at(&self, i: usize, t: f64) -> Result<f64> {
        Ok(t.clamp(0.0, 1.0).powf(self.0[i]))
    }
}

proptest! {
    #[test]
    fn meet_and_join_are_commutative((a, b, _) in three_boxes()) {
        prop_assert_eq!(meet(&el(&a), &el(&b)).unwrap(), meet(&el(&b), &el(&a)).unwrap());
        let (x, y) = (join(&el(&a), &el(&b)).unwrap(), join(&el(&b), &el(&a)).unwrap());
        prop_assert!(approx_eq(&x, &y));
    }

    #[test]
    fn meet_and_join_are_associative((a, b, c) in three_boxes()) {
        let (a, b, c) = (el(&a), el(&b), el(&c));
        let l = meet(&meet(&a, &b).unwrap(), &c).unwrap();
        let r = meet(&a, &meet(&b, &c).unwrap()).unwrap();
        prop_assert!(approx_eq(&l, &r));
        let l = join(&join(&a, &b).unwrap(), &c).unwrap();
        let r = join(&a, &join(&b, &c).unwrap()).unwrap();
        prop_assert!(approx_eq(&l, &r));
    }

    #[test]
    fn lattice_is_idempotent_and_absorptive((a, b, _) in three_boxes()) {
        let (a, b) = (el(&a), el(&b));
        prop_assert_eq!(meet(&a, &a).unwrap(), a.clone());
        prop_assert_eq!(join(&a, &a).unwrap(), a.clone());
        prop_assert!(approx_eq(&meet(&a, &join(&a, &b).unwrap()).unwrap(), &a));
        prop_assert!(approx_eq(&join(&a, &meet(&a, &b).unwrap()).unwrap(), &a));
        let bottom = LatticeElement::Bottom;
        prop_assert_eq!(meet(&a, &bottom).unwrap(), LatticeElement::Bottom);
        prop_assert_eq!(join(&a, &bottom).unwrap(), a);
    }

    #[test]
    fn volume_is_monotone((a, b, _) in three_boxes()) {
        let m = ProductMeasure::uniform(a.dim());
        let (pa, pb) = (a.volume(&m), b.volume(&m));
        let pm = a.meet(&b).unwrap().volume(&m);
        let pj = a.join(&b).unwrap().volume(&m);
        prop_assert!(pm <= pa.min(pb) + 1e-15);
        prop_assert!(pj >= pa.max(pb) - 1e-15);
        prop_assert!(surrogate_gap(&a, &b, &m).unwrap() <= pm + 1e-12);
    }

    #[test]
    fn cones_under_any_product_measure_correlate_positively(
        exps in prop::collection::vec(0.2..5.0f64, 1..5),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = exps.len();
        let cdfs = PowerCdfs(exps);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (a, b) = (cone_to_box(&x, &cdfs).unwrap(), cone_to_box(&y, &cdfs).unwrap());
        let u = ProductMeasure::uniform(d);
        for bx in [&a, &b] {
            prop_assert!((0..d).all(|i| bx.max_at(i) == 1.0));
        }
        let cov = a.meet(&b).unwrap().volume(&u) - a.volume(&u) * b.volume(&u);
        prop_assert!(cov >= -1e-12);
    }

    #[test]
    fn negation_splits_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = ProductMeasure::uniform(2);
        let boxes: Vec<HyperBox> = (0..3).map(|_| random_box(&mut rng, &u, 0.1, 0.8)).collect();
        let m = model_of(boxes, u);
        let pa = joint(&m, &["c0"]).unwrap();
        let pab = joint(&m, &["c0", "c1"]).unwrap();
        let pnb = query_prob(&m, &Query::new(["c0"], ["c1"])).unwrap();
        prop_assert!((pa - pab - pnb).abs() < 1e-12);
        let p3 = query_prob(&m, &Query::new(["c0"], ["c1", "c2"])).unwrap();
        let p3r = query_prob(&m, &Query::new(["c0"], ["c2", "c1"])).unwrap();
        prop_assert_eq!(p3, p3r);
        prop_assert!(p3 <= pnb + 1e-15);
    }

    #[test]
    fn queries_ignore_concept_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = ProductMeasure::uniform(3);
        let boxes: Vec<HyperBox> = (0..4).map(|_| random_box(&mut rng, &u, 0.3, 0.9)).collect();
        let m = model_of(boxes, u);
        let a = query_prob(&m, &Query::new(["c0", "c1"], ["c2", "c3"])).unwrap();
        let b = query_prob(&m, &Query::new(["c1", "c0"], ["c3", "c2"])).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn union_volume_bounds(seed in any::<u64>(), n in 1..7usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = ProductMeasure::uniform(2);
        let boxes: Vec<HyperBox> = (0..n).map(|_| random_box(&mut rng, &u, 0.1, 0.6)).collect();
        let v = union_volume(&boxes, &u, DEFAULT_UNION_CAP).unwrap();
        let sum: f64 = boxes.iter().map(|b| b.volume(&u)).sum();
        let max = boxes.iter().map(|b| b.volume(&u)).fold(0.0, f64::max);
        prop_assert!(v <= sum + 1e-12 && v >= max - 1e-12 && v <= 1.0 + 1e-12);
    }

    #[test]
    fn random_jpds_asymmetrize_to_dags(k in 2..7usize, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p: Vec<f64> = (0..1usize << k).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let t = CpdTable::from_jpd(&p, k).unwrap();
        let g = asymmetrize(&t.conditional_matrix());
        prop_assert!(is_acyclic(&g));
        // every edge climbs from the rarer concept to the more common one
        for e in g.edges() {
            prop_assert!(t.marginal(e.src) < t.marginal(e.dst));
        }
    }

    #[test]
    fn tie_perturbation_breaks_ties(seed in any::<u64>()) {
        // uniform independent Bernoullis have identical marginals
        let p = vec![0.125; 8];
        let t = CpdTable::from_jpd(&p, 3).unwrap();
        let q = perturb_ties(&t, 1e-3, seed).unwrap();
        let m = q.marginals();
        prop_assert!(m[0] != m[1] && m[1] != m[2] && m[0] != m[2]);
        prop_assert!(is_acyclic(&asymmetrize(&q.conditional_matrix())));
    }

    #[test]
    fn model_files_round_trip(seed in any::<u64>(), d in 1..5usize, n in 1..6usize, expo in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = if expo { ProductMeasure::exponential(d) } else { ProductMeasure::uniform(d) };
        let boxes: Vec<HyperBox> = (0..n).map(|_| random_box(&mut rng, &m, 0.01, 0.9)).collect();
        let model = model_of(boxes, m);
        let s = model_to_string(&model).unwrap();
        let back = parse_model(&s, "mem").unwrap();
        prop_assert_eq!(model_to_string(&back).unwrap(), s);
        for i in 0..n {
            prop_assert_eq!(back.marginal(i).to_bits(), model.marginal(i).to_bits());
        }
    }

    #[test]
    fn projection_is_feasible_and_idempotent(
        mins in prop::collection::vec(-0.5..1.5f64, 6),
        deltas in prop::collection::vec(-0.5..1.5f64, 6),
        poe in any::<bool>(),
    ) {
        let vocab = Vocab::new(["a", "b", "c"]).unwrap();
        let m = ProductMeasure::uniform(2);
        let deltas: Vec<f64> = deltas.iter().map(|x| x.abs()).collect();
        let raw = Model::from_params(vocab, m, poe, mins, deltas).unwrap();
        let cfg = TrainConfig { dim: 2, poe_mode: poe, ..TrainConfig::default() };
        let p = project(&raw, &cfg);
        prop_assert!(p.validate(cfg.eps_min).is_ok());
        let again = project(&p, &cfg);
        prop_assert_eq!(again.params(), p.params());
    }

    #[test]
    fn pearson_is_affine_invariant(
        x in prop::collection::vec(0.0..1.0f64, 3..20),
        scale in 0.1..10.0f64,
        shift in -5.0..5.0f64,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (v + 0.1 * i as f64).sin().abs()).collect();
        if let (Ok(r1), Ok(r2)) = (pearson(&x, &y), pearson(&x.iter().map(|v| scale * v + shift).collect::<Vec<_>>(), &y)) {
            prop_assert!((r1 - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_ignores_pair_order(p in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..20)) {
        let (a, b): (Vec<f64>, Vec<f64>) = p.iter().copied().unzip();
        let (ra, rb): (Vec<f64>, Vec<f64>) = p.iter().rev().copied().unzip();
        prop_assert!((bernoulli_kl(&a, &b).unwrap() - bernoulli_kl(&ra, &rb).unwrap()).abs() < 1e-12);
        prop_assert!(bernoulli_kl(&a, &b).unwrap() >= -1e-15);
    }
}

#[test]
fn box_lattice_is_not_distributive() {
    let b = |lo, hi| LatticeElement::Box(HyperBox::interval(lo, hi).unwrap());
    let (x, y, z) = (b(0.25, 0.35), b(0.0, 0.2), b(0.4, 0.6));
    let lhs = meet(&x, &join(&y, &z).unwrap()).unwrap();
    let rhs = join(&meet(&x, &y).unwrap(), &meet(&x, &z).unwrap()).unwrap();
    assert_eq!(lhs, x);
    assert_eq!(rhs, LatticeElement::Bottom);
}

#[test]
fn order_embedding_graphs_stay_acyclic() {
    let r = oe_cycle_probe(2000, 6, 2, 17);
    assert_eq!(r.cyclic, 0, "{:?}", r.first_cycle);
}

#[test]
fn hierarchy_statistics_are_consistent() {
    let h = random_hierarchy(300, 0.1, 5).unwrap();
    let closure = transitive_closure(&h);
    let marg = node_marginals(&h, true);
    assert!(marg.iter().all(|&p| p > 0.0 && p <= 1.0));
    // ancestors are at least as probable as their descendants
    for &(c, p) in &closure {
        assert!(marg[p] > marg[c]);
    }
    let t = leaf_cooccurrence_cpd(&h).unwrap();
    for (i, j, pij) in t.nonzero_joints() {
        assert!(pij <= t.marginal(i).min(t.marginal(j)) + 1e-12);
    }
    for &(c, p) in &closure {
        assert!((t.conditional(p, c) - 1.0).abs() < 1e-12, "every leaf under the child is under the parent");
    }
    let known: HashSet<_> = closure.iter().copied().collect();
    let negs = corrupt_edges(&closure, &known, h.len(), 2, 3).unwrap();
    assert!(negs.iter().all(|e| !known.contains(e)));
}

#[test]
fn exponential_and_uniform_agree_after_cone_mapping() {
    let e = ProductMeasure::exponential(3);
    let x = [0.3, 1.2, 0.05];
    let b = cone_to_box(&x, &e).unwrap();
    let u = ProductMeasure::uniform(3);
    let direct: f64 = (-(x.iter().sum::<f64>())).exp();
    assert!((b.volume(&u) - direct).abs() < 1e-15);
    assert_eq!(MeasureKind::Exponential, e.kind());
}
