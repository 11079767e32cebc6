//! Turning pairwise score tables into directed graphs.
//!
//! [`asymmetrize`] keeps, for every unordered pair, only the larger of the two
//! opposing entries. Applied to a conditional probability table whose unary
//! marginals are distinct this always yields a DAG: `P(i|j) > P(j|i)` exactly
//! when `p(i) > p(j)`, so every edge climbs the marginal order. Tables of
//! pairwise Gaussian KL divergences carry no such guarantee; [`kl_graph`]
//! reproduces a five-Gaussian counterexample.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Vocab;

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare { rows: n, row, cols: r.len() });
            }
            data.extend(r);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Digraph {
    n: usize,
    edges: Vec<Edge>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { n, edges: Vec::new() }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Digraph::new(n);
        for &(s, d) in edges {
            g.add_edge(s, d, 1.0)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, weight: f64) -> Result<()> {
        if src == dst {
            return Err(Error::InvalidData(format!("self-loop on vertex {src}")));
        }
        if src >= self.n || dst >= self.n {
            return Err(Error::InvalidData(format!("edge {src}->{dst} outside {} vertices", self.n)));
        }
        self.edges.push(Edge { src, dst, weight });
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.src].push(e.dst);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

/// Keeps edge `j -> i` with weight `scores[i][j]` iff `scores[i][j] > scores[j][i]`.
/// Ties, including the diagonal, produce no edge.
pub fn asymmetrize(scores: &SquareMatrix) -> Digraph {
    let n = scores.n();
    let mut g = Digraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && scores.get(i, j) > scores.get(j, i) {
                g.edges.push(Edge { src: j, dst: i, weight: scores.get(i, j) });
            }
        }
    }
    g
}

/// A topological order, or one directed cycle as a witness.
pub fn topological_order(g: &Digraph) -> std::result::Result<Vec<usize>, Vec<usize>> {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;
    let adj = g.adjacency();
    let mut color = vec![WHITE; g.n];
    let mut parent = vec![usize::MAX; g.n];
    let mut post = Vec::with_capacity(g.n);
    for root in 0..g.n {
        if color[root] != WHITE {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = GREY;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = adj[v].get(*next) {
                *next += 1;
                match color[w] {
                    WHITE => {
                        color[w] = GREY;
                        parent[w] = v;
                        stack.push((w, 0));
                    }
                    GREY => {
                        let mut cycle = vec![v];
                        let mut u = v;
                        while u != w {
                            u = parent[u];
                            cycle.push(u);
                        }
                        cycle.reverse();
                        return Err(canonical_cycle(cycle));
                    }
                    _ => {}
                }
            } else {
                color[v] = BLACK;
                post.push(v);
                stack.pop();
            }
        }
    }
    post.reverse();
    Ok(post)
}

fn canonical_cycle(mut cycle: Vec<usize>) -> Vec<usize> {
    if let Some(pos) = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i) {
        cycle.rotate_left(pos);
    }
    cycle
}

pub fn is_acyclic(g: &Digraph) -> bool {
    topological_order(g).is_ok()
}

pub fn find_cycle(g: &Digraph) -> Option<Vec<usize>> {
    topological_order(g).err()
}

/// Unary marginals plus symmetric pairwise joints of Bernoulli variables.
///
/// Conditionals are derived as `P(i | j) = joint(i, j) / p(j)`, so the
/// consistency `P(i|j) p(j) = P(j|i) p(i)` holds by construction. Joints are
/// stored sparsely; absent pairs have joint probability zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CpdTable {
    vocab: Vocab,
    marginals: Vec<f64>,
    joints: BTreeMap<(usize, usize), f64>,
}

const JOINT_TOL: f64 = 1e-9;

impl CpdTable {
    pub fn new(vocab: Vocab, marginals: Vec<f64>, joints: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        if marginals.len() != vocab.len() {
            return Err(Error::InvalidData(format!("{} marginals for {} concepts", marginals.len(), vocab.len())));
        }
        for (i, &p) in marginals.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidData(format!("marginal of `{}` is {p}, outside (0, 1]", vocab.name(i))));
            }
        }
        let mut normalized = BTreeMap::new();
        for (&(i, j), &v) in &joints {
            if i == j || i >= vocab.len() || j >= vocab.len() {
                return Err(Error::InvalidData(format!("invalid joint index ({i}, {j})")));
            }
            if !(v >= 0.0 && v <= marginals[i].min(marginals[j]) + JOINT_TOL) {
                return Err(Error::InvalidData(format!(
                    "joint of `{}` and `{}` is {v}, inconsistent with marginals",
                    vocab.name(i),
                    vocab.name(j)
                )));
            }
            let key = (i.min(j), i.max(j));
            if let Some(prev) = normalized.insert(key, v) {
                if (prev - v).abs() > JOINT_TOL {
                    return Err(Error::InvalidData(format!("asymmetric joint for ({i}, {j})")));
                }
            }
        }
        Ok(CpdTable { vocab, marginals, joints: normalized })
    }

    /// Exact pairwise statistics of a joint distribution over `k` Bernoulli
    /// variables; `probs[s]` is the probability of the assignment whose bit `i`
    /// is variable `i`.
    pub fn from_jpd(probs: &[f64], k: usize) -> Result<Self> {
        if probs.len() != 1 << k {
            return Err(Error::InvalidData(format!("expected {} probabilities, got {}", 1usize << k, probs.len())));
        }
        let mut marg = vec![0.0; k];
        let mut joint = vec![0.0; k * k];
        for (s, &p) in probs.iter().enumerate() {
            for i in 0..k {
                if s >> i & 1 == 1 {
                    marg[i] += p;
                    for j in i + 1..k {
                        if s >> j & 1 == 1 {
                            joint[i * k + j] += p;
                        }
                    }
                }
            }
        }
        let vocab = Vocab::new((0..k).map(|i| format!("x{i}")))?;
        let joints = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| ((i, j), joint[i * k + j])).collect();
        CpdTable::new(vocab, marg, joints)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    pub fn marginal(&self, i: usize) -> f64 {
        self.marginals[i]
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn joint(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.marginals[i];
        }
        self.joints.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// `P(i | j)`, clamped to `[0, 1]`.
    pub fn conditional(&self, i: usize, j: usize) -> f64 {
        (self.joint(i, j) / self.marginals[j]).clamp(0.0, 1.0)
    }

    /// Nonzero joints as `(i, j, joint)` with `i < j`.
    pub fn nonzero_joints(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.joints.iter().filter(|(_, &v)| v > 0.0).map(|(&(i, j), &v)| (i, j, v))
    }

    /// Dense `C[i][j] = P(i | j)` with ones on the diagonal.
    pub fn conditional_matrix(&self) -> SquareMatrix {
        let n = self.len();
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, if i == j { 1.0 } else { self.conditional(i, j) });
            }
        }
        m
    }
}

/// Mixes the underlying joint distribution with weight `lambda` of a random
/// product of independent Bernoullis, which almost surely separates equal
/// marginals. The result is a dense table.
pub fn perturb_ties(table: &CpdTable, lambda: f64, seed: u64) -> Result<CpdTable> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidConfig(format!("perturbation weight {lambda} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = table.len();
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let marginals: Vec<f64> = (0..n).map(|i| (1.0 - lambda) * table.marginal(i) + lambda * q[i]).collect();
    let mut joints = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = (1.0 - lambda) * table.joint(i, j) + lambda * q[i] * q[j];
            joints.insert((i, j), v.min(marginals[i]).min(marginals[j]));
        }
    }
    CpdTable::new(table.vocab.clone(), marginals, joints)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), actual: variance.len() });
        }
        if variance.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidData("variances must be positive".into()));
        }
        Ok(DiagGaussian { mean, variance })
    }
}

/// `KL(a || b)` for diagonal Gaussians.
pub fn gaussian_kl(a: &DiagGaussian, b: &DiagGaussian) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::DimensionMismatch { expected: a.mean.len(), actual: b.mean.len() });
    }
    let mut kl = 0.0;
    for i in 0..a.mean.len() {
        let (va, vb) = (a.variance[i], b.variance[i]);
        let dm = b.mean[i] - a.mean[i];
        kl += va / vb + dm * dm / vb - 1.0 + (vb / va).ln();
    }
    Ok(0.5 * kl)
}

/// Which divergence fills entry `(i, j)` of the score matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KlDirection {
    /// `A[i][j] = KL(G_i || G_j)`
    Forward,
    /// `A[i][j] = KL(G_j || G_i)`
    Reverse,
}

pub fn kl_matrix(gaussians: &[DiagGaussian], direction: KlDirection) -> Result<SquareMatrix> {
    let n = gaussians.len();
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = match direction {
                    KlDirection::Forward => gaussian_kl(&gaussians[i], &gaussians[j])?,
                    KlDirection::Reverse => gaussian_kl(&gaussians[j], &gaussians[i])?,
                };
                a.set(i, j, v);
            }
        }
    }
    Ok(a)
}

/// Drops every pair whose opposing entries differ by less than `threshold`,
/// then asymmetrizes.
pub fn threshold_asymmetrize(scores: &SquareMatrix, threshold: f64) -> Result<Digraph> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidConfig(format!("threshold {threshold} must be nonnegative")));
    }
    let mut s = scores.clone();
    let n = s.n();
    for i in 0..n {
        for j in i + 1..n {
            if (s.get(i, j) - s.get(j, i)).abs() < threshold {
                let v = s.get(i, j).max(s.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
    }
    Ok(asymmetrize(&s))
}

pub fn kl_graph(gaussians: &[DiagGaussian], threshold: f64, direction: KlDirection) -> Result<Digraph> {
    threshold_asymmetrize(&kl_matrix(gaussians, direction)?, threshold)
}

/// Order-embedding violation energy of "x is below y": `|max(0, y - x)|^2`.
pub fn oe_energy(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (b - a).max(0.0).powi(2)).sum()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OeProbeReport {
    pub trials: usize,
    pub cyclic: usize,
    pub first_cycle: Option<Vec<usize>>,
}

/// Samples random order-embedding point sets, scores every ordered pair by
/// negated energy and checks whether the asymmetrized graph is acyclic.
pub fn oe_cycle_probe(trials: usize, points: usize, dim: usize, seed: u64) -> OeProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OeProbeReport { trials, ..Default::default() };
    let mut xs = vec![0.0; points * dim];
    let mut s = SquareMatrix::zeros(points);
    for _ in 0..trials {
        for x in xs.iter_mut() {
            *x = rng.gen_range(0.0..1.0);
        }
        for i in 0..points {
            for j in 0..points {
                if i != j {
                    // entry (i, j) scores "j is below i"
                    let e = oe_energy(&xs[j * dim..(j + 1) * dim], &xs[i * dim..(i + 1) * dim]);
                    s.set(i, j, -e);
                }
            }
        }
        if let Some(c) = find_cycle(&asymmetrize(&s)) {
            report.cyclic += 1;
            report.first_cycle.get_or_insert(c);
        }
    }
    report
}

/// The five diagonal Gaussians of the KL cycle counterexample, vertices 1..=5.
pub fn kl_counterexample() -> Vec<DiagGaussian> {
    [
        ([-5.0, -3.0], [3.0, 7.0]),
        ([-3.0, 5.0], [7.0, 4.0]),
        ([-5.0, -6.0], [8.0, 1.0]),
        ([-7.0, 6.0], [5.0, 5.0]),
        ([9.0, 3.0], [5.0, 9.0]),
    ]
    .into_iter()
    .map(|(m, v)| DiagGaussian::new(m.to_vec(), v.to_vec()).expect("valid constants"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymmetrize_examples() {
        let sym = SquareMatrix::from_rows(vec![vec![1.0, 0.4, 0.2], vec![0.4, 1.0, 0.7], vec![0.2, 0.7, 1.0]]).unwrap();
        assert!(asymmetrize(&sym).edges().is_empty());
        // C[0][1] = 0.9 > C[1][0] = 0.3 keeps 1 -> 0
        let m = SquareMatrix::from_rows(vec![vec![1.0, 0.9], vec![0.3, 1.0]]).unwrap();
        let g = asymmetrize(&m);
        assert_eq!(g.edges(), &[Edge { src: 1, dst: 0, weight: 0.9 }]);
    }

    #[test]
    fn non_square_matrix_is_rejected() {
        assert!(matches!(
            SquareMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0]]),
            Err(Error::NotSquare { rows: 2, row: 1, cols: 1 })
        ));
    }

    #[test]
    fn acyclicity_examples() {
        assert!(is_acyclic(&Digraph::new(0)));
        assert!(is_acyclic(&Digraph::new(3)));
        let cyc = Digraph::from_edges(4, &[(1, 2), (2, 3), (3, 1)]).unwrap();
        assert_eq!(find_cycle(&cyc), Some(vec![1, 2, 3]));
        let chain = Digraph::from_edges(4, &[(1, 2), (2, 3)]).unwrap();
        let order = topological_order(&chain).unwrap();
        let pos = |v| order.iter().position(|&x| x == v).unwrap();
        assert!(pos(1) < pos(2) && pos(2) < pos(3));
        assert!(Digraph::from_edges(2, &[(0, 0)]).is_err());
    }

    #[test]
    fn cpd_table_checks_consistency() {
        let v = Vocab::new(["a", "b"]).unwrap();
        let mut j = BTreeMap::new();
        j.insert((0, 1), 0.6);
        assert!(CpdTable::new(v.clone(), vec![0.5, 0.8], j).is_err());
        assert!(CpdTable::new(v, vec![0.0, 0.8], BTreeMap::new()).is_err());
    }

    #[test]
    fn from_jpd_computes_pairwise_statistics() {
        // x0 and x1 always equal: states 00 and 11 with 0.5 each
        let t = CpdTable::from_jpd(&[0.5, 0.0, 0.0, 0.5], 2).unwrap();
        assert_eq!(t.marginal(0), 0.5);
        assert_eq!(t.joint(0, 1), 0.5);
        assert_eq!(t.conditional(1, 0), 1.0);
    }

    #[test]
    fn perturb_ties_examples() {
        let v = Vocab::new(["a", "b", "c"]).unwrap();
        let mut j = BTreeMap::new();
        j.insert((0, 1), 0.1);
        j.insert((1, 2), 0.2);
        let t = CpdTable::new(v, vec![0.4, 0.4, 0.5], j).unwrap();
        let lambda = 1e-6;
        let p = perturb_ties(&t, lambda, 3).unwrap();
        assert_ne!(p.marginal(0), p.marginal(1));
        for i in 0..3 {
            assert!((p.marginal(i) - t.marginal(i)).abs() <= lambda);
            for k in 0..3 {
                assert!((p.joint(i, k) - t.joint(i, k)).abs() <= lambda);
            }
        }
        assert!(perturb_ties(&t, 0.0, 1).is_err());
        assert!(perturb_ties(&t, 1.0, 1).is_err());
    }

    #[test]
    fn kl_examples() {
        let a = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap();
        let b = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(gaussian_kl(&a, &a).unwrap(), 0.0);
        assert!((gaussian_kl(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        let c = DiagGaussian::new(vec![0.3, -1.0], vec![2.0, 0.5]).unwrap();
        let d = DiagGaussian::new(vec![-0.2, 0.4], vec![0.7, 3.0]).unwrap();
        assert!((gaussian_kl(&c, &d).unwrap() - gaussian_kl(&d, &c).unwrap()).abs() > 1e-3);
        assert!(gaussian_kl(&a, &c).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn identical_gaussians_give_empty_graph() {
        let g = vec![DiagGaussian::new(vec![1.0, 2.0], vec![1.0, 3.0]).unwrap(); 4];
        for dir in [KlDirection::Forward, KlDirection::Reverse] {
            assert!(kl_graph(&g, 1.0, dir).unwrap().edges().is_empty());
        }
    }

    #[test]
    fn oe_energy_is_zero_for_ordered_points() {
        assert_eq!(oe_energy(&[0.5, 0.7], &[0.2, 0.7]), 0.0);
        assert!((oe_energy(&[0.1, 0.7], &[0.3, 0.7]) - 0.04).abs() < 1e-15);
    }
}
