//! Dataset construction: the 2-D toy ontology, hierarchy closures, marginal
//! and co-occurrence statistics, soft-edge pruning and negative sampling.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dag::{topological_order, CpdTable, Digraph};
use crate::error::{Error, Result};
use crate::model::Vocab;
use crate::train::TrainExample;

const TOY_FIXTURE: &str = include_str!("../data/toy_leaves_v1.tsv");

/// A concept hierarchy with edges pointing from child to parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    vocab: Vocab,
    parents: Vec<Vec<usize>>,
    leaves: Vec<usize>,
}

impl Hierarchy {
    /// Builds a hierarchy from `(child, parent)` name pairs. Leaves are the
    /// nodes without children. Fails with a witness if the edges have a cycle.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self> {
        let mut vocab = Vocab::default();
        let mut idx = Vec::with_capacity(edges.len());
        for (c, p) in edges {
            let c = vocab.get_or_insert(c.as_ref());
            let p = vocab.get_or_insert(p.as_ref());
            idx.push((c, p));
        }
        Self::from_index_edges(vocab, &idx)
    }

    pub fn from_index_edges(vocab: Vocab, edges: &[(usize, usize)]) -> Result<Self> {
        let n = vocab.len();
        let mut parents = vec![Vec::new(); n];
        let mut has_child = vec![false; n];
        for &(c, p) in edges {
            if c >= n || p >= n {
                return Err(Error::InvalidData(format!("edge ({c}, {p}) outside vocabulary of {n}")));
            }
            if c == p {
                return Err(Error::Cycle(vec![vocab.name(c).to_string(), vocab.name(c).to_string()]));
            }
            parents[c].push(p);
            has_child[p] = true;
        }
        for ps in &mut parents {
            ps.sort_unstable();
            ps.dedup();
        }
        let leaves = (0..n).filter(|&i| !has_child[i]).collect();
        let h = Hierarchy { vocab, parents, leaves };
        h.topo_order()?;
        Ok(h)
    }

    /// Replaces the designated leaf set.
    pub fn with_leaves(mut self, leaves: Vec<usize>) -> Result<Self> {
        if leaves.iter().any(|&l| l >= self.len()) {
            return Err(Error::InvalidData("leaf index outside vocabulary".into()));
        }
        self.leaves = leaves;
        Ok(self)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn parents(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents.iter().enumerate().flat_map(|(c, ps)| ps.iter().map(move |&p| (c, p))).collect()
    }

    /// Parents before children.
    fn topo_order(&self) -> Result<Vec<usize>> {
        let mut g = Digraph::new(self.len());
        for (c, p) in self.edges() {
            g.add_edge(p, c, 1.0)?;
        }
        topological_order(&g).map_err(|cycle| {
            let mut names: Vec<String> = cycle.iter().rev().map(|&i| self.vocab.name(i).to_string()).collect();
            names.push(names[0].clone());
            Error::Cycle(names)
        })
    }

    /// Sorted strict ancestor set of every node.
    pub fn ancestor_sets(&self) -> Vec<Vec<usize>> {
        let order = self.topo_order().expect("validated at construction");
        let mut anc: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for &v in &order {
            let mut acc = Vec::new();
            for &p in &self.parents[v] {
                acc.push(p);
                acc.extend_from_slice(&anc[p]);
            }
            acc.sort_unstable();
            acc.dedup();
            anc[v] = acc;
        }
        anc
    }
}

/// Every `(descendant, ancestor)` pair connected by a directed path, sorted.
pub fn transitive_closure(h: &Hierarchy) -> Vec<(usize, usize)> {
    let anc = h.ancestor_sets();
    anc.iter().enumerate().flat_map(|(c, a)| a.iter().map(move |&p| (c, p))).collect()
}

/// `P(n) = |descendants(n)| / |nodes|`, counting `n` itself when
/// `include_self` is set.
pub fn node_marginals(h: &Hierarchy, include_self: bool) -> Vec<f64> {
    let n = h.len();
    let mut count = vec![if include_self { 1usize } else { 0 }; n];
    for (_, p) in transitive_closure(h) {
        count[p] += 1;
    }
    count.into_iter().map(|c| c as f64 / n as f64).collect()
}

/// Pairwise co-occurrence statistics over leaves: each leaf contributes its
/// ancestor set (itself included) and all pairs within it. Unary marginals of
/// the returned table are the matching leaf frequencies, which keeps every
/// conditional in `[0, 1]`.
pub fn leaf_cooccurrence_cpd(h: &Hierarchy) -> Result<CpdTable> {
    if h.leaves().is_empty() {
        return Err(Error::InvalidData("hierarchy has no leaves".into()));
    }
    let anc = h.ancestor_sets();
    let mut marg = vec![0usize; h.len()];
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut set = Vec::new();
    for &leaf in h.leaves() {
        set.clear();
        set.push(leaf);
        set.extend_from_slice(&anc[leaf]);
        set.sort_unstable();
        set.dedup();
        for (k, &i) in set.iter().enumerate() {
            marg[i] += 1;
            for &j in &set[k + 1..] {
                *joint.entry((i, j)).or_insert(0) += 1;
            }
        }
    }
    if let Some(i) = marg.iter().position(|&c| c == 0) {
        return Err(Error::InvalidData(format!("`{}` is not above any leaf", h.vocab.name(i))));
    }
    let l = h.leaves().len() as f64;
    CpdTable::new(
        h.vocab.clone(),
        marg.into_iter().map(|c| c as f64 / l).collect(),
        joint.into_iter().map(|(k, c)| (k, c as f64 / l)).collect(),
    )
}

/// A conditional training target: `P(t1 | t2) = prob`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftEdge {
    pub t1: String,
    pub t2: String,
    pub prob: f64,
}

/// Keeps ordered pairs with `P(t1|t2) >= hi` and `P(t2|t1) <= lo`.
pub fn prune_cpd(table: &CpdTable, hi: f64, lo: f64) -> Result<Vec<SoftEdge>> {
    check_prune_bounds(hi, lo)?;
    let v = table.vocab();
    let mut out = Vec::new();
    let mut consider = |i: usize, j: usize| {
        for (a, b) in [(i, j), (j, i)] {
            let fwd = table.conditional(a, b);
            if fwd >= hi && table.conditional(b, a) <= lo {
                out.push(SoftEdge { t1: v.name(a).to_string(), t2: v.name(b).to_string(), prob: fwd });
            }
        }
    };
    if hi > 0.0 {
        // a zero joint gives P = 0 < hi
        for (i, j, _) in table.nonzero_joints() {
            consider(i, j);
        }
    } else {
        for i in 0..table.len() {
            for j in i + 1..table.len() {
                consider(i, j);
            }
        }
    }
    Ok(out)
}

/// Same rule applied to a list of conditionals. A missing reverse entry counts
/// as probability 0.
pub fn prune_soft_edges(edges: &[SoftEdge], hi: f64, lo: f64) -> Result<Vec<SoftEdge>> {
    check_prune_bounds(hi, lo)?;
    let mut lookup = HashMap::with_capacity(edges.len());
    for e in edges {
        if lookup.insert((e.t1.as_str(), e.t2.as_str()), e.prob).is_some() {
            return Err(Error::InvalidData(format!("duplicate conditional P({} | {})", e.t1, e.t2)));
        }
    }
    Ok(edges
        .iter()
        .filter(|e| {
            let back = lookup.get(&(e.t2.as_str(), e.t1.as_str())).copied().unwrap_or(0.0);
            e.t1 != e.t2 && e.prob >= hi && back <= lo
        })
        .cloned()
        .collect())
}

fn check_prune_bounds(hi: f64, lo: f64) -> Result<()> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidConfig(format!("pruning bounds lo={lo}, hi={hi} must satisfy 0 <= lo <= hi <= 1")));
    }
    Ok(())
}

/// `P(parent | child) = 1` example for a `(child, parent)` edge.
pub fn edge_example(child: usize, parent: usize) -> TrainExample {
    TrainExample::pair(parent, child, 1.0)
}

/// Corrupts each positive `(child, parent)` edge `k` times by replacing one
/// endpoint, chosen uniformly, with a uniformly random node. Candidates that
/// are self-pairs or members of `known` are redrawn.
pub fn corrupt_edges(
    positives: &[(usize, usize)],
    known: &HashSet<(usize, usize)>,
    vocab_size: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if vocab_size < 2 {
        return Err(Error::InvalidData("need at least two concepts to corrupt edges".into()));
    }
    const MAX_TRIES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(positives.len() * k);
    for &(u, v) in positives {
        for _ in 0..k {
            let mut found = None;
            for _ in 0..MAX_TRIES {
                let r = rng.gen_range(0..vocab_size);
                let cand = if rng.gen_bool(0.5) { (r, v) } else { (u, r) };
                if cand.0 != cand.1 && !known.contains(&cand) {
                    found = Some(cand);
                    break;
                }
            }
            match found {
                Some(c) => out.push(c),
                None => return Err(Error::InvalidData(format!("could not corrupt edge ({u}, {v})"))),
            }
        }
    }
    Ok(out)
}

/// Positive edge examples followed by `k` corrupted negatives per positive.
pub fn corrupt_negatives(
    positives: &[(usize, usize)],
    known: &HashSet<(usize, usize)>,
    vocab_size: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<TrainExample>> {
    let negs = corrupt_edges(positives, known, vocab_size, k, seed)?;
    let mut out: Vec<TrainExample> = positives.iter().map(|&(c, p)| edge_example(c, p)).collect();
    out.extend(negs.into_iter().map(|(c, p)| TrainExample::negative(p, c)));
    Ok(out)
}

/// Splits edges into train/dev/test by sampling `n_dev` and `n_test` edges
/// without replacement.
pub fn split_edges(
    edges: &[(usize, usize)],
    n_dev: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    if n_dev + n_test > edges.len() {
        return Err(Error::InvalidData(format!("cannot hold out {} of {} edges", n_dev + n_test, edges.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = rand::seq::index::sample(&mut rng, edges.len(), n_dev + n_test).into_vec();
    let mut held = vec![false; edges.len()];
    let dev: Vec<_> = idx[..n_dev].iter().map(|&i| edges[i]).collect();
    let test: Vec<_> = idx[n_dev..].iter().map(|&i| edges[i]).collect();
    for &i in &idx {
        held[i] = true;
    }
    let train = edges.iter().zip(&held).filter(|(_, &h)| !h).map(|(&e, _)| e).collect();
    Ok((train, dev, test))
}

/// Random WordNet-shaped hierarchy: node `i > 0` hangs under a uniformly chosen
/// earlier node, and with probability `extra_parent` also under a second one.
pub fn random_hierarchy(n: usize, extra_parent: f64, seed: u64) -> Result<Hierarchy> {
    if n < 2 {
        return Err(Error::InvalidData("need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocab::new((0..n).map(|i| format!("n{i:05}")))?;
    let mut edges = Vec::with_capacity(n + n / 10);
    for i in 1..n {
        let p = rng.gen_range(0..i);
        edges.push((i, p));
        if i > 1 && rng.gen_bool(extra_parent) {
            let q = rng.gen_range(0..i);
            if q != p {
                edges.push((i, q));
            }
        }
    }
    Hierarchy::from_index_edges(vocab, &edges)
}

/// Atomic weighted examples, each a set of concepts that hold together.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySpec {
    vocab: Vocab,
    leaves: Vec<(f64, Vec<usize>)>,
}

impl ToySpec {
    pub fn new(vocab: Vocab, leaves: Vec<(f64, Vec<usize>)>) -> Result<Self> {
        let mut seen = vec![false; vocab.len()];
        let mut total = 0.0;
        for (w, set) in &leaves {
            if !(*w > 0.0) {
                return Err(Error::InvalidData(format!("leaf weight {w} must be positive")));
            }
            total += w;
            for &c in set {
                if c >= vocab.len() {
                    return Err(Error::InvalidData("leaf refers to unknown concept".into()));
                }
                seen[c] = true;
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidData(format!("leaf weights sum to {total}, not 1")));
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidData(format!("concept `{}` appears in no leaf", vocab.name(i))));
        }
        Ok(ToySpec { vocab, leaves })
    }

    /// Parses the fixture format: a `concepts` line with comma-separated names,
    /// then `weight<TAB>concept,concept,...` per leaf. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vocab: Option<Vocab> = None;
        let mut leaves = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { path: "<toy spec>".into(), line: ln + 1, msg };
            let (head, rest) = line.split_once('\t').ok_or_else(|| perr("expected a tab".into()))?;
            let names = rest.split(',').map(str::trim).filter(|s| !s.is_empty());
            if head == "concepts" {
                vocab = Some(Vocab::new(names)?);
                continue;
            }
            let v = vocab.as_ref().ok_or_else(|| perr("leaf before the concepts line".into()))?;
            let w: f64 = head.parse().map_err(|_| perr(format!("bad weight `{head}`")))?;
            let set = names.map(|n| v.id(n)).collect::<Result<Vec<_>>>()?;
            leaves.push((w, set));
        }
        let vocab = vocab.ok_or_else(|| Error::InvalidData("toy spec has no concepts line".into()))?;
        ToySpec::new(vocab, leaves)
    }

    /// The shipped 19-concept ontology.
    pub fn default_spec() -> Self {
        ToySpec::parse(TOY_FIXTURE).expect("bundled fixture is valid")
    }

    pub fn fixture_text() -> &'static str {
        TOY_FIXTURE
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn leaves(&self) -> &[(f64, Vec<usize>)] {
        &self.leaves
    }
}

/// Exact marginals and pairwise joints aggregated from the leaf table.
pub fn toy_dataset(spec: &ToySpec) -> Result<CpdTable> {
    let n = spec.vocab.len();
    let mut marg = vec![0.0; n];
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (w, set) in &spec.leaves {
        let mut s = set.clone();
        s.sort_unstable();
        s.dedup();
        for (k, &i) in s.iter().enumerate() {
            marg[i] += w;
            for &j in &s[k + 1..] {
                *joint.entry((i, j)).or_insert(0.0) += w;
            }
        }
    }
    CpdTable::new(spec.vocab.clone(), marg, joint)
}

/// One unary example per concept and one pair example per ordered pair.
pub fn cpd_examples(table: &CpdTable) -> Vec<TrainExample> {
    let n = table.len();
    let mut out: Vec<TrainExample> = (0..n).map(|i| TrainExample::unary(i, table.marginal(i))).collect();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                out.push(TrainExample::pair(a, b, table.conditional(a, b)));
            }
        }
    }
    out
}
