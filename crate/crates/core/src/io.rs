//! Text file formats. Every reader reports the path and 1-based line of the
//! first malformed record. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dag::{Digraph, SquareMatrix};
use crate::data::SoftEdge;
use crate::error::{Error, Result};
use crate::eval::LabeledPair;
use crate::measure::{MeasureKind, ProductMeasure};
use crate::model::{Model, Vocab};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_MAGIC: &str = "boxlat-model";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Data lines of a TSV document as `(line number, fields)`.
fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        if l.trim().is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split('\t').collect()))
        }
    })
}

struct Ctx<'a>(&'a str);

impl Ctx<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.0.to_string(), line, msg: msg.into() }
    }

    fn fields<'f>(&self, line: usize, f: &[&'f str], n: usize) -> Result<()> {
        if f.len() == n {
            Ok(())
        } else {
            Err(self.err(line, format!("expected {n} tab-separated fields, found {}", f.len())))
        }
    }

    fn num(&self, line: usize, s: &str) -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| self.err(line, format!("`{s}` is not a number")))?;
        if v.is_nan() {
            return Err(self.err(line, "NaN is not allowed"));
        }
        Ok(v)
    }

    fn prob(&self, line: usize, s: &str) -> Result<f64> {
        let v = self.num(line, s)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.err(line, format!("probability {v} outside [0, 1]")));
        }
        Ok(v)
    }

    fn name<'f>(&self, line: usize, s: &'f str) -> Result<&'f str> {
        let s = s.trim();
        if s.is_empty() {
            Err(self.err(line, "empty concept id"))
        } else {
            Ok(s)
        }
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['\t', '\n', '\r']) || name.starts_with('#') {
        return Err(Error::InvalidData(format!("concept id {name:?} cannot be written to TSV")));
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a model. Values carry 17 significant digits, so loading the
/// result reproduces every parameter bit for bit.
pub fn model_to_string(model: &Model) -> Result<String> {
    let m = model.measure();
    let mut s = String::new();
    writeln!(s, "{MODEL_MAGIC}\t{MODEL_FORMAT_VERSION}").unwrap();
    writeln!(s, "dim\t{}", m.dim()).unwrap();
    writeln!(s, "measure\t{}", m.kind()).unwrap();
    writeln!(s, "exp_cap\t{}", fmt_f64(m.exp_cap())).unwrap();
    writeln!(s, "poe\t{}", model.is_poe()).unwrap();
    writeln!(s, "size\t{}", model.len()).unwrap();
    for id in 0..model.len() {
        let name = model.vocab().name(id);
        check_name(name)?;
        s.push_str(name);
        for &v in model.min_row(id).iter().chain(model.delta_row(id)) {
            s.push('\t');
            s.push_str(&fmt_f64(v));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn parse_model(text: &str, origin: &str) -> Result<Model> {
    let c = Ctx(origin);
    let mut recs = records(text);
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (ln, f) = recs.next().ok_or_else(|| c.err(0, format!("missing `{key}` header")))?;
        c.fields(ln, &f, 2)?;
        if f[0] != key {
            return Err(c.err(ln, format!("expected `{key}`, found `{}`", f[0])));
        }
        Ok((ln, f[1].to_string()))
    };
    let (ln, version) = header(MODEL_MAGIC)?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(c.err(ln, format!("unsupported format version {version}")));
    }
    let (ln, dim) = header("dim")?;
    let dim: usize = dim.parse().ok().filter(|&d| d > 0).ok_or_else(|| c.err(ln, "bad dimension"))?;
    let (ln, kind) = header("measure")?;
    let kind: MeasureKind = kind.parse().map_err(|_| c.err(ln, format!("unknown measure `{kind}`")))?;
    let (cap_ln, cap) = header("exp_cap")?;
    let cap = c.num(cap_ln, &cap)?;
    let (ln, poe) = header("poe")?;
    let poe: bool = poe.parse().map_err(|_| c.err(ln, "poe must be true or false"))?;
    let (ln, size) = header("size")?;
    let size: usize = size.parse().map_err(|_| c.err(ln, "bad size"))?;

    if !(cap > 0.0 && cap.is_finite()) {
        return Err(c.err(cap_ln, "exponential cap must be positive"));
    }
    let measure = ProductMeasure::new(kind, dim).with_exp_cap(cap);
    let mut vocab = Vocab::default();
    let mut min = Vec::with_capacity(size * dim);
    let mut delta = Vec::with_capacity(size * dim);
    let mut last = ln;
    for (ln, f) in recs {
        last = ln;
        c.fields(ln, &f, 1 + 2 * dim)?;
        let name = c.name(ln, f[0])?;
        if vocab.get(name).is_some() {
            return Err(c.err(ln, format!("duplicate concept `{name}`")));
        }
        vocab.get_or_insert(name);
        for v in &f[1..=dim] {
            min.push(c.num(ln, v)?);
        }
        for v in &f[dim + 1..] {
            delta.push(c.num(ln, v)?);
        }
    }
    if vocab.len() != size {
        return Err(c.err(last, format!("header declares {size} concepts, found {}", vocab.len())));
    }
    Model::from_params(vocab, measure, poe, min, delta)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    write_text(path, &model_to_string(model)?)
}

pub fn load_model(path: &Path) -> Result<Model> {
    parse_model(&read(path)?, &path.display().to_string())
}

/// `child<TAB>parent` lines.
pub fn parse_edges(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let c = Ctx(origin);
    records(text)
        .map(|(ln, f)| {
            c.fields(ln, &f, 2)?;
            Ok((c.name(ln, f[0])?.to_string(), c.name(ln, f[1])?.to_string()))
        })
        .collect()
}

pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>> {
    parse_edges(&read(path)?, &path.display().to_string())
}

pub fn edges_to_string<S: AsRef<str>>(edges: &[(S, S)]) -> Result<String> {
    let mut s = String::new();
    for (a, b) in edges {
        check_name(a.as_ref())?;
        check_name(b.as_ref())?;
        writeln!(s, "{}\t{}", a.as_ref(), b.as_ref()).unwrap();
    }
    Ok(s)
}

/// `concept<TAB>probability` lines.
pub fn parse_marginals(text: &str, origin: &str) -> Result<Vec<(String, f64)>> {
    let c = Ctx(origin);
    records(text)
        .map(|(ln, f)| {
            c.fields(ln, &f, 2)?;
            Ok((c.name(ln, f[0])?.to_string(), c.prob(ln, f[1])?))
        })
        .collect()
}

pub fn read_marginals(path: &Path) -> Result<Vec<(String, f64)>> {
    parse_marginals(&read(path)?, &path.display().to_string())
}

pub fn marginals_to_string(vocab: &Vocab, probs: &[f64]) -> Result<String> {
    let mut s = String::new();
    for (i, p) in probs.iter().enumerate() {
        check_name(vocab.name(i))?;
        writeln!(s, "{}\t{}", vocab.name(i), fmt_f64(*p)).unwrap();
    }
    Ok(s)
}

/// `t1<TAB>t2<TAB>P(t1|t2)` lines.
pub fn parse_soft_edges(text: &str, origin: &str) -> Result<Vec<SoftEdge>> {
    let c = Ctx(origin);
    records(text)
        .map(|(ln, f)| {
            c.fields(ln, &f, 3)?;
            Ok(SoftEdge {
                t1: c.name(ln, f[0])?.to_string(),
                t2: c.name(ln, f[1])?.to_string(),
                prob: c.prob(ln, f[2])?,
            })
        })
        .collect()
}

pub fn read_soft_edges(path: &Path) -> Result<Vec<SoftEdge>> {
    parse_soft_edges(&read(path)?, &path.display().to_string())
}

pub fn soft_edges_to_string(edges: &[SoftEdge]) -> Result<String> {
    let mut s = String::new();
    for e in edges {
        check_name(&e.t1)?;
        check_name(&e.t2)?;
        writeln!(s, "{}\t{}\t{}", e.t1, e.t2, fmt_f64(e.prob)).unwrap();
    }
    Ok(s)
}

/// `a<TAB>b<TAB>label` lines, resolved against `vocab`. The label is a gold
/// probability, or 1/0 for positive/negative pairs.
pub fn parse_labeled_pairs(text: &str, origin: &str, vocab: &Vocab) -> Result<Vec<LabeledPair>> {
    let c = Ctx(origin);
    records(text)
        .map(|(ln, f)| {
            c.fields(ln, &f, 3)?;
            let id = |s: &str| -> Result<usize> {
                let n = c.name(ln, s)?;
                vocab.get(n).ok_or_else(|| c.err(ln, format!("unknown concept `{n}`")))
            };
            Ok(LabeledPair::new(id(f[0])?, id(f[1])?, c.prob(ln, f[2])?))
        })
        .collect()
}

pub fn read_labeled_pairs(path: &Path, vocab: &Vocab) -> Result<Vec<LabeledPair>> {
    parse_labeled_pairs(&read(path)?, &path.display().to_string(), vocab)
}

/// A square score matrix. The optional header row lists the ids (an empty or
/// `id` leading cell is allowed); each row may start with its id. Without a
/// header the ids are `1..=n`.
pub fn parse_score_matrix(text: &str, origin: &str) -> Result<(Vec<String>, SquareMatrix)> {
    let c = Ctx(origin);
    let recs: Vec<(usize, Vec<&str>)> = records(text).collect();
    let Some((first_ln, first)) = recs.first() else {
        return Ok((Vec::new(), SquareMatrix::zeros(0)));
    };
    let numeric = |f: &[&str]| f.iter().all(|x| x.trim().parse::<f64>().is_ok());
    let (ids, body): (Option<Vec<String>>, &[(usize, Vec<&str>)]) = if numeric(first) {
        (None, &recs[..])
    } else {
        let mut names: Vec<&str> = first.clone();
        if names.len() == recs.len() && matches!(names[0].trim(), "" | "id") {
            names.remove(0);
        }
        if names.len() != recs.len() - 1 {
            return Err(c.err(*first_ln, format!("header has {} ids for {} rows", names.len(), recs.len() - 1)));
        }
        let names = names.iter().map(|s| c.name(*first_ln, s).map(str::to_string)).collect::<Result<_>>()?;
        (Some(names), &recs[1..])
    };
    let n = body.len();
    let mut rows = Vec::with_capacity(n);
    let mut row_ids = Vec::with_capacity(n);
    for (i, (ln, f)) in body.iter().enumerate() {
        let vals = if f.len() == n + 1 {
            row_ids.push(c.name(*ln, f[0])?.to_string());
            &f[1..]
        } else if f.len() == n {
            &f[..]
        } else {
            return Err(Error::NotSquare { rows: n, row: i, cols: f.len() });
        };
        rows.push(vals.iter().map(|v| c.num(*ln, v)).collect::<Result<Vec<_>>>()?);
    }
    let ids = match ids {
        Some(h) => {
            if !row_ids.is_empty() && row_ids != h {
                return Err(c.err(body[0].0, "row ids do not match the header"));
            }
            h
        }
        None if row_ids.len() == n => row_ids,
        None => (1..=n).map(|i| i.to_string()).collect(),
    };
    Ok((ids, SquareMatrix::from_rows(rows)?))
}

pub fn read_score_matrix(path: &Path) -> Result<(Vec<String>, SquareMatrix)> {
    parse_score_matrix(&read(path)?, &path.display().to_string())
}

pub fn score_matrix_to_string(ids: &[String], m: &SquareMatrix) -> Result<String> {
    if ids.len() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), actual: ids.len() });
    }
    let mut s = String::from("id");
    for id in ids {
        check_name(id)?;
        s.push('\t');
        s.push_str(id);
    }
    s.push('\n');
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for v in m.row(i) {
            s.push('\t');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    Ok(s)
}

/// `src<TAB>dst<TAB>weight` lines using the given vertex ids.
pub fn digraph_to_string(ids: &[String], g: &Digraph) -> String {
    let mut s = String::new();
    for e in g.edges() {
        writeln!(s, "{}\t{}\t{}", ids[e.src], ids[e.dst], fmt_f64(e.weight)).unwrap();
    }
    s
}

/// `metric<TAB>value` lines.
pub fn metrics_to_string(metrics: &[(&str, f64)]) -> String {
    let mut s = String::new();
    for (k, v) in metrics {
        writeln!(s, "{k}\t{v}").unwrap();
    }
    s
}
