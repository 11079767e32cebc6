use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use boxlat::dag::{self, CpdTable, KlDirection};
use boxlat::data::{self, Hierarchy, SoftEdge, ToySpec};
use boxlat::eval::{self, LabeledPair};
use boxlat::io;
use boxlat::train::Init;
use boxlat::{Error, MeasureKind, Model, Query, TrainConfig, TrainExample, Trainer, Vocab};

use crate::*;

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => evaluate(a),
        Command::Asymmetrize(a) => asymmetrize(a),
        Command::Closure(a) => closure(a),
        Command::Marginals(a) => marginals(a),
        Command::Cpd(a) => cpd(a),
        Command::PruneCpd(a) => prune(a),
        Command::Negatives(a) => negatives(a),
        Command::Toy(a) => toy(a),
        Command::Plot(a) => plot(a),
    }
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())).into())
}

pub fn load_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = read_to_string(path)?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
        Error::Parse { path: path.display().to_string(), line, msg: e.message().to_string() }.into()
    })
}

fn apply_flags(cfg: &mut TrainConfig, a: &TrainArgs) {
    if a.poe {
        cfg.poe_mode = true;
    }
    if a.double_dim {
        cfg.poe_double_dim = true;
    }
    if let Some(v) = a.dim {
        cfg.dim = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.measure {
        cfg.measure = match v {
            MeasureArg::Uniform => MeasureKind::Uniform,
            MeasureArg::Exponential => MeasureKind::Exponential,
        };
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
}

fn toy_spec(builtin: bool, path: Option<&Path>) -> CliResult<Option<ToySpec>> {
    match path {
        Some(p) => Ok(Some(ToySpec::parse(&read_to_string(p)?).map_err(|e| relabel(e, p))?)),
        None if builtin => Ok(Some(ToySpec::default_spec())),
        None => Ok(None),
    }
}

/// Attaches the file name to errors raised by parsers that do not know it.
fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { path: p, line, msg } if p == "<toy spec>" => {
            Error::Parse { path: path.display().to_string(), line, msg }
        }
        Error::Parse { .. } => e,
        other => Error::InvalidData(format!("{}: {other}", path.display())),
    }
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    apply_flags(&mut cfg, &a);
    cfg.validate()?;

    let mut vocab = Vocab::default();
    let mut examples: Vec<TrainExample> = Vec::new();
    if let Some(spec) = toy_spec(a.toy, a.toy_spec.as_deref())? {
        let table = data::toy_dataset(&spec)?;
        vocab = table.vocab().clone();
        examples.extend(data::cpd_examples(&table));
    }
    if let Some(p) = &a.marginals {
        for (name, prob) in io::read_marginals(p)? {
            examples.push(TrainExample::unary(vocab.get_or_insert(&name), prob));
        }
    }
    if let Some(p) = &a.pairs {
        for e in io::read_soft_edges(p)? {
            let t1 = vocab.get_or_insert(&e.t1);
            let t2 = vocab.get_or_insert(&e.t2);
            examples.push(TrainExample::pair(t1, t2, e.prob));
        }
    }
    if let Some(p) = &a.edges {
        for (c, par) in io::read_edges(p)? {
            examples.push(data::edge_example(vocab.get_or_insert(&c), vocab.get_or_insert(&par)));
        }
    }
    if let Some(p) = &a.negatives {
        for (c, par) in io::read_edges(p)? {
            examples.push(TrainExample::negative(vocab.get_or_insert(&par), vocab.get_or_insert(&c)));
        }
    }
    if examples.is_empty() {
        return Err(CliError::Usage(
            "no training data: pass --toy, --toy-spec, --marginals, --pairs, --edges or --negatives".into(),
        ));
    }
    let dev = match &a.dev {
        Some(p) => Some(io::read_labeled_pairs(p, &vocab)?),
        None => None,
    };
    log::info!("{} concepts, {} examples", vocab.len(), examples.len());

    let mut trainer = Trainer::new(&vocab, &cfg, Init::Random)?;
    let stdout = std::io::stdout();
    for epoch in 0..cfg.epochs {
        let loss = trainer.run_epoch(&examples)?;
        let metric = match &dev {
            Some(d) => dev_metric(trainer.model(), d)?.to_string(),
            None => "nan".to_string(),
        };
        let mut out = stdout.lock();
        writeln!(out, "{epoch}\t{loss}\t{metric}").map_err(Error::from)?;
        out.flush().map_err(Error::from)?;
    }
    io::save_model(trainer.model(), &a.out)?;
    Ok(())
}

fn is_binary(pairs: &[LabeledPair]) -> bool {
    pairs.iter().all(|p| p.label == 0.0 || p.label == 1.0)
}

/// Accuracy at the best threshold for binary labels, Pearson correlation for
/// soft ones.
fn dev_metric(model: &Model, dev: &[LabeledPair]) -> CliResult<f64> {
    let scores = eval::pair_scores(model, dev)?;
    if is_binary(dev) {
        let labels: Vec<bool> = dev.iter().map(LabeledPair::is_positive).collect();
        Ok(eval::best_threshold(&scores, &labels)?.1)
    } else {
        let pred: Vec<f64> = scores.iter().map(|s| s.unwrap_or(0.0)).collect();
        let gold: Vec<f64> = dev.iter().map(|p| p.label).collect();
        Ok(eval::pearson(&pred, &gold).unwrap_or(f64::NAN))
    }
}

/// Decimal with `sig` significant digits.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn query(a: QueryArgs) -> CliResult<()> {
    let model = io::load_model(&a.model)?;
    let given = Query::parse(&a.given)?;
    let mut out = String::new();
    for t in &a.target {
        let target = Query::parse(t)?;
        if target.is_empty() {
            return Err(CliError::Usage("empty --target".into()));
        }
        let p = boxlat::conditional_query(&model, &target, &given)?;
        writeln!(out, "{}", fmt_sig(p, 6)).unwrap();
    }
    emit(None, &out)
}

fn evaluate(a: EvalArgs) -> CliResult<()> {
    let model = io::load_model(&a.model)?;
    let pairs = io::read_labeled_pairs(&a.pairs, model.vocab())?;
    if pairs.is_empty() {
        return Err(Error::InvalidData(format!("{}: no pairs", a.pairs.display())).into());
    }
    let scores = eval::pair_scores(&model, &pairs)?;
    let mut metrics: Vec<(&str, f64)> = vec![("pairs", pairs.len() as f64)];
    if is_binary(&pairs) {
        let labels: Vec<bool> = pairs.iter().map(LabeledPair::is_positive).collect();
        let t = match (a.threshold, &a.dev) {
            (Some(t), _) => t,
            (None, Some(dev)) => {
                let dev = io::read_labeled_pairs(dev, model.vocab())?;
                let ds = eval::pair_scores(&model, &dev)?;
                let dl: Vec<bool> = dev.iter().map(LabeledPair::is_positive).collect();
                let (t, acc) = eval::best_threshold(&ds, &dl)?;
                metrics.push(("dev_accuracy", acc));
                t
            }
            (None, None) => {
                log::warn!("no --dev or --threshold: tuning the threshold on the evaluation pairs");
                eval::best_threshold(&scores, &labels)?.0
            }
        };
        metrics.push(("threshold", t));
        metrics.push(("accuracy", eval::accuracy_at(&scores, &labels, t)?));
    } else {
        let missing = scores.iter().filter(|s| s.is_none()).count();
        if missing > 0 {
            log::warn!("{missing} pairs condition on an empty box and score 0");
        }
        let pred: Vec<f64> = scores.iter().map(|s| s.unwrap_or(0.0)).collect();
        let gold: Vec<f64> = pairs.iter().map(|p| p.label).collect();
        let m = eval::prob_metrics(&pred, &gold)?;
        metrics.push(("kl", m.kl));
        metrics.push(("pearson", m.pearson));
    }
    let text = io::metrics_to_string(&metrics);
    emit(None, &text)?;
    if let Some(p) = &a.metrics {
        io::write_text(p, &text)?;
    }
    if let Some(p) = &a.calibration {
        let pred: Vec<f64> = scores.iter().map(|s| s.unwrap_or(0.0)).collect();
        let gold: Vec<f64> = pairs.iter().map(|p| p.label).collect();
        let mut s = String::from("lo\thi\tcount\tmean_gold\tmean_predicted\tpearson\n");
        for b in eval::calibration_bins(&pred, &gold, a.bins)? {
            let r = b.pearson.map(|r| r.to_string()).unwrap_or_else(|| "nan".into());
            writeln!(s, "{}\t{}\t{}\t{}\t{}\t{r}", b.lo, b.hi, b.count, b.mean_gold, b.mean_predicted).unwrap();
        }
        io::write_text(p, &s)?;
    }
    Ok(())
}

fn asymmetrize(a: AsymArgs) -> CliResult<()> {
    let (ids, scores) = match (&a.scores, a.kl_example) {
        (Some(p), _) => io::read_score_matrix(p)?,
        (None, Some(dir)) => {
            let dir = match dir {
                KlArg::Forward => KlDirection::Forward,
                KlArg::Reverse => KlDirection::Reverse,
            };
            let g = dag::kl_counterexample();
            let ids = (1..=g.len()).map(|i| i.to_string()).collect();
            (ids, dag::kl_matrix(&g, dir)?)
        }
        (None, None) => return Err(CliError::Usage("pass --scores or --kl-example".into())),
    };
    let g = match a.threshold {
        Some(c) => dag::threshold_asymmetrize(&scores, c)?,
        None => dag::asymmetrize(&scores),
    };
    emit(a.out.as_deref(), &io::digraph_to_string(&ids, &g))?;
    if a.check_acyclic {
        if let Some(cycle) = dag::find_cycle(&g) {
            let mut names: Vec<String> = cycle.iter().map(|&v| ids[v].clone()).collect();
            names.push(names[0].clone());
            return Err(Error::Cycle(names).into());
        }
    }
    Ok(())
}

fn hierarchy(path: &Path) -> CliResult<Hierarchy> {
    Ok(Hierarchy::from_edges(&io::read_edges(path)?)?)
}

fn closure(a: ClosureArgs) -> CliResult<()> {
    let h = hierarchy(&a.edges)?;
    let v = h.vocab();
    let pairs: Vec<(&str, &str)> = data::transitive_closure(&h).into_iter().map(|(d, an)| (v.name(d), v.name(an))).collect();
    emit(a.out.as_deref(), &io::edges_to_string(&pairs)?)
}

fn marginals(a: MarginalsArgs) -> CliResult<()> {
    let h = hierarchy(&a.edges)?;
    let m = data::node_marginals(&h, !a.exclude_self);
    emit(a.out.as_deref(), &io::marginals_to_string(h.vocab(), &m)?)
}

fn cpd_table(edges: Option<&Path>, toy: bool, toy_path: Option<&Path>) -> CliResult<CpdTable> {
    if let Some(p) = edges {
        return Ok(data::leaf_cooccurrence_cpd(&hierarchy(p)?)?);
    }
    match toy_spec(toy, toy_path)? {
        Some(spec) => Ok(data::toy_dataset(&spec)?),
        None => Err(CliError::Usage("pass --edges, --toy or --toy-spec".into())),
    }
}

/// Both orientations of every pair with nonzero joint mass.
fn cpd_pairs(table: &CpdTable) -> Vec<SoftEdge> {
    let v = table.vocab();
    let mut out = Vec::new();
    for (i, j, _) in table.nonzero_joints() {
        for (x, y) in [(i, j), (j, i)] {
            out.push(SoftEdge { t1: v.name(x).to_string(), t2: v.name(y).to_string(), prob: table.conditional(x, y) });
        }
    }
    out
}

fn cpd(a: CpdArgs) -> CliResult<()> {
    let s = &a.source;
    let table = cpd_table(s.edges.as_deref(), s.toy, s.toy_spec.as_deref())?;
    let text = match a.format {
        CpdFormat::Matrix => io::score_matrix_to_string(table.vocab().names(), &table.conditional_matrix())?,
        CpdFormat::Pairs => io::soft_edges_to_string(&cpd_pairs(&table))?,
    };
    emit(a.out.as_deref(), &text)
}

fn prune(a: PruneArgs) -> CliResult<()> {
    let kept = match &a.pairs {
        Some(p) => data::prune_soft_edges(&io::read_soft_edges(p)?, a.hi, a.lo)?,
        None => {
            let table = cpd_table(a.edges.as_deref(), a.toy, a.toy_spec.as_deref())?;
            data::prune_cpd(&table, a.hi, a.lo)?
        }
    };
    emit(a.out.as_deref(), &io::soft_edges_to_string(&kept)?)
}

fn negatives(a: NegativesArgs) -> CliResult<()> {
    let raw = io::read_edges(&a.edges)?;
    let h = Hierarchy::from_edges(&raw)?;
    let v = h.vocab();
    let known: HashSet<(usize, usize)> = data::transitive_closure(&h).into_iter().collect();
    let pos: Vec<(usize, usize)> = raw.iter().map(|(c, p)| (v.get(c).unwrap(), v.get(p).unwrap())).collect();
    let negs = data::corrupt_edges(&pos, &known, v.len(), a.k, a.seed)?;
    let named: Vec<(&str, &str)> = negs.iter().map(|&(c, p)| (v.name(c), v.name(p))).collect();
    emit(a.out.as_deref(), &io::edges_to_string(&named)?)
}

fn toy(a: ToyArgs) -> CliResult<()> {
    let spec = toy_spec(true, a.spec.as_deref())?.expect("built-in spec");
    let table = data::toy_dataset(&spec)?;
    let v = table.vocab();
    io::write_text(&a.marginals, &io::marginals_to_string(v, table.marginals())?)?;
    let mut pairs = Vec::new();
    for i in 0..table.len() {
        for j in 0..table.len() {
            if i != j {
                pairs.push(SoftEdge { t1: v.name(i).to_string(), t2: v.name(j).to_string(), prob: table.conditional(i, j) });
            }
        }
    }
    io::write_text(&a.pairs, &io::soft_edges_to_string(&pairs)?)?;
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult<()> {
    let model = io::load_model(&a.model)?;
    emit(a.out.as_deref(), &boxlat::plot::render_svg(&model)?)
}
