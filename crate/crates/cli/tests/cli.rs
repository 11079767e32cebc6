use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boxlat::io::{load_model, read_edges, read_marginals, read_soft_edges};
use tempfile::TempDir;

fn boxlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxlat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = boxlat(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TOY_TRAIN: [&str; 10] = ["--dim", "2", "--epochs", "10000", "--lr", "0.01", "--batch-size", "1000", "--seed", "7"];

fn train_toy(dir: &TempDir, name: &str, extra: &[&str]) -> (PathBuf, String) {
    let out = dir.path().join(name);
    let mut args = vec!["train", "--toy", "--out", p(&out)];
    for kv in TOY_TRAIN.chunks(2) {
        if !extra.contains(&kv[0]) {
            args.extend(kv);
        }
    }
    args.extend(extra);
    let log = ok(&args);
    (out, log)
}

fn query(model: &Path, target: &str, given: &str) -> f64 {
    ok(&["query", p(model), "--target", target, "--given", given]).trim().parse().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(boxlat(&["--help"]).status.code(), Some(0));
    assert_eq!(boxlat(&["--version"]).status.code(), Some(0));
    assert_eq!(boxlat(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(boxlat(&["query"]).status.code(), Some(1));
    assert_eq!(boxlat(&["train", "--out", "/dev/null", "--threads", "0"]).status.code(), Some(1));
    let o = boxlat(&["train", "--out", "/dev/null", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no training data"));
}

#[test]
fn toy_training_and_queries() {
    let dir = TempDir::new().unwrap();
    let (model, log) = train_toy(&dir, "toy.model", &[]);
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 10_000);
    let loss = |l: &str| l.split('\t').nth(1).unwrap().parse::<f64>().unwrap();
    assert!(lines.iter().all(|l| l.split('\t').count() == 3));
    assert!(loss(lines[9999]) < 0.5 * loss(lines[0]));

    let plant = query(&model, "plant", "");
    assert!(query(&model, "plant", "cactus") > plant);
    assert!(query(&model, "plant", "snake") < 0.01);
    let m = load_model(&model).unwrap();
    let id = m.vocab().id("plant").unwrap();
    assert_eq!(format!("{:.5}", m.marginal(id)), format!("{plant:.5}"));

    let out = ok(&["query", p(&model), "--target", "grizzly_bear", "--target", "grizzly_bear,!white", "--given", "omnivore"]);
    let vals: Vec<&str> = out.lines().collect();
    assert_eq!(vals.len(), 2);
    for v in vals {
        let digits: String = v.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').collect();
        assert_eq!(digits.len(), 6, "{v}");
    }

    let (again, log2) = train_toy(&dir, "toy2.model", &[]);
    assert_eq!(log, log2);
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn query_errors() {
    let dir = TempDir::new().unwrap();
    let (model, _) = train_toy(&dir, "m", &["--epochs", "5"]);
    let o = boxlat(&["query", p(&model), "--target", "unicorn"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unicorn"));
    let o = boxlat(&["query", p(&model), "--target", "plant", "--given", "!"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn poe_training_pins_boxes_and_plots_against_the_corner() {
    let dir = TempDir::new().unwrap();
    let (model, _) = train_toy(&dir, "poe.model", &["--poe", "--epochs", "500"]);
    let m = load_model(&model).unwrap();
    assert!(m.is_poe());
    for id in 0..m.len() {
        let b = m.box_at(id);
        assert!((0..2).all(|d| b.max_at(d) == 1.0), "{}", m.vocab().name(id));
    }
    let svg = ok(&["plot", p(&model)]);
    let mut rects = 0;
    for g in svg.lines().filter(|l| l.starts_with("<g>")) {
        let attr = |k: &str| -> f64 {
            let s = g.split(&format!(" {k}=\"")).nth(1).unwrap();
            s[..s.find('"').unwrap()].parse().unwrap()
        };
        assert!((attr("x") + attr("width") - 500.0).abs() < 1e-2);
        assert!((attr("y") - 20.0).abs() < 1e-2);
        rects += 1;
    }
    assert_eq!(rects, 19);
    assert_eq!(svg, ok(&["plot", p(&model)]));
    let file = dir.path().join("poe.svg");
    ok(&["plot", p(&model), "--out", p(&file)]);
    assert_eq!(fs::read_to_string(&file).unwrap(), svg);
}

#[test]
fn plot_needs_two_dimensions() {
    let dir = TempDir::new().unwrap();
    let (model, _) = train_toy(&dir, "m3", &["--dim", "3", "--epochs", "2"]);
    assert_eq!(boxlat(&["plot", p(&model)]).status.code(), Some(2));
}

#[test]
fn data_errors_name_the_file() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = dir.path().join("m");
    let o = boxlat(&["train", "--edges", p(&missing), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.tsv"));

    let bad = write(&dir, "bad.tsv", "a\tb\t0.5\n# comment\nc\td\tlots\n");
    let o = boxlat(&["train", "--pairs", p(&bad), "--out", p(&out), "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.tsv:3"), "{}", stderr(&o));
    assert!(!out.exists());

    let cfg = write(&dir, "c.toml", "dim = 2\nlearning_rate = -1.0\n");
    let o = boxlat(&["train", "--toy", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "dim = 3\nepochs = 4\nbatch_size = 50\nmeasure = \"exponential\"\n");
    let out = dir.path().join("m");
    let log = ok(&["train", "--toy", "--config", p(&cfg), "--epochs", "2", "--out", p(&out)]);
    assert_eq!(log.lines().count(), 2);
    let m = load_model(&out).unwrap();
    assert_eq!(m.dim(), 3);
    assert_eq!(m.measure().kind(), boxlat::MeasureKind::Exponential);
}

#[test]
fn training_from_files_matches_the_builtin_toy_data() {
    let dir = TempDir::new().unwrap();
    let marg = dir.path().join("m.tsv");
    let pairs = dir.path().join("p.tsv");
    ok(&["toy", "--marginals", p(&marg), "--pairs", p(&pairs)]);
    let m = read_marginals(&marg).unwrap();
    assert_eq!(m.len(), 19);
    assert_eq!(read_soft_edges(&pairs).unwrap().len(), 19 * 18);
    let out = dir.path().join("files.model");
    let log = ok(&["train", "--marginals", p(&marg), "--pairs", p(&pairs), "--out", p(&out), "--dim", "2", "--epochs", "20"]);
    assert_eq!(log.lines().count(), 20);
    assert_eq!(load_model(&out).unwrap().len(), 19);
}

#[test]
fn hierarchy_pipeline() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "e.tsv", "dog\tmammal\ncat\tmammal\nmammal\tanimal\ntrout\tfish\nfish\tanimal\n");

    let closure = ok(&["closure", "--edges", p(&edges)]);
    let lines: Vec<&str> = closure.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines.contains(&"dog\tanimal"));

    let marg = ok(&["marginals", "--edges", p(&edges)]);
    assert!(marg.lines().any(|l| l.starts_with("animal\t") && l.ends_with("\t1.0000000000000000e0")), "{marg}");
    let strict = ok(&["marginals", "--edges", p(&edges), "--exclude-self"]);
    assert_ne!(marg, strict);

    let pairs = dir.path().join("cpd.tsv");
    ok(&["cpd", "--edges", p(&edges), "--format", "pairs", "--out", p(&pairs)]);
    let kept = ok(&["prune-cpd", "--pairs", p(&pairs), "--hi", "0.6", "--lo", "0.4"]);
    let direct = ok(&["prune-cpd", "--edges", p(&edges), "--hi", "0.6", "--lo", "0.4"]);
    let sorted = |s: &str| {
        let mut v: Vec<String> = s.lines().map(String::from).collect();
        v.sort();
        v
    };
    assert_eq!(sorted(&kept), sorted(&direct));
    assert!(kept.contains("animal\tdog\t"));

    let negs = dir.path().join("neg.tsv");
    ok(&["negatives", "--edges", p(&edges), "--k", "2", "--seed", "3", "--out", p(&negs)]);
    let n = read_edges(&negs).unwrap();
    assert_eq!(n.len(), 10);
    let truth: Vec<(String, String)> =
        lines.iter().map(|l| l.split_once('\t').unwrap()).map(|(a, b)| (a.into(), b.into())).collect();
    assert!(n.iter().all(|e| e.0 != e.1 && !truth.contains(e)));
    assert_eq!(ok(&["negatives", "--edges", p(&edges), "--k", "2", "--seed", "3"]), fs::read_to_string(&negs).unwrap());

    let model = dir.path().join("h.model");
    ok(&["train", "--edges", p(&edges), "--negatives", p(&negs), "--dim", "4", "--epochs", "30", "--out", p(&model)]);
    let labeled = write(&dir, "l.tsv", "dog\tanimal\t1\ntrout\tfish\t1\ndog\tfish\t0\ncat\ttrout\t0\n");
    let metrics = dir.path().join("metrics.tsv");
    let out = ok(&["eval", p(&model), "--pairs", p(&labeled), "--dev", p(&labeled), "--metrics", p(&metrics)]);
    assert!(out.contains("accuracy\t"));
    assert!(out.contains("threshold\t"));
    assert_eq!(fs::read_to_string(&metrics).unwrap(), out);
}

#[test]
fn eval_soft_labels() {
    let dir = TempDir::new().unwrap();
    let (model, _) = train_toy(&dir, "m", &["--epochs", "300"]);
    let gold = write(&dir, "g.tsv", "cactus\tplant\t1\ndeer\tanimal\t1\nanimal\tbrown\t0.5\nanimal\tomnivore\t0.25\nrock\tplant\t0\n");
    let cal = dir.path().join("cal.tsv");
    let out = ok(&["eval", p(&model), "--pairs", p(&gold), "--calibration", p(&cal), "--bins", "4"]);
    assert!(out.contains("kl\t") && out.contains("pearson\t"), "{out}");
    let cal = fs::read_to_string(&cal).unwrap();
    assert_eq!(cal.lines().count(), 5);
}

#[test]
fn asymmetrize_outputs() {
    let dir = TempDir::new().unwrap();
    let m = ok(&["cpd", "--toy"]);
    let cpd = write(&dir, "toy.cpd", &m);
    let o = boxlat(&["asymmetrize", "--scores", p(&cpd), "--check-acyclic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("cactus\tplant\t"));

    let sym = write(&dir, "sym.tsv", "1\t0.5\t0.2\n0.5\t1\t0.3\n0.2\t0.3\t1\n");
    assert_eq!(ok(&["asymmetrize", "--scores", p(&sym)]), "");

    let ragged = write(&dir, "r.tsv", "1\t0.5\n0.5\n");
    assert_eq!(boxlat(&["asymmetrize", "--scores", p(&ragged)]).status.code(), Some(2));

    let o = boxlat(&["asymmetrize", "--kl-example", "forward", "--threshold", "1", "--check-acyclic"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    let cycle: Vec<&str> = err.trim().rsplit(": ").next().unwrap().split(" -> ").collect();
    assert!(cycle.len() >= 4 && cycle.first() == cycle.last(), "{err}");
    let edges = stdout(&o);
    for w in cycle.windows(2) {
        assert!(edges.lines().any(|l| l.starts_with(&format!("{}\t{}\t", w[0], w[1]))), "{w:?} not in {edges}");
    }
}
