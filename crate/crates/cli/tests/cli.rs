use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use cooc_core::baselines::Baseline;
use cooc_core::corpus_file::{load_dataset, save_dataset};
use cooc_core::eval::{cross_validate, Method};
use cooc_core::ingest::read_transactions;
use cooc_core::scorers::Scorer;
use cooc_core::synthetic::planted_pairs;
use cooc_core::training::checkpoint::Checkpoint;
use cooc_core::training::init_model;
use cooc_core::{Dataset, Hyperparams, ItemId, ItemSet, Model, ModelKind, Vocabulary};

fn cooc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cooc"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cooc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout(&out)
}

fn code(args: &[&str]) -> i32 {
    cooc(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    /// Ingests transaction lines and returns the corpus path.
    fn corpus(&self, text: &str) -> PathBuf {
        let raw = self.write("raw.txt", text);
        let out = self.path("corpus.bin");
        ok(&["ingest", "--format", "transactions", s(&raw), s(&out)]);
        out
    }

    fn planted(&self) -> PathBuf {
        let corpus = planted_pairs(10, 2, 2000, 11);
        let ds = Dataset {
            vocab: Vocabulary::identity(corpus.n_items()),
            corpus,
        };
        let p = self.path("planted.bin");
        save_dataset(&ds, &p).unwrap();
        p
    }
}

const BASKETS: &str = "10 20\n10 20\n10 30\n20 30 40\n10 40\n20 40\n";

#[test]
fn ingest_round_trips_transactions() {
    let fx = Fixture::new();
    let path = fx.corpus(BASKETS);
    let expected = read_transactions(BASKETS.as_bytes()).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), expected);
}

#[test]
fn ingest_movielens_drops_low_ratings() {
    let fx = Fixture::new();
    let raw = fx.write(
        "ratings.dat",
        "1::100::5::0\n1::200::3.5::0\n2::100::4::0\n2::300::4.5::0\n",
    );
    let out = fx.path("ml.bin");
    ok(&["ingest", "--format", "movielens", s(&raw), s(&out)]);
    let ds = load_dataset(&out).unwrap();
    assert_eq!(ds.vocab.id("200"), None);
    assert_eq!(ds.corpus.n_occurrences(), 3);

    ok(&[
        "ingest",
        "--format",
        "movielens",
        "--threshold",
        "3",
        s(&raw),
        s(&out),
    ]);
    assert!(load_dataset(&out).unwrap().vocab.id("200").is_some());
}

#[test]
fn ingest_usage_and_data_errors() {
    let fx = Fixture::new();
    let raw = fx.write("raw.txt", "1 2\n");
    let out = fx.path("o.bin");
    assert_eq!(code(&["ingest", "--format", "xml", s(&raw), s(&out)]), 1);
    assert_eq!(
        code(&["ingest", "--format", "transactions", "missing.txt", s(&out)]),
        2
    );
    let bad = fx.write("bad.txt", "1 x\n");
    assert_eq!(
        code(&["ingest", "--format", "transactions", s(&bad), s(&out)]),
        2
    );
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["--help"]), 0);
}

fn load_model(p: &Path) -> Model {
    Checkpoint::load(p).unwrap().model
}

#[test]
fn train_layer_specs() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let ckpt = fx.path("m.ckpt");
    let out = ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--layers",
        "32x16",
        "--epochs",
        "2",
    ]);
    assert_eq!(out.lines().count(), 3);
    let Model::Dem(p) = load_model(&ckpt) else {
        panic!()
    };
    assert_eq!(p.layer_sizes(), vec![32, 16]);
    let trace = fs::read_to_string(fx.path("m.ckpt.trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 3);

    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--layers",
        "",
        "--epochs",
        "2",
    ]);
    let Model::Dem(p) = load_model(&ckpt) else {
        panic!()
    };
    assert!(p.layer_sizes().is_empty());

    assert_eq!(
        code(&["train", s(&corpus), "-o", s(&ckpt), "--layers", "3x0"]),
        1
    );
    assert_eq!(
        code(&["train", s(&corpus), "-o", s(&ckpt), "--learning-rate", "-1"]),
        1
    );
}

#[test]
fn zero_epochs_is_the_initialization() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let ckpt = fx.path("m.ckpt");
    for (model, kind, layers) in [
        ("dem", ModelKind::Dem, vec![4, 3]),
        ("fvbm", ModelKind::Fvbm { tied: true }, vec![]),
        ("l1", ModelKind::L1, vec![]),
        (
            "lbl",
            ModelKind::Lbl {
                dim: 32,
                use_bias: true,
            },
            vec![],
        ),
    ] {
        ok(&[
            "train",
            s(&corpus),
            "-o",
            s(&ckpt),
            "--model",
            model,
            "--layers",
            "4x3",
            "--epochs",
            "0",
            "--seed",
            "9",
        ]);
        let hyper = Hyperparams {
            layer_sizes: layers,
            epochs: 0,
            seed: 9,
            ..Hyperparams::default()
        };
        assert_eq!(load_model(&ckpt), init_model(kind, 4, &hyper), "{model}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let (a, b) = (fx.path("a.ckpt"), fx.path("b.ckpt"));
    for p in [&a, &b] {
        ok(&[
            "train",
            s(&corpus),
            "-o",
            s(p),
            "--layers",
            "4",
            "--epochs",
            "3",
            "--seed",
            "5",
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let eval = [
        "evaluate",
        s(&corpus),
        "--model",
        "fvbm",
        "--folds",
        "2",
        "--epochs",
        "2",
        "--no-timing",
    ];
    assert_eq!(ok(&eval), ok(&eval));
}

#[test]
fn evaluate_cvg_hand_count() {
    let fx = Fixture::new();
    // Every masked record is {0, 1}; the other member always co-occurs with
    // the context in training and item 2 never does.
    let corpus = fx.corpus("0 1\n0 1\n0 1\n0 1\n2\n");
    let out = ok(&[
        "evaluate",
        s(&corpus),
        "--baseline",
        "cvg",
        "--k",
        "1,10",
        "--folds",
        "2",
        "--no-timing",
    ]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "model\tK\tmean\tstd\tn_test\tseconds");
    assert_eq!(rows[1], "cvg\t1\t1.000000\t0.000000\t4\t-");
    assert_eq!(rows[2], "cvg\t10\t1.000000\t0.000000\t4\t-");
    assert_eq!(rows.len(), 3);
}

#[test]
fn evaluate_matches_library() {
    let fx = Fixture::new();
    let corpus_path = fx.corpus(BASKETS);
    let corpus = load_dataset(&corpus_path).unwrap().corpus;
    for (flag, baseline) in [
        ("cvg", Baseline::Cvg),
        (
            "lrw",
            Baseline::Lrw {
                steps: 2,
                mode: cooc_core::baselines::WalkScore::Accumulated,
            },
        ),
    ] {
        let report = cross_validate(&corpus, &Method::Baseline(baseline), &[1, 2], 3, 4).unwrap();
        let out = ok(&[
            "evaluate",
            s(&corpus_path),
            "--baseline",
            flag,
            "--k",
            "1,2",
            "--folds",
            "3",
            "--seed",
            "4",
            "--no-timing",
        ]);
        let expected: Vec<String> = report.tsv_rows(false);
        assert_eq!(out.lines().skip(1).collect::<Vec<_>>(), expected);
    }
}

#[test]
fn evaluate_json_summary_and_errors() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let out = ok(&[
        "evaluate",
        s(&corpus),
        "--baseline",
        "normcvg",
        "--norm",
        "target",
        "--folds",
        "2",
        "--summary",
        "json",
    ]);
    assert!(out.contains("\"method\": \"normcvg\""));
    assert_eq!(
        code(&["evaluate", s(&corpus), "--baseline", "cvg", "--folds", "1"]),
        1
    );
    assert_eq!(
        code(&["evaluate", s(&corpus), "--baseline", "cvg", "--k", "0"]),
        1
    );
    assert_eq!(code(&["evaluate", s(&corpus)]), 1);
    assert_eq!(
        code(&["evaluate", s(&corpus), "--baseline", "cvg", "--model", "l1"]),
        1
    );
}

#[test]
fn compare_prints_p_value() {
    let fx = Fixture::new();
    let corpus = fx.planted();
    let (a, b) = (fx.path("dem.ckpt"), fx.path("l1.ckpt"));
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&a),
        "--model",
        "fvbm",
        "--epochs",
        "3",
    ]);
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&b),
        "--model",
        "l1",
        "--epochs",
        "3",
    ]);
    let out = ok(&[
        "evaluate",
        s(&corpus),
        "--compare",
        s(&a),
        s(&b),
        "--k",
        "1",
        "--no-timing",
    ]);
    let last = out.lines().last().unwrap();
    let fields: Vec<&str> = last.split('\t').collect();
    assert_eq!(fields[..2], ["mcnemar_p", "K=1"]);
    let p: f64 = fields[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn predict_zero_init_ties_by_id() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let ckpt = fx.path("z.ckpt");
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--layers",
        "3",
        "--init-scale",
        "0",
        "--epochs",
        "0",
    ]);
    let out = ok(&["predict", s(&ckpt), "--items", "1", "--k", "10"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "rank\tid\ttoken\tprob");
    assert_eq!(
        rows[1..],
        [
            "1\t0\t10\t0.500000",
            "2\t2\t30\t0.500000",
            "3\t3\t40\t0.500000"
        ]
    );

    let out = cooc(&["predict", s(&ckpt), "--items", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0..=3"));
}

#[test]
fn predict_partner_first() {
    let fx = Fixture::new();
    let corpus = fx.planted();
    let ckpt = fx.path("f.ckpt");
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--model",
        "fvbm",
        "--epochs",
        "5",
    ]);
    for item in ["0", "5", "12"] {
        let out = ok(&["predict", s(&ckpt), "--items", item, "--k", "1"]);
        let partner = (item.parse::<u32>().unwrap() ^ 1).to_string();
        let top = out.lines().nth(1).unwrap();
        assert_eq!(
            top.split('\t').nth(1),
            Some(partner.as_str()),
            "{item}: {top}"
        );
    }
}

#[test]
fn export_embeddings() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let ckpt = fx.path("m.ckpt");
    let emb = fx.path("emb.tsv");
    for (layers, width) in [("8", 8), ("6x5", 11)] {
        ok(&[
            "train",
            s(&corpus),
            "-o",
            s(&ckpt),
            "--layers",
            layers,
            "--epochs",
            "2",
        ]);
        ok(&["export-embeddings", s(&ckpt), "-o", s(&emb)]);
        let Model::Dem(p) = load_model(&ckpt) else {
            panic!()
        };
        let text = fs::read_to_string(&emb).unwrap();
        let tokens = ["10", "20", "30", "40"];
        for (t, line) in text.lines().enumerate() {
            let mut fields = line.split('\t');
            assert_eq!(fields.next(), Some(tokens[t]));
            let values: Vec<f64> = fields.map(|f| f.parse().unwrap()).collect();
            assert_eq!(values.len(), width);
            assert_eq!(values, p.embedding(ItemId(t as u32)));
        }
    }
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--layers",
        "",
        "--epochs",
        "1",
    ]);
    assert_eq!(code(&["export-embeddings", s(&ckpt)]), 2);
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--model",
        "l1",
        "--epochs",
        "1",
    ]);
    assert_eq!(code(&["export-embeddings", s(&ckpt)]), 2);
}

#[test]
fn grad_check_exit_codes() {
    assert!(ok(&["grad-check"]).starts_with("PASS"));
    assert!(ok(&["grad-check", "--layers", "8x4x2", "--seed", "3"]).starts_with("PASS"));
    let out = cooc(&["grad-check", "--corrupt"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).starts_with("FAIL"));
}

#[test]
fn config_file_and_flag_precedence() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let cfg = fx.write(
        "run.cfg",
        "# defaults\nepochs = 2\nlayers = 3\nreweight-negatives = true\n",
    );
    let ckpt = fx.path("c.ckpt");
    let out = ok(&["train", "--config", s(&cfg), s(&corpus), "-o", s(&ckpt)]);
    assert_eq!(out.lines().count(), 3);
    let out = ok(&[
        "train",
        "--config",
        s(&cfg),
        s(&corpus),
        "-o",
        s(&ckpt),
        "--epochs",
        "4",
        "--layers",
        "2",
    ]);
    assert_eq!(out.lines().count(), 5);
    let Model::Dem(p) = load_model(&ckpt) else {
        panic!()
    };
    assert_eq!(p.layer_sizes(), vec![2]);

    let bad = fx.write("bad.cfg", "no equals sign\n");
    assert_eq!(
        code(&["train", "--config", s(&bad), s(&corpus), "-o", s(&ckpt)]),
        1
    );
}

#[test]
fn threads_flag() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let one = ok(&[
        "--threads",
        "1",
        "evaluate",
        s(&corpus),
        "--baseline",
        "cvg",
        "--folds",
        "2",
        "--no-timing",
    ]);
    let many = ok(&[
        "evaluate",
        s(&corpus),
        "--baseline",
        "cvg",
        "--folds",
        "2",
        "--no-timing",
        "--threads",
        "4",
    ]);
    assert_eq!(one, many);
    assert_eq!(code(&["--threads", "0", "grad-check"]), 1);
}

#[test]
fn dem0_checkpoint_scores_like_its_pair_weights() {
    let fx = Fixture::new();
    let corpus = fx.corpus(BASKETS);
    let ckpt = fx.path("d0.ckpt");
    ok(&[
        "train",
        s(&corpus),
        "-o",
        s(&ckpt),
        "--layers",
        "",
        "--epochs",
        "3",
    ]);
    let Model::Dem(p) = load_model(&ckpt) else {
        panic!()
    };
    let pair =
        cooc_core::scorers::PairParams::untied(p.bias.clone(), p.pair_readout.clone()).unwrap();
    let ctx = ItemSet::new([0u32, 2], 4).unwrap();
    for t in [1u32, 3] {
        let t = ItemId(t);
        assert!((p.score(t, &ctx).unwrap() - pair.score(t, &ctx).unwrap()).abs() <= 1e-12);
    }
}
