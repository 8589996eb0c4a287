//! Black-box tests of the command-line interface: workflows, output files
//! and exit codes (0 success, 1 usage, 2 data/format, 3 model/resource).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radner"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("radner-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap_or(-1)
}

fn write_memorize_config(dir: &Path) -> PathBuf {
    let path = dir.join("gen.json");
    std::fs::write(&path, radner::stock::GENCONFIG_MEMORIZE).unwrap();
    path
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let output = run(&[]);
    assert_eq!(code(&output), 1);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage"), "stderr: {stderr}");
    assert!(output.stdout.is_empty());
}

#[test]
fn help_is_a_success() {
    let output = run(&["--help"]);
    assert_eq!(code(&output), 0);
}

#[test]
fn datagen_annotate_evaluate_workflow() {
    let dir = scratch("workflow");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    let annotated = dir.join("annotated.jsonl");
    let report = dir.join("report.json");

    let out = run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(corpus.exists());

    let out = run(&[
        "annotate",
        "--system",
        "ruler",
        "--in",
        corpus.to_str().unwrap(),
        "--out",
        annotated.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");

    let out = run(&[
        "evaluate",
        "--gold",
        "gold",
        "--system",
        "ruler",
        "--in",
        annotated.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(report.exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("All"), "stdout: {stdout}");
    // All diagnostics go to stderr, machine-readable output to stdout/files.
    assert!(!stdout.contains("note:"));
}

#[test]
fn datagen_is_byte_reproducible() {
    let dir = scratch("repro");
    let gen = write_memorize_config(&dir);
    let a = dir.join("a.jsonl");
    let b = dir.join("b.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", b.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // A seed override changes the bytes.
    let c = dir.join("c.jsonl");
    assert_eq!(
        code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--seed", "9", "--out", c.to_str().unwrap()])),
        0
    );
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn bag_bundle_missing_a_type_file_exits_three() {
    let dir = scratch("missing-part");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()])), 0);
    let train_config = dir.join("train.json");
    std::fs::write(&train_config, r#"{"seed": 1, "mode": "bag", "epochs": 1}"#).unwrap();
    let model_dir = dir.join("model");
    let out = run(&[
        "train",
        "neural",
        "--train",
        corpus.to_str().unwrap(),
        "--config",
        train_config.to_str().unwrap(),
        "--out",
        model_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    // Remove one per-type model file from the bundle.
    std::fs::remove_file(model_dir.join("model.tumour.json")).unwrap();
    let out = run(&[
        "annotate",
        "--system",
        "neural",
        "--in",
        corpus.to_str().unwrap(),
        "--out",
        dir.join("x.jsonl").to_str().unwrap(),
        "--model",
        model_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{out:?}");
}

#[test]
fn train_and_annotate_neural_and_gazetteer() {
    let dir = scratch("train-all");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()])), 0);

    let train_config = dir.join("train.json");
    std::fs::write(&train_config, r#"{"seed": 1, "mode": "monolithic", "epochs": 12}"#).unwrap();
    let model_dir = dir.join("model");
    let out = run(&[
        "train", "neural",
        "--train", corpus.to_str().unwrap(),
        "--dev", corpus.to_str().unwrap(),
        "--config", train_config.to_str().unwrap(),
        "--out", model_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(model_dir.join("bundle.json").exists());
    assert!(model_dir.join("model.joint.json").exists());

    let annotated = dir.join("neural.jsonl");
    let out = run(&[
        "annotate", "--system", "neural",
        "--in", corpus.to_str().unwrap(),
        "--out", annotated.to_str().unwrap(),
        "--model", model_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");

    let disambig = dir.join("disambig.json");
    let out = run(&[
        "train", "gazetteer",
        "--train", corpus.to_str().unwrap(),
        "--out", disambig.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let out = run(&[
        "annotate", "--system", "gazetteer",
        "--in", annotated.to_str().unwrap(),
        "--out", dir.join("both.jsonl").to_str().unwrap(),
        "--disambiguator", disambig.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn compare_renders_reports_side_by_side() {
    let dir = scratch("compare");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()])), 0);
    let annotated = dir.join("annotated.jsonl");
    assert_eq!(
        code(&run(&["annotate", "--system", "ruler", "--in", corpus.to_str().unwrap(), "--out", annotated.to_str().unwrap()])),
        0
    );
    let with_gaz = dir.join("with_gaz.jsonl");
    assert_eq!(
        code(&run(&["annotate", "--system", "gazetteer", "--in", annotated.to_str().unwrap(), "--out", with_gaz.to_str().unwrap()])),
        0
    );
    let r1 = dir.join("ruler.json");
    let r2 = dir.join("gaz.json");
    assert_eq!(
        code(&run(&["evaluate", "--gold", "gold", "--system", "ruler", "--in", with_gaz.to_str().unwrap(), "--out", r1.to_str().unwrap()])),
        0
    );
    assert_eq!(
        code(&run(&["evaluate", "--gold", "gold", "--system", "gazetteer", "--in", with_gaz.to_str().unwrap(), "--out", r2.to_str().unwrap()])),
        0
    );
    let out = run(&["compare", "--reports", r1.to_str().unwrap(), r2.to_str().unwrap(), "--tsv"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ruler P"));
    assert!(stdout.contains("gazetteer P"));
    assert!(stdout.lines().count() == 19, "{stdout}");
}

#[test]
fn iaa_emits_both_orientations() {
    let dir = scratch("iaa");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()])), 0);
    // Fake a second annotator by copying gold under another source name.
    let mut loaded =
        radner::corpus_io::read_corpus(&corpus, radner::corpus_io::CorpusFormat::Jsonl).unwrap();
    for doc in &mut loaded.documents {
        let gold = doc.mentions("gold").to_vec();
        doc.set_annotations("annotator_b", gold);
    }
    let both = dir.join("both.jsonl");
    radner::corpus_io::write_corpus(&loaded, &both, radner::corpus_io::CorpusFormat::Jsonl)
        .unwrap();
    let out = run(&["iaa", "--a", "gold", "--b", "annotator_b", "--in", both.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    // Two tables, identical annotations: perfect agreement in both.
    assert_eq!(stdout.matches("All").count(), 2);
    assert!(stdout.contains("1.00*"));
}

#[test]
fn stats_and_filter() {
    let dir = scratch("stats");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()])), 0);
    let out = run(&["stats", "--in", corpus.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("reports:   10"));
    assert!(stdout.contains("entities:  20"));

    let kept = dir.join("kept.jsonl");
    let out = run(&[
        "filter",
        "--keywords",
        "subdural,haemorrh*",
        "--in",
        corpus.to_str().unwrap(),
        "--out",
        kept.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let out = run(&["stats", "--in", kept.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("reports:   10"), "filter kept everything: {stdout}");
}

#[test]
fn malformed_corpus_exits_two_with_line_number() {
    let dir = scratch("badfile");
    let bad = dir.join("bad.conll");
    std::fs::write(&bad, "-DOCSTART- d\nNo\tDET\tO\ninfarct\tN\tI-ischaemic_stroke\n\n").unwrap();
    let out = run(&["stats", "--in", bad.to_str().unwrap(), "--format", "conll"]);
    assert_eq!(code(&out), 2, "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":3:"), "stderr: {stderr}");
}

#[test]
fn conll_format_roundtrips_through_the_cli() {
    let dir = scratch("conll");
    let gen = write_memorize_config(&dir);
    let jsonl = dir.join("corpus.jsonl");
    let conll = dir.join("corpus.conll");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", jsonl.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", conll.to_str().unwrap(), "--format", "conll"])), 0);
    // Reading the CoNLL file back and evaluating gold against gold: exact.
    let out = run(&["evaluate", "--gold", "gold", "--system", "gold", "--in", conll.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("1.00*"));
}

#[test]
fn evaluate_runs_requires_training_inputs() {
    let dir = scratch("runs-usage");
    let gen = write_memorize_config(&dir);
    let corpus = dir.join("corpus.jsonl");
    assert_eq!(code(&run(&["datagen", "--config", gen.to_str().unwrap(), "--out", corpus.to_str().unwrap()])), 0);
    let out = run(&[
        "evaluate", "--gold", "gold", "--system", "neural",
        "--in", corpus.to_str().unwrap(), "--runs", "5",
    ]);
    assert_eq!(code(&out), 1, "{out:?}");
}
