use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn weakcls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakcls"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = weakcls(args);
    assert!(
        out.status.success(),
        "weakcls {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&[
        "synth",
        "--classes",
        "3",
        "--docs",
        "120",
        "--dim",
        "16",
        "--seed",
        "5",
        "--out",
        p(dir),
    ]);
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn assert_same_dirs(a: &Path, b: &Path) {
    assert_eq!(files_in(a), files_in(b));
    for f in files_in(a) {
        assert_eq!(
            fs::read(a.join(&f)).unwrap(),
            fs::read(b.join(&f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out = tmp.path().join("out");
    synth(&corpus);
    let stdout = ok(&[
        "pipeline",
        "--corpus",
        p(&corpus),
        "--out",
        p(&out),
        "--pca-dim",
        "8",
    ]);
    assert!(stdout.contains("classifier: accuracy"), "{stdout}");
    for f in [
        "keywords.txt",
        "class_reps.bin",
        "doc_reps.bin",
        "projection.csv",
        "prior_labels.txt",
        "alignment.csv",
        "pseudo_labels.csv",
        "classifier.json",
        "predictions.txt",
        "report_rep.json",
        "report_align.json",
        "report_final.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let keywords = fs::read_to_string(out.join("keywords.txt")).unwrap();
    assert_eq!(keywords.lines().count(), 3);
    assert!(keywords.starts_with("sports\tsports,"));
}

#[test]
fn staged_run_matches_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus);
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    ok(&[
        "pipeline",
        "--corpus",
        p(&corpus),
        "--out",
        p(&whole),
        "--pca-dim",
        "8",
    ]);
    ok(&["represent", "--corpus", p(&corpus), "--out", p(&staged)]);
    ok(&["align", "--out", p(&staged), "--pca-dim", "8"]);
    ok(&["select", "--out", p(&staged)]);
    ok(&["train", "--out", p(&staged)]);
    assert_same_dirs(&whole, &staged);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus);
    let one = tmp.path().join("one");
    let many = tmp.path().join("many");
    ok(&[
        "pipeline",
        "--threads",
        "1",
        "--corpus",
        p(&corpus),
        "--out",
        p(&one),
    ]);
    ok(&[
        "pipeline",
        "--threads",
        "4",
        "--corpus",
        p(&corpus),
        "--out",
        p(&many),
    ]);
    assert_same_dirs(&one, &many);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus);
    let cfg = tmp.path().join("run.conf");
    let out = tmp.path().join("out");
    fs::write(
        &cfg,
        format!(
            "corpus={}\noutput={}\nt_keywords=3\ndelta=0.25\n",
            p(&corpus),
            p(&out)
        ),
    )
    .unwrap();
    ok(&["pipeline", "--config", p(&cfg), "--t-keywords", "2"]);
    let keywords = fs::read_to_string(out.join("keywords.txt")).unwrap();
    for line in keywords.lines() {
        let list = line.split('\t').nth(1).unwrap();
        assert!(list.split(',').count() <= 2, "{line}");
    }
    let pseudo = fs::read_to_string(out.join("pseudo_labels.csv")).unwrap();
    // 3 classes of 40 documents; a quarter of each predicted cluster survives.
    let kept = pseudo.lines().count() - 1;
    assert!((30..=33).contains(&kept), "kept {kept}");
}

#[test]
fn cluster_method_none_keeps_prior_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out = tmp.path().join("out");
    synth(&corpus);
    ok(&[
        "pipeline",
        "--corpus",
        p(&corpus),
        "--out",
        p(&out),
        "--cluster-method",
        "none",
    ]);
    assert_eq!(
        fs::read(out.join("prior_labels.txt")).unwrap(),
        fs::read(out.join("alignment_labels.txt")).unwrap()
    );
}

#[test]
fn evaluate_prints_json_report() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.txt");
    let gold = tmp.path().join("gold.txt");
    fs::write(&pred, "0\n1\n1\n0\n").unwrap();
    fs::write(&gold, "0\n1\n0\n0\n").unwrap();
    let stdout = ok(&["evaluate", "--predicted", p(&pred), "--gold", p(&gold)]);
    assert!(stdout.contains("\"micro_f1\": 0.75"), "{stdout}");
}

#[test]
fn failures_name_the_stage_and_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = weakcls(&["align", "--out", p(tmp.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage 'align'"), "{err}");

    let corpus = tmp.path().join("corpus");
    synth(&corpus);
    let names = tmp.path().join("names.txt");
    fs::write(&names, "sports\nnonexistentclass\n").unwrap();
    let out = weakcls(&[
        "pipeline",
        "--corpus",
        p(&corpus),
        "--class-names",
        p(&names),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("stage 'represent'") && err.contains("nonexistentclass"),
        "{err}"
    );

    let out = weakcls(&[
        "pipeline",
        "--corpus",
        p(&corpus),
        "--out",
        p(tmp.path()),
        "--attention",
        "softmax",
    ]);
    assert!(!out.status.success());
}

#[test]
fn hier_classifies_synthetic_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    ok(&[
        "synth",
        "--hier",
        "--classes",
        "2",
        "--fine-per",
        "2",
        "--docs",
        "200",
        "--dim",
        "16",
        "--out",
        p(&corpus),
    ]);
    let tree = corpus.join("tree.txt");
    for mode in ["hier", "end"] {
        let out = tmp.path().join(mode);
        let stdout = ok(&[
            "hier",
            "--corpus",
            p(&corpus),
            "--tree",
            p(&tree),
            "--out",
            p(&out),
            "--mode",
            mode,
        ]);
        assert!(stdout.contains("leaves: accuracy"), "{stdout}");
        let paths = fs::read_to_string(out.join("paths.txt")).unwrap();
        assert_eq!(paths.lines().count(), 200);
        for line in paths.lines() {
            let (coarse, leaf) = line.split_once('/').unwrap();
            assert!(leaf.starts_with(coarse), "{line}");
        }
    }
}
