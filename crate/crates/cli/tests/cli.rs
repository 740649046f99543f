use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relnet"))
        .args(args)
        .output()
        .expect("run relnet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = relnet(&["synth", "--seed", "7", "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let names = ["train.jsonl", "valid.jsonl", "test.jsonl", "lexicon.tsv", "topics.json", "relnet.cfg"];
    for name in names {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, y, "{name} differs between runs");
    }
    let c = dir.path().join("c");
    assert!(relnet(&["synth", "--seed", "8", "--out", p(&c)]).status.success());
    assert_ne!(fs::read(a.join("train.jsonl")).unwrap(), fs::read(c.join("train.jsonl")).unwrap());
}

#[test]
fn eval_of_perfect_predictions_reports_ones() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("gold.jsonl");
    let preds = dir.path().join("pred.jsonl");
    fs::write(
        &data,
        concat!(
            r#"{"id":"a","text":"i feel fine","label":"low"}"#,
            "\n",
            r#"{"id":"b","text":"nothing matters","label":"high"}"#,
            "\n",
            r#"{"id":"c","text":"good day","label":"low"}"#,
            "\n"
        ),
    )
    .unwrap();
    fs::write(
        &preds,
        concat!(
            r#"{"id":"c","label":"low","P":[0.9,0.1]}"#,
            "\n",
            r#"{"id":"a","label":"low","P":[0.8,0.2]}"#,
            "\n",
            r#"{"id":"b","label":"high","P":[0.3,0.7]}"#,
            "\n"
        ),
    )
    .unwrap();
    let o = relnet(&["eval", "--predictions", p(&preds), "--data", p(&data), "--labels", "low,high"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for line in ["accuracy  1.0000", "precision 1.0000", "recall    1.0000", "f1        1.0000"] {
        assert!(out.contains(line), "missing `{line}` in\n{out}");
    }
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let o = relnet(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(relnet(&[]).status.code(), Some(2));
    assert_eq!(relnet(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_and_data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("syn");
    assert!(relnet(&["synth", "--out", p(&gen)]).status.success());
    let cfg = gen.join("relnet.cfg");
    let out = dir.path().join("run");

    let o = relnet(&["train", "-c", p(&cfg), "--variant", "rn_everything", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = relnet(&["train", "-c", p(&cfg), "--set", "colour=red", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = relnet(&["train", "-c", p(&cfg), "--epochs", "0", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let missing = dir.path().join("missing.jsonl");
    let o = relnet(&["train", "-c", p(&cfg), "--train", p(&missing), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\": \"x\", \"text\": \"hi\", \"label\": \"nope\"}\n").unwrap();
    let o = relnet(&["train", "-c", p(&cfg), "--train", p(&bad), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = relnet(&["eval", "--model", p(&missing), "--data", p(&bad)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("syn");
    assert!(relnet(&["synth", "--seed", "3", "--out", p(&gen)]).status.success());
    let run = dir.path().join("run");
    let o = relnet(&[
        "train",
        "-c",
        p(&gen.join("relnet.cfg")),
        "--epochs",
        "1",
        "--set",
        "lda_iters=20",
        "-o",
        p(&run),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["model.json", "run_log.csv", "metrics.json", "config.cfg"] {
        assert!(run.join(f).exists(), "{f} not written");
    }

    let preds = run.join("pred.jsonl");
    let att = run.join("attention.json");
    let test = gen.join("test.jsonl");
    let o = relnet(&["predict", "--model", p(&run.join("model.json")), "--input", p(&test), "-o", p(&preds), "--attention", p(&att)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first: serde_json::Value = serde_json::from_str(fs::read_to_string(&preds).unwrap().lines().next().unwrap()).unwrap();
    for key in ["id", "label", "P", "alpha_s", "alpha_v"] {
        assert!(first.get(key).is_some(), "prediction lacks `{key}`: {first}");
    }
    let p_sum: f64 = first["P"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((p_sum - 1.0).abs() < 1e-9);
    let attention: serde_json::Value = serde_json::from_slice(&fs::read(&att).unwrap()).unwrap();
    assert_eq!(attention.as_array().unwrap().len(), 800);

    // Scoring the model directly and scoring its saved predictions agree.
    let direct = relnet(&["eval", "--model", p(&run.join("model.json")), "--data", p(&test)]);
    let saved = relnet(&[
        "eval",
        "--predictions",
        p(&preds),
        "--data",
        p(&test),
        "--labels",
        "topic0_pos,topic0_neg,crossed,uncrossed",
    ]);
    assert!(direct.status.success() && saved.status.success());
    assert_eq!(stdout(&direct), stdout(&saved));

    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(run.join("metrics.json")).unwrap()).unwrap();
    let f1 = metrics["report"]["f1"].as_f64().unwrap();
    assert!(stdout(&direct).contains(&format!("f1        {f1:.4}")));
}

#[test]
fn lda_fit_then_inspect_lists_top_words() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("syn");
    assert!(relnet(&["synth", "--out", p(&gen)]).status.success());
    let model = dir.path().join("lda.json");
    let o = relnet(&["lda", "fit", "-c", p(&gen.join("relnet.cfg")), "--set", "lda_iters=30", "-o", p(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fitted = stdout(&o);
    let o = relnet(&["lda", "inspect", "--model", p(&model)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), fitted);
    let lines: Vec<&str> = fitted.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.split_whitespace().count() == 2 + 10), "{fitted}");
}
