use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn aps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aps"))
        .args(args)
        .env_remove("APS_SCORER_ENDPOINT")
        .env_remove("APS_GEN_ENDPOINT")
        .output()
        .expect("spawn aps")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        Work { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, body: &str) -> String {
        let p = self.path(name);
        fs::write(&p, body).unwrap();
        s(&p)
    }
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

const DATASET: &str = r#"{"id":"a","text":"The cat sat on the mat. The dog slept.","propositions":[["The cat sat on the mat."],["The dog slept."]],"grouped":true}
{"id":"b","text":"Wembley was almost full. England won easily.","propositions":["Wembley was almost full.","England won easily."]}
{"id":"c","text":"Fits well and is light. Great price!","propositions":["Fits well.","Is light.","Great price!"]}
"#;

#[test]
fn gold_as_prediction_prints_perfect_rb() {
    let w = Work::new();
    let data = w.write("data.jsonl", DATASET);
    let report = w.path("report.json");
    let out =
        aps(&["evaluate", "--input", &data, "--predictions", &data, "--report", &s(&report), "--scorer", "oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rb = stdout(&out).lines().find(|l| l.starts_with("RB")).unwrap().to_owned();
    assert_eq!(rb.split_whitespace().collect::<Vec<_>>(), ["RB", "100.00", "100.00", "100.00"]);
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["rb_f1"], 1.0);
    assert_eq!(json["n_examples"], 3);
}

#[test]
fn baseline_piped_into_evaluate_gives_perfect_rf() {
    let w = Work::new();
    let data = w.write("data.jsonl", DATASET);
    let preds = w.path("preds.jsonl");
    let out = aps(&["baseline", "--input", &data, "--output", &s(&preds)]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<Value> =
        fs::read_to_string(&preds).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["propositions"].as_array().unwrap().len(), 2);

    let out = aps(&["evaluate", "--input", &data, "--predictions", &s(&preds)]);
    assert_eq!(out.status.code(), Some(0));
    let rf = stdout(&out).lines().find(|l| l.starts_with("RF")).unwrap().to_owned();
    assert_eq!(rf.split_whitespace().collect::<Vec<_>>(), ["RF", "100.00", "100.00", "100.00"]);
}

#[test]
fn fatal_errors_exit_two() {
    let w = Work::new();
    let data = w.write("data.jsonl", DATASET);
    let missing = s(&w.path("nope.jsonl"));
    assert_eq!(aps(&["evaluate", "--input", &missing, "--predictions", &data]).status.code(), Some(2));
    let empty = w.write("empty.jsonl", "\n");
    assert_eq!(aps(&["baseline", "--input", &empty, "--output", &s(&w.path("o.jsonl"))]).status.code(), Some(2));
    assert_eq!(aps(&["baseline", "--input", &data, "--output", &data]).status.code(), Some(2));
    assert_eq!(
        aps(&["evaluate", "--input", &data, "--predictions", &data, "--concurrency", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        aps(&["evaluate", "--input", &data, "--predictions", &data, "--scorer", "remote"]).status.code(),
        Some(2)
    );
    assert_eq!(aps(&["frobnicate"]).status.code(), Some(2));
    let seeds = w.write("seeds.jsonl", "{\"domain\":\"news\",\"length\":\"short\",\"text\":\"Hi.\"}\n");
    let out = aps(&["synth", "domains", "--seeds", &seeds, "--output", &s(&w.path("d.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn per_example_errors_exit_one_but_still_report() {
    let w = Work::new();
    let data = w.write("data.jsonl", DATASET);
    let preds = w.write(
        "preds.jsonl",
        "{\"id\":\"c\",\"propositions\":[\"Fits well.\"]}\n{\"id\":\"a\",\"propositions\":[\"The cat sat.\"]}\n{\"id\":\"zzz\",\"propositions\":[\"x\"]}\n",
    );
    let report = w.path("r.json");
    let per = w.path("per.jsonl");
    let out = aps(&[
        "evaluate",
        "--input",
        &data,
        "--predictions",
        &preds,
        "--report",
        &s(&report),
        "--per-example",
        &s(&per),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("example b: no prediction"), "{stderr}");
    assert!(stderr.contains("zzz"));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["n_examples"], 2);
    let ids: Vec<String> = fs::read_to_string(&per)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(ids, ["a", "c"]);
}

#[test]
fn correlate_exit_codes() {
    let w = Work::new();
    let linear = w.write(
        "lin.jsonl",
        "{\"metric\":\"rb_p\",\"values\":[1,2,3],\"human\":[2,4,6]}\n{\"metric\":\"rf_r\",\"value\":1,\"human\":3}\n{\"metric\":\"rf_r\",\"value\":2,\"human\":2}\n{\"metric\":\"rf_r\",\"value\":3,\"human\":1}\n",
    );
    let out = aps(&["correlate", "--input", &linear]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "rb_p\t1.0000\nrf_r\t-1.0000\n");

    let mismatch = w.write("mm.jsonl", "{\"metric\":\"m\",\"values\":[1,2,3],\"human\":[1,2]}\n");
    assert_eq!(aps(&["correlate", "--input", &mismatch]).status.code(), Some(2));
    let flat = w.write("flat.jsonl", "{\"metric\":\"m\",\"values\":[1,1,1],\"human\":[1,2,3]}\n");
    let out = aps(&["correlate", "--input", &flat]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constant"));
}

#[test]
fn align_writes_kept_and_audited_discards() {
    let w = Work::new();
    let raw = w.write(
        "raw.jsonl",
        "{\"id\":\"ok\",\"text\":\"The cat sat on the mat. The dog slept.\",\"propositions\":[\"The cat sat on the mat\",\"The dog slept.\"]}\n{\"id\":\"bad\",\"text\":\"The river is long. It flows north.\",\"propositions\":[\"The river is long.\",\"The river is purple.\"]}\n",
    );
    let (kept, discards) = (w.path("kept.jsonl"), w.path("disc.jsonl"));
    let out = aps(&["align", "--input", &raw, "--output", &s(&kept), "--discards", &s(&discards), "--tau", "0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["aligned"], 1);
    assert_eq!(report["unsupported"], 1);
    let kept: Value = serde_json::from_str(fs::read_to_string(&kept).unwrap().trim()).unwrap();
    assert_eq!(kept["grouped"], true);
    assert_eq!(kept["propositions"], serde_json::json!([["The cat sat on the mat."], ["The dog slept."]]));
    let disc: Value = serde_json::from_str(fs::read_to_string(&discards).unwrap().trim()).unwrap();
    assert_eq!(disc["id"], "bad");
    assert_eq!(disc["reason"], "unsupported");
    assert!(disc["diagnostics"]["propositions"].is_array());
}

#[test]
fn split_is_seeded_and_stable() {
    let w = Work::new();
    let body: String = (0..10)
        .map(|i| format!("{{\"id\":\"{i}\",\"text\":\"Line {i}.\",\"propositions\":[\"Line {i}.\"]}}\n"))
        .collect();
    let data = w.write("d.jsonl", &body);
    let run = |tag: &str| {
        let (tr, dv) = (w.path(&format!("tr{tag}")), w.path(&format!("dv{tag}")));
        let out = aps(&[
            "split",
            "--input",
            &data,
            "--train",
            &s(&tr),
            "--dev",
            &s(&dv),
            "--dev-fraction",
            "0.2",
            "--seed",
            "42",
        ]);
        assert_eq!(out.status.code(), Some(0));
        (fs::read_to_string(tr).unwrap(), fs::read_to_string(dv).unwrap())
    };
    let (a, b) = (run("1"), run("2"));
    assert_eq!(a, b);
    assert_eq!(a.0.lines().count(), 8);
    assert_eq!(a.1.lines().count(), 2);
}

#[test]
fn render_then_parse_round_trips() {
    let w = Work::new();
    let data = w.write("data.jsonl", DATASET.lines().next().unwrap());
    let train = w.path("train.jsonl");
    assert_eq!(aps(&["render", "--input", &data, "--output", &s(&train)]).status.code(), Some(0));
    let rec: Value = serde_json::from_str(fs::read_to_string(&train).unwrap().trim()).unwrap();
    assert_eq!(rec["target"], "<s>- The cat sat on the mat.</s><s>- The dog slept.</s>");

    let raw = w.write(
        "raw.jsonl",
        &format!(
            "{}\n{}\n",
            serde_json::json!({"id": "a", "output": rec["target"]}),
            serde_json::json!({"id": "a2", "output": "<s>- x", "text": "X."})
        ),
    );
    let (preds, quarantine) = (w.path("preds.jsonl"), w.path("q.jsonl"));
    let out = aps(&[
        "parse-output",
        "--input",
        &raw,
        "--output",
        &s(&preds),
        "--dataset",
        &data,
        "--quarantine",
        &s(&quarantine),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let back: Value = serde_json::from_str(fs::read_to_string(&preds).unwrap().trim()).unwrap();
    let orig: Value = serde_json::from_str(DATASET.lines().next().unwrap()).unwrap();
    assert_eq!(back["propositions"], orig["propositions"]);
    assert!(fs::read_to_string(&quarantine).unwrap().contains("a2"));

    let ungrouped = w.write("u.jsonl", DATASET.lines().nth(1).unwrap());
    let out = aps(&["render", "--input", &ungrouped, "--output", &s(&train)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        aps(&["render", "--input", &ungrouped, "--output", &s(&train), "--mode", "ungrouped"]).status.code(),
        Some(0)
    );
}

#[test]
fn synth_filter_drops_seed_overlap() {
    let w = Work::new();
    let seeds = w.write(
        "seeds.jsonl",
        "{\"domain\":\"news\",\"length\":\"short\",\"text\":\"The quick brown fox jumps over the lazy dog.\"}\n",
    );
    let texts = w.write(
        "texts.jsonl",
        "{\"domain\":\"a\",\"length\":\"short\",\"index\":0,\"text\":\"Yesterday the quick brown fox jumps again.\"}\n{\"domain\":\"b\",\"length\":\"short\",\"index\":0,\"text\":\"A slow red fox rests.\"}\n",
    );
    let (kept, dropped) = (w.path("k.jsonl"), w.path("d.jsonl"));
    let out = aps(&[
        "synth",
        "filter",
        "--seeds",
        &seeds,
        "--input",
        &texts,
        "--output",
        &s(&kept),
        "--dropped",
        &s(&dropped),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(&kept).unwrap().contains("slow red fox"));
    assert!(fs::read_to_string(&dropped).unwrap().contains("quick brown fox"));
}

#[test]
fn config_file_supplies_paths() {
    let w = Work::new();
    let data = w.write("data.jsonl", DATASET);
    let out_path = w.path("out.jsonl");
    let cfg =
        w.write("aps.toml", &format!("concurrency = 2\n[paths]\ninput = {:?}\noutput = {:?}\n", data, s(&out_path)));
    assert_eq!(aps(&["baseline", "--config", &cfg]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out_path).unwrap().lines().count(), 3);
    let bad = w.write("bad.toml", "concurrency = \"many\"\n");
    assert_eq!(aps(&["baseline", "--config", &bad]).status.code(), Some(2));
}
