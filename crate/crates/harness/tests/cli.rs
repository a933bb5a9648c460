//! End-to-end CLI runs on the shipped configs and on small temporary ones.

use std::path::PathBuf;

use uepmm::cli::run;
use uepmm::output::read_csv;
use uepmm::ExperimentConfig;
use uepmm_core::coding::Family;
use uepmm_core::tensor::BlockPartition;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn invoke(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["uepmm"];
    full.extend_from_slice(args);
    let code = run(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn small_config(dir: &tempfile::TempDir) -> PathBuf {
    let mut cfg = ExperimentConfig::three_tier_rxc();
    cfg.partition = BlockPartition::rxc(3, 3, 3, 5, 3).unwrap();
    cfg.code.workers = 12;
    cfg.trials = 100;
    cfg.times = Some(vec![0.0, 0.5, 1.5]);
    let path = dir.path().join("small.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn shipped_configs_parse_and_match_presets() {
    let load = |name: &str| ExperimentConfig::load(&config_dir().join(name)).unwrap();
    assert_eq!(load("three_tier_rxc.json"), ExperimentConfig::three_tier_rxc());
    assert_eq!(load("three_tier_cxr.json"), ExperimentConfig::three_tier_cxr());
    for name in [
        "three_tier_rxc_ew.json",
        "three_tier_rxc_mds.json",
        "three_tier_rxc_rep2.json",
        "three_tier_cxr_ew.json",
    ] {
        load(name).resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert_eq!(load("three_tier_rxc_rep2.json").code.family, Family::Repetition { k: 2 });
}

#[test]
fn analyze_decode_prob_csv() {
    let cfg = config_dir().join("three_tier_rxc.json");
    let (code, text) = invoke(&["analyze", "decode-prob", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.starts_with("t,scheme,partition,metric,value\n"));
    assert!(text.contains("\n3,now,rxc,decode_prob_class_1,0.064\n"));
    assert!(text.contains("\n4,now,rxc,decode_prob_class_1,0.1792\n"));
    assert_eq!(read_csv(text.as_bytes()).unwrap().len(), 31 * 3);
}

#[test]
fn analyze_loss_json_mirrors_csv() {
    let cfg = config_dir().join("three_tier_cxr.json");
    let path = cfg.to_str().unwrap();
    let (c1, csv) = invoke(&["analyze", "loss", "--config", path, "--times", "0,0.45"]);
    let (c2, json) = invoke(&["analyze", "loss", "--config", path, "--times", "0,0.45", "--format", "json"]);
    assert_eq!((c1, c2), (0, 0));
    let from_csv = read_csv(csv.as_bytes()).unwrap();
    let from_json: Vec<uepmm::Record> = serde_json::from_str(&json).unwrap();
    assert_eq!(from_csv, from_json);
    assert!(csv.contains("\n0,now,cxr,bound,9\n"));
}

#[test]
fn simulate_writes_file_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir);
    let out = dir.path().join("a.csv");
    let args = |out: &str, threads: &str| {
        vec!["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7", "--output", out, "--threads", threads]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let a: Vec<String> = args(out.to_str().unwrap(), "1");
    let (code, stdout) = invoke(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let out2 = dir.path().join("b.csv");
    let b: Vec<String> = args(out2.to_str().unwrap(), "3");
    assert_eq!(invoke(&b.iter().map(String::as_str).collect::<Vec<_>>()).0, 0);
    let (x, y) = (std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());
    assert_eq!(x, y);
    let recs = read_csv(x.as_slice()).unwrap();
    assert_eq!(recs.len(), 3 * 4);
    assert_eq!(recs[0].value, 1.0);
}

#[test]
fn sweep_labels_each_value() {
    let cfg = config_dir().join("three_tier_rxc_mds.json");
    let (code, text) = invoke(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--param", "rate", "--values", "0.5,2", "--times", "0.45",
    ]);
    assert_eq!(code, 0, "{text}");
    let recs = read_csv(text.as_bytes()).unwrap();
    assert!(recs.iter().any(|r| r.scheme == "mds@rate=0.5"));
    assert!(recs.iter().any(|r| r.scheme == "mds@rate=2"));
    let loss = |s: &str| recs.iter().find(|r| r.scheme == s && r.metric == "normalized_loss").unwrap().value;
    assert!(loss("mds@rate=2") < loss("mds@rate=0.5"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(invoke(&["analyze", "loss", "--config", missing.to_str().unwrap()]).0, 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"partition\": 3}").unwrap();
    assert_eq!(invoke(&["analyze", "loss", "--config", bad.to_str().unwrap()]).0, 2);

    let cfg = small_config(&dir);
    let p = cfg.to_str().unwrap();
    assert_eq!(invoke(&["analyze", "loss", "--config", p, "--workers", "0"]).0, 2);
    assert_eq!(invoke(&["simulate", "--config", p, "--trials", "0"]).0, 2);
    assert_eq!(invoke(&["sweep", "--config", p, "--param", "omega", "--values", "x"]).0, 2);
    assert_eq!(invoke(&["frobnicate"]).0, 2);

    let rep = config_dir().join("three_tier_rxc_rep2.json");
    assert_eq!(invoke(&["analyze", "decode-prob", "--config", rep.to_str().unwrap()]).0, 2);

    let unwritable = dir.path().join("no/such/dir/out.csv");
    assert_eq!(invoke(&["analyze", "loss", "--config", p, "--output", unwritable.to_str().unwrap()]).0, 1);
}
