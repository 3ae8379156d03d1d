mod common;

use std::path::Path;

use common::{run_chain, run_raw, rerun_differences};

#[test]
fn every_command_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = run_chain(tmp.path());
    assert_eq!(chain.runs.len(), 7);
    let diffs = rerun_differences(&chain);
    assert!(diffs.is_empty(), "{diffs:#?}");
}

#[test]
fn chain_outputs_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = run_chain(tmp.path());
    let dir = |name: &str| chain.runs.iter().find(|r| r.0 == name).unwrap().1.clone();

    let audit = std::fs::read_to_string(dir("hpo").join("audit.csv")).unwrap();
    // Header plus one row per evaluated config: P initial + iterations.
    assert_eq!(audit.lines().count(), 1 + 3 + 2);

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir("train-eval").join("report.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert!(text.contains("\"sim\"") && text.contains("\"ascan\""), "{text}");

    for (name, d, _) in &chain.runs {
        let record: serde_json::Value =
            serde_json::from_slice(&std::fs::read(d.join("run.json")).unwrap()).unwrap();
        assert_eq!(record["command"], *name);
        for out in record["outputs"].as_array().unwrap() {
            assert!(d.join(out.as_str().unwrap()).exists(), "{name}: {out}");
        }
    }
}

#[test]
fn bad_invocations_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run_raw(Path::new("/nonexistent/pipeline.toml"), "generate", &[]);
    assert_eq!(missing.status.code(), Some(2));

    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nworkdir = \"/nonexistent/dir\"\n").unwrap();
    assert_eq!(run_raw(&cfg, "generate", &[]).status.code(), Some(2));

    std::fs::write(&cfg, format!("seed = 1\nworkdir = {:?}\n", tmp.path().to_str().unwrap())).unwrap();
    assert_eq!(run_raw(&cfg, "synth", &[]).status.code(), Some(2));
    assert_eq!(run_raw(&cfg, "generate", &["cnn.batch_size=0".into()]).status.code(), Some(2));
    assert_eq!(run_raw(&cfg, "generate", &["phantom.colour=1".into()]).status.code(), Some(2));
}
