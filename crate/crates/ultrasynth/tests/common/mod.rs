#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Small study so the whole chain runs in seconds.
pub const BASE_CONFIG: &str = r#"
seed = 7

[phantom]
diameters_mm = [6.0]
depths_mm = [3.0]

[analog]
clean_volumes = 1
windows_per_volume = 5

[cnn]
n_fc_layers = 1
n_conv_layers = 2
channel_ratio = 2
batch_size = 16
epochs = 2

[eval]
n_runs = 2

[hpo]
population = 3
sample_size = 2
iterations = 2
k_splits = 1
space.domains = [
  ["n_fc_layers", {kind = "int_range", lo = 1, hi = 2}],
  ["n_conv_layers", {kind = "int_range", lo = 1, hi = 2}],
  ["channel_ratio", {kind = "int_range", lo = 1, hi = 2}],
  ["batch_size", {kind = "categorical", values = [32.0, 64.0]}],
  ["early_stop", {kind = "int_range", lo = 0, hi = 0}],
  ["learning_rate", {kind = "continuous", lo = 1e-3, hi = 0.1, log = true}],
  ["momentum", {kind = "continuous", lo = 0.0, hi = 0.9, log = false}],
  ["epochs", {kind = "int_range", lo = 1, hi = 2}],
]

[explain]
max_images = 2

[golden]
n_random = 3
"#;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ultrasynth")
}

pub fn run_raw(config: &Path, command: &str, sets: &[String]) -> Output {
    let mut c = Command::new(bin());
    c.arg(command).arg("--config").arg(config);
    for s in sets {
        c.arg("--set").arg(s);
    }
    c.output().expect("binary runs")
}

/// Runs a command and returns the run directory it prints.
pub fn run(config: &Path, command: &str, sets: &[String]) -> PathBuf {
    let out = run_raw(config, command, sets);
    assert!(
        out.status.success(),
        "{command} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

fn toml_path(p: &Path) -> String {
    format!("{:?}", p.to_str().unwrap())
}

fn toml_paths(ps: &[PathBuf]) -> String {
    let inner: Vec<String> = ps.iter().map(|p| toml_path(p)).collect();
    format!("[{}]", inner.join(", "))
}

/// The run directory of every command in one pass over the pipeline.
#[derive(Debug)]
pub struct Chain {
    pub config: PathBuf,
    pub runs: Vec<(&'static str, PathBuf, Vec<String>)>,
}

/// Writes `BASE_CONFIG` into `workdir` and runs all seven commands in
/// dependency order.
pub fn run_chain(workdir: &Path) -> Chain {
    let config = workdir.join("pipeline.toml");
    std::fs::write(
        &config,
        format!("workdir = {}\n{BASE_CONFIG}", toml_path(workdir)),
    )
    .unwrap();
    let mut runs = Vec::new();
    let mut step = |name: &'static str, sets: Vec<String>| {
        let dir = run(&config, name, &sets);
        runs.push((name, dir.clone(), sets));
        dir
    };
    let g = step("generate", vec![]);
    let f = step(
        "fit-noise",
        vec![
            format!("noise.volumes={}", toml_path(&g.join("noise-volumes"))),
            format!("noise.clean_datasets={}", toml_paths(&[g.join("exp-clean-train")])),
        ],
    );
    let s = step(
        "synth",
        vec![format!("noise.model={}", toml_path(&f.join("noise-model.json")))],
    );
    let h = step(
        "hpo",
        vec![format!(
            "hpo.data={}",
            toml_paths(&[g.join("exp-defect"), g.join("exp-clean-train")])
        )],
    );
    let t = step(
        "train-eval",
        vec![
            format!("eval.cnn_file={}", toml_path(&h.join("best.json"))),
            format!(
                "eval.experiments=[{{name = \"sim\", train = {}}}, {{name = \"ascan\", train = {}}}]",
                toml_paths(&[g.join("sim-defect"), g.join("sim-clean")]),
                toml_paths(&[s.join("synth-ascan-noise"), g.join("sim-clean")]),
            ),
            format!("eval.test={}", toml_paths(&[g.join("exp-defect"), g.join("exp-clean-test")])),
        ],
    );
    step(
        "explain",
        vec![
            format!("explain.checkpoint={}", toml_path(&t.join("model-ascan.ckpt"))),
            format!("explain.dataset={}", toml_path(&g.join("exp-defect"))),
        ],
    );
    step("golden", vec![]);
    drop(step);
    Chain { config, runs }
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Re-runs every command of `chain` and lists the files whose bytes
/// changed, appeared or vanished.
pub fn rerun_differences(chain: &Chain) -> Vec<String> {
    let mut diffs = Vec::new();
    for (name, dir, sets) in &chain.runs {
        let before = snapshot(dir);
        let again = run(&chain.config, name, sets);
        if &again != dir {
            diffs.push(format!("{name}: run dir {} became {}", dir.display(), again.display()));
            continue;
        }
        let after = snapshot(dir);
        for (path, bytes) in &before {
            if after.get(path) != Some(bytes) {
                diffs.push(format!("{name}: {} differs", path.display()));
            }
        }
        for path in after.keys().filter(|p| !before.contains_key(*p)) {
            diffs.push(format!("{name}: {} appeared", path.display()));
        }
    }
    diffs
}
