use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use softhebb::idx::{encode_images, encode_labels};
use softhebb::manifest::RunManifest;
use softhebb::tables::read_metrics;

const BIN: &str = env!("CARGO_BIN_EXE_softhebb");
const SIDE: usize = 6;

/// Three classes of 6×6 images: a bright horizontal bar in rows 0–1, 2–3 or
/// 4–5 over a dim background, with a small deterministic jitter.
fn write_fixture(dir: &Path, count: usize, offset: u64, prefix: &str) {
    let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ offset;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let c = i % 3;
        labels.push(c as u8);
        for r in 0..SIDE {
            for _ in 0..SIDE {
                let base: u64 = if r / 2 == c { 200 } else { 20 };
                pixels.push((base + next() % 40) as u8);
            }
        }
    }
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), encode_images(SIDE, SIDE, &pixels)).unwrap();
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), encode_labels(&labels)).unwrap();
}

struct Workspace {
    _tmp: tempfile::TempDir,
    data: PathBuf,
    out: PathBuf,
}

fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_fixture(&data.join("mnist"), 300, 1, "train");
    write_fixture(&data.join("mnist"), 60, 2, "t10k");
    let out = tmp.path().join("runs");
    Workspace { _tmp: tmp, data, out }
}

fn run(ws: &Workspace, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(&ws.out)
        .env("SOFTHEBB_DATA_DIR", &ws.data)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\n{}", o.status, String::from_utf8_lossy(&o.stderr));
}

const SMALL: &[&str] = &["--k", "6", "--seed", "0,1", "--set", "model.init=\"random-samples\"", "--set", "model.bias_mode=\"disabled\""];

fn with(extra: &[&'static str]) -> Vec<&'static str> {
    SMALL.iter().copied().chain(extra.iter().copied()).collect()
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let ws = workspace();
    let o = run(&ws, &["train-everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`experiment`"));

    let o = run(&ws, &["eval", "--set", "readout.learning_rate=0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`readout.learning_rate`"));

    let o = run(&ws, &["eval", "--k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`model.k`"));

    let o = run(&ws, &["eval", "--set", "data.test_labels=\"/nonexistent/labels\""]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`data.test_labels`"));
}

#[test]
fn summary_matches_per_seed_csvs_and_rerun_is_bitwise() {
    let ws = workspace();
    let o = run(&ws, &with(&["eval"]));
    ok(&o);
    let dir = ws.out.join("eval");
    let m = RunManifest::load(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.failed_seeds(), 0);
    assert_eq!(m.config["model.k"].source, "cli");
    assert_eq!(m.config["readout.lr"].source, "default");
    assert_eq!(m.inputs.len(), 4);
    assert!(m.inputs.iter().all(|d| d.sha256.len() == 64));

    // aggregate statistics from the per-seed CSVs
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in &m.seeds {
        for row in read_metrics(&dir.join(format!("seed-{}", s.seed)).join("metrics.csv")).unwrap() {
            assert_eq!(row.seed, s.seed);
            by_metric.entry(row.metric).or_default().push(row.value);
        }
    }
    assert_eq!(by_metric.keys().collect::<Vec<_>>(), m.summary.keys().collect::<Vec<_>>());
    for (k, v) in &by_metric {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((m.summary[k].mean - mean).abs() < 1e-12, "{k}");
        assert!((m.summary[k].std - std).abs() < 1e-12, "{k}");
    }
    assert!(m.summary["one_layer_accuracy"].mean > 0.9, "{:?}", m.summary);

    // the snapshot config alone reproduces every metric
    let snapshot = dir.join(&m.config_file);
    let again = ws.out.join("again");
    let o = Command::new(BIN)
        .args(["eval", "--config"])
        .arg(&snapshot)
        .args(["--out"])
        .arg(&again)
        .output()
        .unwrap();
    ok(&o);
    let m2 = RunManifest::load(&again.join("eval/manifest.json")).unwrap();
    for (a, b) in m.seeds.iter().zip(&m2.seeds) {
        let bits = |s: &softhebb::manifest::SeedRecord| s.metrics.iter().map(|(k, v)| (k.clone(), v.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(fs::read(dir.join("seed-1/layer.shwl")).unwrap(), fs::read(again.join("eval/seed-1/layer.shwl")).unwrap());
}

#[test]
fn every_experiment_runs_on_the_fixture() {
    let ws = workspace();
    let common = with(&["--set", "mlp.hidden=16", "--set", "readout.epochs=5", "--set", "attack.samples=20", "--set", "attack.steps=5", "--set", "posthoc.test_interval=50"]);
    for e in ["train-softhebb", "train-hardwta", "train-mlp", "train-readout", "label-neurons", "posthoc-xent", "noise-eval", "interpolate"] {
        let mut args = vec![e];
        args.extend(&common);
        let o = run(&ws, &args);
        ok(&o);
        let m = RunManifest::load(&ws.out.join(e).join("manifest.json")).unwrap();
        assert_eq!(m.failed_seeds(), 0, "{e}");
        assert!(!m.summary.is_empty(), "{e}");
    }
    let mut args = vec!["attack", "--set", "attack.target=\"mlp\""];
    args.extend(&common);
    ok(&run(&ws, &args));
    let m = RunManifest::load(&ws.out.join("attack/manifest.json")).unwrap();
    assert!(m.seeds[0].outputs.iter().any(|p| p.ends_with("robustness.svg")));
    assert!(m.seeds[0].outputs.iter().any(|p| p.starts_with("seed-0/attack")));

    let m = RunManifest::load(&ws.out.join("posthoc-xent/manifest.json")).unwrap();
    assert_eq!(m.summary["replay_verified"].mean, 1.0);
    let svg = fs::read_to_string(ws.out.join("posthoc-xent/seed-0/loss_trace.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">step</text>"));

    // verify-theory needs no dataset
    let o = Command::new(BIN)
        .args(["verify-theory", "--seed", "0", "--set", "theory.samples=5000", "--set", "theory.activations=[\"base-exp\"]", "--out"])
        .arg(&ws.out)
        .env("SOFTHEBB_DATA_DIR", "/nonexistent")
        .output()
        .unwrap();
    ok(&o);
    let m = RunManifest::load(&ws.out.join("verify-theory/manifest.json")).unwrap();
    assert_eq!(m.summary["base-exp-1000.matched"].mean, 1.0);

    // re-rendering from the manifest
    let o = Command::new(BIN).arg("plot").arg(ws.out.join("noise-eval/manifest.json")).output().unwrap();
    ok(&o);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
    let o = Command::new(BIN).arg("plot").arg(ws.out.join("train-mlp/manifest.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn a_failing_seed_does_not_stop_the_batch() {
    let ws = workspace();
    // sample 100 is outside the 60-image test set: every seed fails, the
    // manifest is still written and the exit code is 3
    let mut args = vec!["interpolate", "--set", "interpolate.sample=100"];
    args.extend(SMALL);
    let o = run(&ws, &args);
    assert_eq!(o.status.code(), Some(3));
    let m = RunManifest::load(&ws.out.join("interpolate/manifest.json")).unwrap();
    assert_eq!(m.failed_seeds(), 2);
    assert!(m.seeds[0].error.as_deref().unwrap().contains("interpolate.sample"));
}

#[test]
fn plot_golden_file() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let m = RunManifest::load(&fixtures.join("posthoc/manifest.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path();
    fs::create_dir_all(run_dir.join("seed-0")).unwrap();
    fs::copy(fixtures.join("posthoc/seed-0/loss_trace.csv"), run_dir.join("seed-0/loss_trace.csv")).unwrap();
    let made = softhebb::experiments::emit_plots(&m, run_dir).unwrap();
    assert_eq!(made, vec![PathBuf::from("seed-0/loss_trace.svg")]);
    let svg = fs::read_to_string(run_dir.join(&made[0])).unwrap();
    let golden = fs::read_to_string(fixtures.join("posthoc/loss_trace.golden.svg")).unwrap();
    assert_eq!(svg, golden);
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">running_loss_smoothed, test_loss</text>"));
}
