use std::fs;
use std::path::Path;
use std::process::Command;

const SMOKE: &str = r#"
name = "smoke"
seeds = [1]

[dataset]
n_train = 200
n_reference = 40
seed = 4
source = { kind = "gaussian", height = 8, width = 8, mean = 0.1, ramp = 0.6, var = 0.1 }

[schedule]
steps = 20
beta_start = 0.001
beta_end = 0.3

[arch]
widths = [4, 8]
time_dim = 8
groups = 2

[train]
epochs = 5
batch_size = 20
learning_rate = 0.002

[sample]
count = 24
stride = 2

[eval]
extractor = { kind = "random_projection", dim = 6, seed = 3 }
kid_subset_size = 10
kid_subsets = 5
spectral_bins = 4

[spectrum]
timesteps = [0, 10, 19]
n_bins = 4
count = 16
"#;

fn freqdiff(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_freqdiff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn train_sample_eval_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let out = out.to_str().unwrap();
        for cmd in ["train", "sample", "eval"] {
            let o = freqdiff(&[cmd, "--config", &cfg, "--out", out]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for name in ["checkpoint_s1.fdck", "loss_s1.csv", "samples_s1.fdnf", "samples_s1.pgm", "metrics.csv", "results.toml", "config.toml"] {
        assert!(out_a.join(name).exists(), "{name} missing");
    }
    let loss = fs::read_to_string(out_a.join("loss_s1.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("epoch,loss"));
    assert_eq!(loss.lines().count(), 6);
    for name in ["loss_s1.csv", "metrics.csv", "samples_s1.fdnf", "checkpoint_s1.fdck"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
    assert!(fs::read_to_string(out_a.join("results.toml")).unwrap().contains("[[evaluation]]"));
}

#[test]
fn seed_flag_and_single_gamma_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMOKE}\n[sweep]\ngammas = [0.5]\n");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("sweep");
    let o = freqdiff(&["sweep-gamma", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "1", "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("sweep_gamma.csv")).unwrap();
    let kinds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(kinds, ["run", "run", "aggregate"]);
}

#[test]
fn spectrum_command_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out = dir.path().join("spec");
    let o = freqdiff(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t,bin,center,power,count"));
    assert_eq!(text.lines().count(), 1 + 3 * 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "name = \"x\"\nseeds = []\n");
    assert_eq!(freqdiff(&["train", "--config", &bad]).status.code(), Some(2));
    assert_eq!(freqdiff(&["train"]).status.code(), Some(2));
    assert_eq!(freqdiff(&["frobnicate"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), SMOKE);
    let o = freqdiff(&["sample", "--config", &cfg, "--out", dir.path().join("none").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = freqdiff(&["train", "--config", &cfg, "--stride", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
