use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn potlab(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_potlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(dir: &TempDir, config: &Path, out: &str) -> (Output, PathBuf) {
    let out_dir = dir.path().join(out);
    let o = potlab(&[Path::new("run"), config, Path::new("--out"), &out_dir]);
    (o, out_dir)
}

fn summary(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("summary.toml")).unwrap().parse().unwrap()
}

fn result_f64(t: &toml::Table, key: &str) -> f64 {
    t["results"][key].as_float().unwrap()
}

const CAPACITY: &str = r#"
command = "capacity"
seed = 1
[capacity]
centre = [0.0, 0.0]
radius = 0.1
"#;

const LEMMA8: &str = r#"
command = "lemma8"
seed = 1
[[lemma8.discs]]
centre = [0.0, 0.0]
radius = 1e-8
[[lemma8.discs]]
centre = [0.2, 0.0]
radius = 1e-8
[[lemma8.discs]]
centre = [0.0, 0.2]
radius = 1e-8
[[lemma8.discs]]
centre = [0.2, 0.2]
radius = 1e-8
"#;

#[test]
fn capacity_of_small_disc_matches_log_formula() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cap.toml", CAPACITY);
    let (o, out) = run(&dir, &cfg, "out");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    let expected = 1.0 / 10f64.ln();
    let cap = result_f64(&s, "capacity");
    assert!((cap - expected).abs() / expected < 0.03, "capacity {cap}");
    let hash = s["provenance"]["config_sha256"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(s["provenance"]["library_version"].as_str(), Some(potlab::VERSION));
    for name in ["weights.csv", "weights.dat"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with(&format!("# config_sha256 = {hash}\n")), "{name}");
    }
    let listed = s["outputs"]["tables"].as_array().unwrap();
    assert_eq!(listed[0].as_str(), Some("weights.csv"));
}

#[test]
fn cantor_generation_three_has_64_atoms() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cantor.toml",
        r#"
command = "cantor"
seed = 1
[cantor]
family = { family = "beta", beta = 0.0 }
generation = 3
"#,
    );
    let (o, out) = run(&dir, &cfg, "out");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mu = potlab::measures::io::load(out.join("measure.json")).unwrap();
    assert_eq!(mu.len(), 64);
    assert!((mu.total_mass() - 1.0).abs() < 1e-12);
    assert_eq!(summary(&out)["results"]["atoms"].as_integer(), Some(64));
}

#[test]
fn lemma8_four_discs_keep_half_the_capacity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "l8.toml", LEMMA8);
    let (o, out) = run(&dir, &cfg, "out");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ratio = result_f64(&summary(&out), "ratio");
    assert!(ratio >= 0.5, "ratio {ratio}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "pv.toml",
        r#"
command = "pv-sweep"
seed = 5
[measure]
kind = "cantor"
family = { family = "beta", beta = 2.0 }
generation = 6
[ladder]
kind = "generations"
from = 1
to = 5
[points]
kind = "sample_atoms"
count = 3
"#,
    );
    let (a, out_a) = run(&dir, &cfg, "a");
    let (b, out_b) = run(&dir, &cfg, "b");
    assert!(a.status.success() && b.status.success());
    let mut names: Vec<_> = fs::read_dir(&out_a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3);
    for name in names {
        assert_eq!(fs::read(out_a.join(&name)).unwrap(), fs::read(out_b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn validate_reports_estimates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "eq.toml",
        r#"
command = "equilibrium"
seed = 1
[measure]
kind = "square"
centre = [0.0, 0.0]
side = 0.7
cells_per_side = 20
"#,
    );
    let o = potlab(&[Path::new("validate"), &cfg]);
    assert!(o.status.success());
    let report: toml::Table = String::from_utf8(o.stdout).unwrap().parse().unwrap();
    assert_eq!(report["status"].as_str(), Some("ok"));
    let est = &report["estimates"].as_array().unwrap()[0];
    assert_eq!(est["atoms"].as_float(), Some(400.0));
    assert_eq!(est["memory_bytes"].as_float(), Some(400.0 * 3.0 * 8.0));
}

#[test]
fn gauge_violation_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    // Φ(r) = r^2.5 has Φ(2r)/Φ(r) = 2^2.5 > 4.
    let cfg = write_config(
        &dir,
        "gauge.toml",
        r#"
command = "cantor"
seed = 1
[cantor]
family = { family = "gauge", gauge = { kind = "power", s = 2.5 } }
generation = 3
"#,
    );
    let o = potlab(&[Path::new("validate"), &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let doc: toml::Table = String::from_utf8(o.stderr).unwrap().parse().unwrap();
    assert_eq!(doc["error"]["kind"].as_str(), Some("config"));
    assert!(doc["error"]["message"].as_str().unwrap().contains("r ="));
}

#[test]
fn oversized_thm7_measure_names_the_block_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "thm7.toml",
        r#"
command = "equilibrium"
seed = 1
[measure]
kind = "counterexample"
construction = "thm7"
family = { family = "beta", beta = 0.0 }
levels = [[2, 12]]
"#,
    );
    let o = potlab(&[Path::new("validate"), &cfg]);
    assert_eq!(o.status.code(), Some(4));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("4^(2N_2)"), "{stderr}");

    let (o, out) = run(&dir, &cfg, "out");
    assert_eq!(o.status.code(), Some(4));
    let doc: toml::Table = fs::read_to_string(out.join("error.toml")).unwrap().parse().unwrap();
    assert_eq!(doc["error"]["kind"].as_str(), Some("budget"));
    assert_eq!(doc["error"]["exit_code"].as_integer(), Some(4));
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [
        ("noseed.toml", "command = \"lemma8\"\n[lemma8]\ndiscs = []\n"),
        ("unknown.toml", "command = \"capacity\"\nseed = 1\ncolour = 3\n"),
        ("missing.toml", "command = \"capacity\"\nseed = 1\n"),
        ("negative.toml", "command = \"capacity\"\nseed = 1\n[tolerances]\nsolver = -1.0\n"),
        (
            "nofile.toml",
            "command = \"equilibrium\"\nseed = 1\n[measure]\nkind = \"file\"\npath = \"absent.json\"\n",
        ),
    ] {
        let cfg = write_config(&dir, name, text);
        let o = potlab(&[Path::new("validate"), &cfg]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let (o, out) = run(&dir, &cfg, &format!("{name}.out"));
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(out.join("error.toml").is_file(), "{name}");
    }
}

#[test]
fn measure_files_resolve_relative_to_the_config() {
    let dir = TempDir::new().unwrap();
    let cantor = write_config(
        &dir,
        "cantor.toml",
        r#"
command = "cantor"
seed = 1
[cantor]
family = { family = "beta", beta = 0.0 }
generation = 2
"#,
    );
    let (o, out) = run(&dir, &cantor, "gen");
    assert!(o.status.success());
    assert!(out.join("measure.json").is_file());
    let eq = write_config(
        &dir,
        "eq.toml",
        "command = \"equilibrium\"\nseed = 1\n[measure]\nkind = \"file\"\npath = \"gen/measure.json\"\n",
    );
    let o = potlab(&[Path::new("validate"), &eq]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: toml::Table = String::from_utf8(o.stdout).unwrap().parse().unwrap();
    assert_eq!(report["estimates"][0]["atoms"].as_float(), Some(16.0));
}

#[test]
fn shipped_example_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = potlab(&[Path::new("validate"), &path]);
            assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            count += 1;
        }
    }
    assert!(count >= 9);
}
