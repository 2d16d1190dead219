use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvsense::dataset::{read_points, sample_dir, write_points};
use mvsense::metrics::Summary;
use mvsense::tensor::{write_tensor, Tensor};

fn mvsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvsense"))
        .args(args)
        .env_remove("MVSENSE_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(root: &Path, extra: &[&str]) -> PathBuf {
    let out = root.join("ds");
    let mut args = vec![
        "gen-dataset", "--out", path(&out), "--samples", "10", "--grid", "10", "--bs", "2", "--ue", "2", "--points", "64",
        "--seed", "5",
    ];
    args.extend_from_slice(extra);
    let o = mvsense(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

/// Every regular file under `dir`, relative path and contents, sorted.
fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "resolved_config.toml" && p.file_name().unwrap() != "timings.csv" {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_dataset_writes_manifest_and_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path(), &[]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ds.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["num_samples"], 10);
    assert_eq!(manifest["config"]["resolution"], 10);
    assert_eq!(manifest["config"]["kind"], "mnist");
    assert!(ds.join("resolved_config.toml").exists());
    assert!(sample_dir(&ds, 9).join("csi.bin").exists());
}

#[test]
fn dataset_flag_switches_generator() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path(), &["--dataset", "multi-obj"]);
    let manifest = std::fs::read_to_string(ds.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"kind\": \"multi-obj\""));
    let meta = std::fs::read_to_string(sample_dir(&ds, 0).join("meta.json")).unwrap();
    assert!(meta.contains("\"label\": null"));
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let o = mvsense(&["gen-dataset", "--samples", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_method_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path(), &[]);
    let out = tmp.path().join("r");
    let o = mvsense(&["reconstruct", "--data", path(&ds), "--out", path(&out), "--method", "art"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_evaluation_input_fails_at_run_time() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ev");
    assert_eq!(mvsense(&["eval", "--out", path(&out)]).status.code(), Some(3));
}

#[test]
fn seeded_generation_and_noiseless_reconstruction_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ds_a = small_dataset(a.path(), &["--snr", "10", "--pilots", "4"]);
    let ds_b = small_dataset(b.path(), &["--snr", "10", "--pilots", "4"]);
    assert_eq!(tree(&ds_a), tree(&ds_b));
    for (root, ds) in [(a.path(), &ds_a), (b.path(), &ds_b)] {
        let out = root.join("rec");
        let o = mvsense(&[
            "reconstruct", "--data", path(ds), "--out", path(&out), "--method", "bim", "--noiseless", "--iters", "1",
            "--split", "train", "--limit", "2",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ra, rb) = (tree(&a.path().join("rec")), tree(&b.path().join("rec")));
    assert!(ra.iter().any(|(p, _)| p.ends_with("sample_000001.eps_r.bin")));
    assert!(ra.iter().any(|(p, _)| p.ends_with("records.csv")));
    assert_eq!(ra, rb);
}

#[test]
fn eval_merges_baseline_records_and_prediction_files() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path(), &[]);
    let rec = tmp.path().join("rec");
    let o = mvsense(&[
        "reconstruct", "--data", path(&ds), "--out", path(&rec), "--method", "bim-cs", "--snr", "20", "--pilots", "8",
        "--iters", "1", "--views", "1x2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // a stand-in for learning-component output: the ground truth itself
    let pred = tmp.path().join("oracle");
    std::fs::create_dir(&pred).unwrap();
    let test_ids = 9..10;
    for id in test_ids.clone() {
        let truth = read_points(&sample_dir(&ds, id).join("points.bin")).unwrap();
        write_points(&pred.join(format!("sample_{id:06}.points.bin")), &truth).unwrap();
    }
    let latents = tmp.path().join("latents.bin");
    write_tensor(&latents, &Tensor::f64(vec![1, 5], vec![0.1, 0.2, 7.0, 1.5, 0.01]).unwrap()).unwrap();

    let ev = tmp.path().join("ev");
    let o = mvsense(&[
        "eval", "--data", path(&ds), "--records", path(&rec.join("records.csv")), "--predictions", path(&pred),
        "--latents", path(&latents), "--out", path(&ev),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(ev.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.methods.len(), 2);
    let oracle = summary.method("oracle").unwrap();
    assert_eq!(oracle.zero_cd, test_ids.len());
    assert_eq!(summary.method("bim-cs").unwrap().count, test_ids.len());
    assert!(ev.join("cdf_oracle.csv").exists() && ev.join("cdf_bim-cs.csv").exists());
    let grid = std::fs::read_to_string(ev.join("view_grid.csv")).unwrap();
    assert!(grid.starts_with("method,B4_U8,B8_U16,B16_U32"));
    let table = std::fs::read_to_string(ev.join("latents_latents.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "sample_id,label,eps_r,sigma,z0,z1");
    assert_eq!(table.lines().nth(1).unwrap(), "9,7,1.5,0.01,0.1,0.2");
    // runtimes come back from the sibling timings file
    let merged = std::fs::read_to_string(ev.join("records.csv")).unwrap();
    assert!(merged.lines().skip(1).any(|l| l.starts_with("9,bim-cs") && !l.contains(",0.0,")));
}

#[test]
fn latent_table_must_match_the_split() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(tmp.path(), &[]);
    let latents = tmp.path().join("bad.bin");
    write_tensor(&latents, &Tensor::f64(vec![3, 5], vec![0.0; 15]).unwrap()).unwrap();
    let o = mvsense(&["eval", "--data", path(&ds), "--latents", path(&latents), "--out", path(&tmp.path().join("ev"))]);
    assert_eq!(o.status.code(), Some(3));
}
