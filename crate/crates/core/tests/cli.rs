// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end runs of the `diffconcepts` binary.

#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffconcepts::tensor_io::{self, ActivationMatrix, Attribute, LabelTable};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_diffconcepts"));
    c.env_remove("DC_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn diffconcepts")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// A small planted dataset: 1500 × 16 with 8 concepts, 4 of them labelled.
fn dataset() -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "synth",
        "--seed",
        "3",
        "--n-samples",
        "1500",
        "--dim",
        "16",
        "--out",
        p(&data),
    ]);
    (dir, data.join("acts.npy"), data.join("labels.csv"))
}

fn extract(acts: &Path, out: &Path, k: &str, seed: &str) {
    ok(&[
        "extract",
        "--acts",
        p(acts),
        "--k",
        k,
        "--seed",
        seed,
        "--out",
        p(out),
    ]);
}

#[test]
fn synth_writes_loadable_interfaces() {
    let (dir, acts, labels) = dataset();
    let m = tensor_io::read_matrix(&acts).unwrap();
    assert_eq!((m.n_samples(), m.dim()), (1500, 16));
    let t = tensor_io::read_labels(&labels).unwrap();
    assert_eq!(t.attributes.len(), 4);
    assert_eq!(
        t.attribute("concept_2").unwrap().class_names,
        ["absent", "present"]
    );
    let dirs = tensor_io::read_matrix(dir.path().join("data/directions.npy")).unwrap();
    assert_eq!((dirs.n_samples(), dirs.dim()), (8, 16));
}

#[test]
fn extract_honours_shape_contract_and_is_reproducible() {
    let (dir, acts, _) = dataset();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    extract(&acts, &a, "12", "5");
    extract(&acts, &b, "12", "5");
    let dict = tensor_io::read_concepts(&a).unwrap();
    assert_eq!((dict.k(), dict.dim()), (12, 16));
    for r in dict.directions().rows() {
        let n: f32 = r.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-5);
    }
    let bytes = |d: &Path| std::fs::read(d.join(tensor_io::CONCEPTS_FILE)).unwrap();
    assert_eq!(bytes(&a), bytes(&b));

    let report = json_file(&a.join("report.json"));
    assert_eq!(report["command"], "extract");
    assert_eq!(report["config"]["k"], 12);
    assert_eq!(report["config"]["seed"], 5);
    assert_eq!(
        report["inputs"]["acts"]["sha256"],
        tensor_io::sha256_file(&acts).unwrap()
    );
    assert_eq!(report["results"]["k"], 12);
}

#[test]
fn missing_input_exits_2_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.npy");
    let out = run(&[
        "extract",
        "--acts",
        p(&missing),
        "--k",
        "4",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.npy"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn config_file_supplies_parameters_and_flags_win() {
    let (dir, acts, _) = dataset();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("o");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"acts": "{}", "k": 6, "seed": 1, "out": "{}"}}"#,
            p(&acts),
            p(&out)
        ),
    )
    .unwrap();
    ok(&["extract", "--config", p(&cfg), "--k", "5"]);
    assert_eq!(tensor_io::read_concepts(&out).unwrap().k(), 5);
    assert_eq!(json_file(&out.join("report.json"))["config"]["seed"], 1);

    std::fs::write(&cfg, r#"{"kk": 6}"#).unwrap();
    let bad = run(&["extract", "--config", p(&cfg)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn score_writes_n_by_k() {
    let (dir, acts, _) = dataset();
    let d = dir.path().join("d");
    extract(&acts, &d, "7", "0");
    let s = dir.path().join("scores.npy");
    ok(&["score", "--acts", p(&acts), "--dict", p(&d), "--out", p(&s)]);
    let m = tensor_io::read_matrix(&s).unwrap();
    assert_eq!((m.n_samples(), m.dim()), (1500, 7));
}

#[test]
fn probe_reports_per_attribute_and_compares_methods() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "synth",
        "--n-samples",
        "1500",
        "--dim",
        "16",
        "--label-concepts",
        "0,1,2,3,4,5,6,7",
        "--out",
        p(&data),
    ]);
    let (acts, labels) = (data.join("acts.npy"), data.join("labels.csv"));
    let (d1, d2) = (dir.path().join("d1"), dir.path().join("d2"));
    extract(&acts, &d1, "16", "0");
    ok(&[
        "lda",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--attribute",
        "concept_0",
        "--out",
        p(&d2),
    ]);
    let report = dir.path().join("probe.json");
    ok(&[
        "probe",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--dict",
        p(&d1),
        "--dict",
        p(&d2),
        "--out",
        p(&report),
    ]);
    let r = json_file(&report);
    let dicts = r["results"]["dictionaries"].as_array().unwrap();
    assert_eq!(dicts.len(), 2);
    let attrs = dicts[0]["attributes"].as_array().unwrap();
    assert_eq!(attrs.len(), 8);
    let loss = dicts[0]["median_probe_loss"].as_f64().unwrap();
    assert!(loss > 0.0 && loss < std::f64::consts::LN_2);
    assert!(r["results"]["comparison"]["wins"].is_array());
    assert!(r["inputs"].get("dict1/concepts.npy").is_some());
}

#[test]
fn probe_rejects_empty_attribute_list() {
    let (dir, acts, labels) = dataset();
    let d = dir.path().join("d");
    extract(&acts, &d, "4", "0");
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"attributes": []}"#).unwrap();
    let out = run(&[
        "probe",
        "--config",
        p(&cfg),
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--dict",
        p(&d),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(
        out.stderr
            .split(|&b| b == b'\n')
            .find(|l| l.starts_with(b"{"))
            .unwrap(),
    )
    .unwrap();
    assert_eq!(err["error"], "ConfigError");
}

#[test]
fn probe_table_output() {
    let (dir, acts, labels) = dataset();
    let d = dir.path().join("d");
    extract(&acts, &d, "8", "0");
    let out = ok(&[
        "probe",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--dict",
        p(&d),
        "--format",
        "table",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("dictionary") && header.ends_with("median"));
    assert!(header.contains("concept_3"));
}

#[test]
fn mppc_identical_seeds_is_one_with_significance() {
    let (_dir, acts, _) = dataset();
    let out = ok(&["mppc", "--acts", p(&acts), "--k", "8", "--seeds", "4,4"]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["results"]["pairs"][0]["mppc"].as_f64().unwrap(), 1.0);
    assert!(r["results"]["significance"]["log10_p"].as_f64().unwrap() < 0.0);
    assert_eq!(
        r["results"]["significance"]["threshold"].as_f64().unwrap(),
        0.3
    );
}

#[test]
fn mppc_between_two_dictionaries() {
    let (dir, acts, _) = dataset();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    extract(&acts, &a, "8", "0");
    extract(&acts, &b, "8", "1");
    let out = ok(&["mppc", "--acts", p(&acts), "--dict", p(&a), "--dict", p(&b)]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = r["results"]["mean_mppc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
    let one = run(&["mppc", "--acts", p(&acts), "--dict", p(&a)]);
    assert_eq!(one.status.code(), Some(2));
}

#[test]
fn ablate_with_one_concept_has_unit_effective_rank() {
    let (_dir, acts, labels) = dataset();
    let out = ok(&[
        "ablate",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--k",
        "1",
        "--no-sae",
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cells = r["results"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    for c in cells {
        assert!((c["effective_rank"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!(c["max_pairwise_cosine"].is_null());
    }
}

#[test]
fn ablate_includes_sae_rows() {
    let (_dir, acts, labels) = dataset();
    let out = ok(&[
        "ablate",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--k",
        "8",
        "--k-active",
        "2",
        "--sae-epochs",
        "2",
        "--sae-lr",
        "1e-3",
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cells = r["results"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    assert_eq!(cells[4]["method"], "topk-sae");
    assert_eq!(cells[5]["input"], "differences");
}

#[test]
fn topact_returns_nine_indices_per_concept() {
    let (dir, acts, _) = dataset();
    let d = dir.path().join("d");
    extract(&acts, &d, "5", "0");
    let out = ok(&["topact", "--acts", p(&acts), "--dict", p(&d)]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let top = r["results"]["top"].as_array().unwrap();
    assert_eq!(top.len(), 5);
    assert!(top.iter().all(|t| t.as_array().unwrap().len() == 9));
}

#[test]
fn lda_emits_one_direction_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let acts = dir.path().join("acts.npy");
    let labels = dir.path().join("labels.csv");
    let rows: Vec<Vec<f32>> = (0..90)
        .map(|i| {
            let c = (i % 3) as f32;
            vec![
                c * 3.0 + (i as f32 * 0.37).sin() * 0.2,
                (i as f32 * 0.91).cos() * 0.2,
                -c,
            ]
        })
        .collect();
    tensor_io::write_matrix(&ActivationMatrix::from_rows(&rows).unwrap(), &acts).unwrap();
    let style = Attribute {
        name: "style".into(),
        values: (0..90).map(|i| (i % 3) as u32).collect(),
        n_classes: 3,
        class_names: vec!["a".into(), "b".into(), "c".into()],
    };
    tensor_io::write_labels(&LabelTable::new(90, vec![style]).unwrap(), &labels).unwrap();
    let meta = json_file(&dir.path().join(tensor_io::LABELS_META_FILE));
    assert_eq!(meta["style"]["n_classes"], 3);
    let out = dir.path().join("lda");
    ok(&[
        "lda",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--attribute",
        "style",
        "--out",
        p(&out),
    ]);
    let dict = tensor_io::read_concepts(&out).unwrap();
    assert_eq!((dict.k(), dict.dim()), (3, 3));
}

#[test]
fn quadratic_refuses_large_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let acts = dir.path().join("wide.npy");
    let rows: Vec<Vec<f32>> = (0..8)
        .map(|i| (0..768).map(|j| ((i * 768 + j) as f32).sin()).collect())
        .collect();
    tensor_io::write_matrix(&ActivationMatrix::from_rows(&rows).unwrap(), &acts).unwrap();
    let out = run(&[
        "quadratic",
        "--acts",
        p(&acts),
        "--k",
        "2",
        "--out",
        p(&dir.path().join("q")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("768"));
}

#[test]
fn quadratic_round_trip_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "synth",
        "--n-samples",
        "300",
        "--dim",
        "6",
        "--out",
        p(&data),
    ]);
    let acts = data.join("acts.npy");
    let q = dir.path().join("q");
    ok(&[
        "quadratic",
        "--acts",
        p(&acts),
        "--k",
        "3",
        "--n-neighbors",
        "20",
        "--out",
        p(&q),
    ]);
    let a = tensor_io::read_matrix(q.join("quad_A.npy")).unwrap();
    assert_eq!((a.n_samples(), a.dim()), (3, 36));
    let out = ok(&[
        "probe",
        "--acts",
        p(&acts),
        "--labels",
        p(&data.join("labels.csv")),
        "--quadratic",
        p(&q),
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        r["results"]["dictionaries"][0]["method"],
        "quadratic-deleuzian"
    );
}

#[test]
fn sae_train_writes_model_and_dictionary() {
    let (dir, acts, labels) = dataset();
    let s = dir.path().join("sae");
    ok(&[
        "sae-train",
        "--acts",
        p(&acts),
        "--k",
        "8",
        "--k-active",
        "2",
        "--epochs",
        "1",
        "--lr",
        "1e-3",
        "--out",
        p(&s),
    ]);
    assert_eq!(tensor_io::read_concepts(&s).unwrap().k(), 8);
    let out = ok(&[
        "probe",
        "--acts",
        p(&acts),
        "--labels",
        p(&labels),
        "--sae",
        p(&s),
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["results"]["dictionaries"][0]["method"], "topk-sae");
}

#[test]
fn steer_applies_requests_from_json() {
    let (dir, acts, _) = dataset();
    let d = dir.path().join("d");
    extract(&acts, &d, "4", "0");
    let req = dir.path().join("req.json");
    std::fs::write(
        &req,
        r#"[{"concept_id": 1, "alpha": 2.5, "row_indices": [0, 7]},
            {"concept_id": 2, "alpha": "zero", "row_indices": [7]}]"#,
    )
    .unwrap();
    let out = dir.path().join("s");
    ok(&[
        "steer",
        "--acts",
        p(&acts),
        "--dict",
        p(&d),
        "--requests",
        p(&req),
        "--out",
        p(&out),
        "--neighbors",
        "3",
    ]);
    let x = tensor_io::read_matrix(&acts).unwrap();
    let y = tensor_io::read_matrix(out.join("steered.npy")).unwrap();
    let dict = tensor_io::read_concepts(&d).unwrap();
    let c2 = dict.directions().row(2);
    let dot: f64 = y
        .row(7)
        .iter()
        .zip(c2)
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum();
    assert!(dot.abs() < 1e-5);
    assert_eq!(x.row(1), y.row(1));
    let c1 = dict.directions().row(1);
    for t in 0..16 {
        assert!((y.row(0)[t] - (x.row(0)[t] + 2.5 * c1[t])).abs() < 1e-5);
    }
    let r = json_file(&out.join("report.json"));
    assert_eq!(r["results"]["rows_steered"], 2);
    assert_eq!(r["results"]["neighbors"]["7"].as_array().unwrap().len(), 3);

    std::fs::write(&req, r#"[{"concept_id": 9, "alpha": 1.0}]"#).unwrap();
    let bad = run(&[
        "steer",
        "--acts",
        p(&acts),
        "--dict",
        p(&d),
        "--requests",
        p(&req),
        "--out",
        p(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
