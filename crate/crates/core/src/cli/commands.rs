// SPDX-License-Identifier: MIT OR Apache-2.0

//! Subcommand implementations: validate inputs, call the library, write
//! artifacts and a report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::report::{fmt_num, render_table, Report};
use super::*;
use crate::baselines::{self, SaeConfig};
use crate::concepts::{self, ConceptScores, ExtractionConfig, InputSpace};
use crate::differences::{compute_differences, sample_pairs, DEFAULT_SKEW_EPSILON};
use crate::evaluation::{self, ProbeResult};
use crate::quadratic::{self, DiscriminantConfig, QuadraticConfig, QuadraticMeta};
use crate::steering::{self, SteerRequest};
use crate::synthetic::{self, PlantedConfig};
use crate::tensor_io::{self, ActivationMatrix, LabelTable, CONCEPTS_FILE, CONCEPTS_META_FILE};

pub const REPORT_FILE: &str = "report.json";
pub const DEFAULT_TOPACT: usize = 9;
pub const DEFAULT_MPPC_PAIRS: usize = 10;
pub const DEFAULT_MPPC_THRESHOLD: f64 = 0.3;

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::Config(format!("missing required {flag}")))
}

/// Fail with `MissingPath` before any work if an input is absent.
fn ensure_exists(paths: &[&Path]) -> Result<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(Error::MissingPath(p.to_path_buf())),
        None => Ok(()),
    }
}

fn record_dict(report: &mut Report, name: &str, dir: &Path) -> Result<()> {
    report.input(format!("{name}/{CONCEPTS_FILE}"), &dir.join(CONCEPTS_FILE))?;
    report.input(
        format!("{name}/{CONCEPTS_META_FILE}"),
        &dir.join(CONCEPTS_META_FILE),
    )
}

fn record_labels(report: &mut Report, path: &Path) -> Result<()> {
    report.input("labels", path)?;
    report.input("labels_meta", &tensor_io::labels_meta_path(path))
}

fn emit(
    report: &Report,
    out: Option<&Path>,
    format: Option<Format>,
    table: impl FnOnce() -> String,
) -> Result<()> {
    if let Some(path) = out {
        report.write(path)?;
    }
    match format {
        Some(Format::Table) => print!("{}", table()),
        Some(Format::Json) => print!("{}", report.to_json()?),
        None if out.is_none() => print!("{}", report.to_json()?),
        None => {}
    }
    Ok(())
}

fn attribute_list(labels: &LabelTable, requested: &Option<Vec<String>>) -> Result<Vec<String>> {
    let names = match requested {
        Some(list) => list.clone(),
        None => labels.attributes.iter().map(|a| a.name.clone()).collect(),
    };
    if names.is_empty() {
        return Err(Error::Config("the attribute list is empty".into()));
    }
    for n in &names {
        labels.attribute(n)?;
    }
    Ok(names)
}

#[derive(Debug, Serialize)]
struct AttributeOutcome {
    attribute: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<ProbeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Probe every attribute; per-attribute failures are recorded, not fatal.
fn probe_all(
    scores: &ConceptScores,
    labels: &LabelTable,
    attributes: &[String],
) -> (Vec<AttributeOutcome>, Option<f64>) {
    let outcomes: Vec<AttributeOutcome> = attributes
        .iter()
        .map(|a| match evaluation::probe_loss(scores, labels, a) {
            Ok(r) => AttributeOutcome {
                attribute: a.clone(),
                result: Some(r),
                error: None,
            },
            Err(e) => AttributeOutcome {
                attribute: a.clone(),
                result: None,
                error: Some(format!("{}: {e}", e.kind())),
            },
        })
        .collect();
    let losses: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref())
        .map(|r| r.median_loss)
        .collect();
    let med = evaluation::median(&losses);
    (outcomes, med)
}

fn extraction_config(
    k: Option<usize>,
    seed: Option<u64>,
    skew_eps: Option<f64>,
) -> ExtractionConfig {
    ExtractionConfig {
        k: k.unwrap_or(concepts::DEFAULT_K),
        seed: seed.unwrap_or(0),
        skew_epsilon: skew_eps.unwrap_or(DEFAULT_SKEW_EPSILON),
        ..ExtractionConfig::default()
    }
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let out = required(&a.out, "--out")?;
    ensure_exists(&[&acts_path])?;
    let mut cfg = extraction_config(a.k, a.seed, a.skew_eps);
    cfg.weighting = !a.no_weighting;
    cfg.normalize = !a.no_normalize;
    cfg.input = if a.on_activations {
        InputSpace::Activations
    } else {
        InputSpace::Differences
    };
    cfg.skew_sample = a.skew_sample;
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    if let Some(t) = a.tol {
        cfg.tol = t;
    }
    let mut report = Report::new("extract", &a)?;
    report.input("acts", &acts_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let estimate = concepts::memory_estimate_bytes(acts.n_samples(), acts.dim(), cfg.k);
    eprintln!(
        "extract: N={} D={} k={}, estimated working set {:.1} MiB",
        acts.n_samples(),
        acts.dim(),
        cfg.k,
        estimate as f64 / (1024.0 * 1024.0)
    );
    let ex = concepts::extract_detailed(&acts, &cfg)?;
    tensor_io::write_concepts(&ex.dictionary, &out)?;
    report.results = json!({
        "method": cfg.method_tag(),
        "n_samples": acts.n_samples(),
        "dim": acts.dim(),
        "k": cfg.k,
        "inertia": ex.clustering.inertia,
        "iterations": ex.clustering.iters_run,
        "converged": ex.clustering.converged,
        "outputs": [CONCEPTS_FILE, CONCEPTS_META_FILE],
    });
    report.write(&out.join(REPORT_FILE))
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let dict_path = required(&a.dict, "--dict")?;
    let out = required(&a.out, "--out")?;
    ensure_exists(&[&acts_path, &dict_path])?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let dict = tensor_io::read_concepts(&dict_path)?;
    let scores = concepts::score(&acts, &dict)?;
    tensor_io::write_matrix(scores.as_matrix(), &out)
}

/// A scored concept set under evaluation.
struct Scored {
    name: String,
    method: String,
    scores: ConceptScores,
}

fn load_scored_sets(
    a: &ProbeArgs,
    acts: &ActivationMatrix,
    report: &mut Report,
) -> Result<Vec<Scored>> {
    let mut sets = Vec::new();
    for (i, dir) in a.dict.iter().enumerate() {
        let dict = tensor_io::read_concepts(dir)?;
        record_dict(report, &format!("dict{i}"), dir)?;
        sets.push(Scored {
            name: dir.display().to_string(),
            method: dict.meta().method.clone(),
            scores: concepts::score(acts, &dict)?,
        });
    }
    for (i, dir) in a.sae.iter().enumerate() {
        let (model, _) = baselines::load_sae(dir)?;
        report.input(
            format!("sae{i}/{}", baselines::sae::META_FILE),
            &dir.join(baselines::sae::META_FILE),
        )?;
        sets.push(Scored {
            name: dir.display().to_string(),
            method: baselines::sae::METHOD_TOPK_SAE.into(),
            scores: model.scores(acts)?,
        });
    }
    for (i, dir) in a.quadratic.iter().enumerate() {
        let (concepts, _) = quadratic::read_quadratic(dir)?;
        report.input(
            format!("quadratic{i}/{}", quadratic::META_FILE),
            &dir.join(quadratic::META_FILE),
        )?;
        sets.push(Scored {
            name: dir.display().to_string(),
            method: quadratic::METHOD_QUADRATIC.into(),
            scores: quadratic::quadratic_scores(acts, &concepts)?,
        });
    }
    Ok(sets)
}

pub fn probe(a: ProbeArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let labels_path = required(&a.labels, "--labels")?;
    let mut inputs: Vec<&Path> = vec![&acts_path, &labels_path];
    inputs.extend(
        a.dict
            .iter()
            .chain(&a.sae)
            .chain(&a.quadratic)
            .map(PathBuf::as_path),
    );
    ensure_exists(&inputs)?;
    if a.dict.is_empty() && a.sae.is_empty() && a.quadratic.is_empty() {
        return Err(Error::Config(
            "give at least one --dict, --sae or --quadratic".into(),
        ));
    }
    let mut report = Report::new("probe", &a)?;
    report.input("acts", &acts_path)?;
    record_labels(&mut report, &labels_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let labels = tensor_io::read_labels(&labels_path)?;
    labels.check_samples(acts.n_samples())?;
    let attributes = attribute_list(&labels, &a.attributes)?;
    let sets = load_scored_sets(&a, &acts, &mut report)?;

    let mut per_method: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut dictionaries = Vec::new();
    let mut rows = Vec::new();
    for s in &sets {
        let (outcomes, med) = probe_all(&s.scores, &labels, &attributes);
        let losses: BTreeMap<String, f64> = outcomes
            .iter()
            .filter_map(|o| {
                o.result
                    .as_ref()
                    .map(|r| (o.attribute.clone(), r.median_loss))
            })
            .collect();
        rows.push(
            std::iter::once(format!("{} ({})", s.method, s.name))
                .chain(attributes.iter().map(|at| fmt_num(losses.get(at).copied())))
                .chain(std::iter::once(fmt_num(med)))
                .collect(),
        );
        per_method.insert(s.name.clone(), losses);
        dictionaries.push(json!({
            "name": s.name,
            "method": s.method,
            "k": s.scores.k(),
            "median_probe_loss": med,
            "attributes": outcomes,
        }));
    }
    let comparison = if sets.len() >= 2 {
        match evaluation::win_matrix_and_wilcoxon(&per_method) {
            Ok(w) => serde_json::to_value(w)?,
            Err(e) => json!({ "note": e.to_string() }),
        }
    } else {
        json!({ "note": "the comparison needs at least two dictionaries" })
    };
    report.results = json!({ "dictionaries": dictionaries, "comparison": comparison });
    let header: Vec<&str> = std::iter::once("dictionary")
        .chain(attributes.iter().map(String::as_str))
        .chain(std::iter::once("median"))
        .collect();
    emit(&report, a.out.as_deref(), a.format, || {
        render_table(&header, &rows)
    })
}

pub fn mppc(a: MppcArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let mut inputs: Vec<&Path> = vec![&acts_path];
    inputs.extend(a.dict.iter().map(PathBuf::as_path));
    ensure_exists(&inputs)?;
    let threshold = a.threshold.unwrap_or(DEFAULT_MPPC_THRESHOLD);
    let mut report = Report::new("mppc", &a)?;
    report.input("acts", &acts_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;

    let (labels, score_sets): (Vec<String>, Vec<ActivationMatrix>) = if !a.dict.is_empty() {
        if a.dict.len() != 2 {
            return Err(Error::Config(format!(
                "--dict needs exactly two dictionaries, got {}",
                a.dict.len()
            )));
        }
        let mut sets = Vec::new();
        for (i, d) in a.dict.iter().enumerate() {
            record_dict(&mut report, &format!("dict{i}"), d)?;
            let dict = tensor_io::read_concepts(d)?;
            sets.push(concepts::score(&acts, &dict)?.into_matrix());
        }
        (
            a.dict.iter().map(|d| d.display().to_string()).collect(),
            sets,
        )
    } else {
        let seeds = match &a.seeds {
            Some(s) => s.clone(),
            None => {
                let base = a.seed.unwrap_or(0);
                let pairs = a.pairs.unwrap_or(DEFAULT_MPPC_PAIRS) as u64;
                (base..=base + pairs).collect()
            }
        };
        if seeds.len() < 2 {
            return Err(Error::Config(format!(
                "MPPC needs at least 2 seeds, got {}",
                seeds.len()
            )));
        }
        let mut sets = Vec::new();
        for &seed in &seeds {
            let cfg = extraction_config(a.k, Some(seed), a.skew_eps);
            let dict = concepts::extract(&acts, &cfg)?;
            sets.push(concepts::score(&acts, &dict)?.into_matrix());
        }
        (seeds.iter().map(|s| format!("seed {s}")).collect(), sets)
    };

    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    for i in 0..score_sets.len() - 1 {
        let r = evaluation::mppc(&score_sets[i], &score_sets[i + 1])?;
        rows.push(vec![
            format!("{} -> {}", labels[i], labels[i + 1]),
            fmt_num(Some(r.mppc)),
        ]);
        pairs.push(json!({ "a": labels[i], "b": labels[i + 1], "mppc": r.mppc, "rho": r.rho, "argmax": r.argmax }));
    }
    let mean = pairs
        .iter()
        .map(|p| p["mppc"].as_f64().unwrap_or(f64::NAN))
        .sum::<f64>()
        / pairs.len() as f64;
    rows.push(vec!["mean".into(), fmt_num(Some(mean))]);
    let k_b = score_sets[1].dim();
    let significance = evaluation::mppc_significance(threshold, acts.n_samples(), k_b)?;
    report.results = json!({
        "mean_mppc": mean,
        "pairs": pairs,
        "significance": {
            "threshold": threshold,
            "n_samples": acts.n_samples(),
            "k": k_b,
            "p": significance.p,
            "log10_p": significance.log10_p,
        },
    });
    emit(&report, a.out.as_deref(), a.format, || {
        render_table(&["pair", "mppc"], &rows)
    })
}

#[derive(Debug, Serialize)]
struct AblationCell {
    method: String,
    input: String,
    weighting: Option<bool>,
    median_probe_loss: Option<f64>,
    effective_rank: Option<f64>,
    max_pairwise_cosine: Option<f64>,
    attributes: Vec<AttributeOutcome>,
}

fn diversity(dirs: &ActivationMatrix) -> (Option<f64>, Option<f64>) {
    (
        evaluation::effective_rank(dirs).ok(),
        evaluation::max_pairwise_cosine(dirs).ok(),
    )
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let labels_path = required(&a.labels, "--labels")?;
    ensure_exists(&[&acts_path, &labels_path])?;
    let mut report = Report::new("ablate", &a)?;
    report.input("acts", &acts_path)?;
    record_labels(&mut report, &labels_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let labels = tensor_io::read_labels(&labels_path)?;
    labels.check_samples(acts.n_samples())?;
    let attributes = attribute_list(&labels, &a.attributes)?;
    let base = extraction_config(a.k, a.seed, a.skew_eps);

    let mut cells = Vec::new();
    for input in [InputSpace::Activations, InputSpace::Differences] {
        for weighting in [false, true] {
            let cfg = ExtractionConfig {
                input,
                weighting,
                ..base.clone()
            };
            let dict = concepts::extract(&acts, &cfg)?;
            let (outcomes, med) = probe_all(&concepts::score(&acts, &dict)?, &labels, &attributes);
            let (er, mc) = diversity(dict.directions());
            cells.push(AblationCell {
                method: cfg.method_tag().into(),
                input: serde_json::to_value(input)?
                    .as_str()
                    .unwrap_or_default()
                    .into(),
                weighting: Some(weighting),
                median_probe_loss: med,
                effective_rank: er,
                max_pairwise_cosine: mc,
                attributes: outcomes,
            });
        }
    }
    if !a.no_sae {
        let cfg = SaeConfig {
            k: base.k,
            k_active: a
                .k_active
                .unwrap_or(baselines::sae::DEFAULT_K_ACTIVE)
                .min(base.k),
            lr: a.sae_lr.unwrap_or(baselines::sae::DEFAULT_LR),
            epochs: a.sae_epochs.unwrap_or(SaeConfig::default().epochs),
            seed: base.seed,
            ..SaeConfig::default()
        };
        let diffs = compute_differences(&acts, &sample_pairs(acts.n_samples(), base.seed)?)?;
        for (input, train) in [("activations", &acts), ("differences", &diffs)] {
            let model = baselines::sae_train(train, &cfg)?;
            let (outcomes, med) = probe_all(&model.scores(&acts)?, &labels, &attributes);
            let dict = baselines::sae_dictionary(&model, &acts.fingerprint())?;
            let (er, mc) = diversity(dict.directions());
            cells.push(AblationCell {
                method: baselines::sae::METHOD_TOPK_SAE.into(),
                input: input.into(),
                weighting: None,
                median_probe_loss: med,
                effective_rank: er,
                max_pairwise_cosine: mc,
                attributes: outcomes,
            });
        }
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.method.clone(),
                c.input.clone(),
                c.weighting
                    .map_or("-".into(), |w| if w { "yes".into() } else { "no".into() }),
                fmt_num(c.median_probe_loss),
                fmt_num(c.effective_rank),
                fmt_num(c.max_pairwise_cosine),
            ]
        })
        .collect();
    report.results = json!({ "cells": cells });
    emit(&report, a.out.as_deref(), a.format, || {
        render_table(
            &[
                "method",
                "input",
                "weighting",
                "probe loss",
                "effective rank",
                "max cos",
            ],
            &rows,
        )
    })
}

pub fn steer(a: SteerArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let dict_path = required(&a.dict, "--dict")?;
    let req_path = required(&a.requests, "--requests")?;
    let out = required(&a.out, "--out")?;
    ensure_exists(&[&acts_path, &dict_path, &req_path])?;
    let mut report = Report::new("steer", &a)?;
    report.input("acts", &acts_path)?;
    record_dict(&mut report, "dict", &dict_path)?;
    report.input("requests", &req_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let dict = tensor_io::read_concepts(&dict_path)?;
    let text = std::fs::read_to_string(&req_path).map_err(|e| Error::io(&req_path, e))?;
    let requests: Vec<SteerRequest> = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", req_path.display())))?;
    let steered = steering::steer_batch(&acts, &dict, &requests)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    tensor_io::write_matrix(&steered, out.join("steered.npy"))?;

    let mut touched: Vec<usize> = requests
        .iter()
        .flat_map(|r| {
            r.row_indices
                .clone()
                .unwrap_or_else(|| (0..acts.n_samples()).collect())
        })
        .collect();
    touched.sort_unstable();
    touched.dedup();
    let neighbors = match a.neighbors {
        Some(m) => {
            let metric = a.metric.unwrap_or_default();
            let mut map = BTreeMap::new();
            for &i in &touched {
                map.insert(
                    i.to_string(),
                    steering::nearest_neighbors(steered.row(i), &acts, m, metric)?,
                );
            }
            Some(map)
        }
        None => None,
    };
    report.results = json!({
        "requests": requests.len(),
        "rows_steered": touched.len(),
        "outputs": ["steered.npy"],
        "neighbors": neighbors,
    });
    report.write(&out.join(REPORT_FILE))
}

pub fn sae_train(a: SaeTrainArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let out = required(&a.out, "--out")?;
    ensure_exists(&[&acts_path])?;
    let defaults = SaeConfig::default();
    let cfg = SaeConfig {
        k: a.k.unwrap_or(defaults.k),
        k_active: a.k_active.unwrap_or(defaults.k_active),
        lr: a.lr.unwrap_or(defaults.lr),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let mut report = Report::new("sae-train", &a)?;
    report.input("acts", &acts_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let model = baselines::sae_train(&acts, &cfg)?;
    baselines::save_sae(&model, &cfg, &out)?;
    let dict = baselines::sae_dictionary(&model, &acts.fingerprint())?;
    tensor_io::write_concepts(&dict, &out)?;
    report.results = json!({
        "k": cfg.k,
        "k_active": cfg.k_active,
        "steps": model.step,
        "loss_history": model.loss_history,
        "outputs": ["w_enc.npy", "b_enc.npy", "w_dec.npy", "b_dec.npy", baselines::sae::META_FILE, CONCEPTS_FILE, CONCEPTS_META_FILE],
    });
    report.write(&out.join(REPORT_FILE))
}

pub fn lda(a: LdaArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let labels_path = required(&a.labels, "--labels")?;
    let attribute = required(&a.attribute, "--attribute")?;
    let out = required(&a.out, "--out")?;
    ensure_exists(&[&acts_path, &labels_path])?;
    let mut report = Report::new("lda", &a)?;
    report.input("acts", &acts_path)?;
    record_labels(&mut report, &labels_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let labels = tensor_io::read_labels(&labels_path)?;
    let dict = baselines::lda_dictionary(&acts, &labels, &attribute, a.ridge)?;
    tensor_io::write_concepts(&dict, &out)?;
    report.results = json!({
        "attribute": attribute,
        "k": dict.k(),
        "notes": dict.meta().notes,
        "outputs": [CONCEPTS_FILE, CONCEPTS_META_FILE],
    });
    report.write(&out.join(REPORT_FILE))
}

pub fn quadratic(a: QuadraticArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let out = required(&a.out, "--out")?;
    ensure_exists(&[&acts_path])?;
    let defaults = QuadraticConfig::default();
    let disc = DiscriminantConfig::default();
    let cfg = QuadraticConfig {
        k: a.k.unwrap_or(defaults.k),
        seed: a.seed.unwrap_or(defaults.seed),
        discriminant: DiscriminantConfig {
            n_neighbors: a.n_neighbors.unwrap_or(disc.n_neighbors),
            ridge: a.ridge.unwrap_or(disc.ridge),
            center: a.center.unwrap_or(disc.center),
        },
        max_iters: a.max_iters.unwrap_or(defaults.max_iters),
        allow_large: a.allow_large,
        ..defaults
    };
    let mut report = Report::new("quadratic", &a)?;
    report.input("acts", &acts_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let ex = quadratic::quadratic_extract(&acts, &cfg)?;
    let meta = QuadraticMeta {
        method: quadratic::METHOD_QUADRATIC.into(),
        k: cfg.k,
        dim: acts.dim(),
        seed: cfg.seed,
        n_neighbors: cfg.discriminant.n_neighbors,
        ridge: cfg.discriminant.ridge,
        center: cfg.discriminant.center,
        skipped_pairs: ex.skipped_pairs,
        source_sha256: acts.fingerprint(),
    };
    quadratic::write_quadratic(&ex.concepts, &meta, &out)?;
    report.results = json!({
        "k": cfg.k,
        "skipped_pairs": ex.skipped_pairs,
        "iterations": ex.iters_run,
        "converged": ex.converged,
        "objective_history": ex.objective_history,
        "outputs": ["quad_A.npy", "quad_b.npy", quadratic::META_FILE],
    });
    report.write(&out.join(REPORT_FILE))
}

pub fn topact(a: TopactArgs) -> Result<()> {
    let acts_path = required(&a.acts, "--acts")?;
    let dict_path = required(&a.dict, "--dict")?;
    ensure_exists(&[&acts_path, &dict_path])?;
    let m = a.m.unwrap_or(DEFAULT_TOPACT);
    let mut report = Report::new("topact", &a)?;
    report.input("acts", &acts_path)?;
    record_dict(&mut report, "dict", &dict_path)?;
    let acts = tensor_io::read_matrix(&acts_path)?;
    let dict = tensor_io::read_concepts(&dict_path)?;
    let scores = concepts::score(&acts, &dict)?;
    let top = (0..dict.k())
        .map(|c| concepts::top_activating(&scores, c, m))
        .collect::<Result<Vec<_>>>()?;
    report.results = json!({ "m": m, "top": top });
    emit(&report, a.out.as_deref(), None, String::new)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let out = required(&a.out, "--out")?;
    let seed = a.seed.unwrap_or(0);
    let mut cfg = match a.kind.unwrap_or(SynthKind::Planted) {
        SynthKind::Planted => PlantedConfig::planted(seed),
        SynthKind::Skewed => PlantedConfig::skewed(seed),
    };
    if let Some(n) = a.n_samples {
        cfg.n_samples = n;
    }
    if let Some(d) = a.dim {
        cfg.dim = d;
    }
    let label_concepts = a
        .label_concepts
        .clone()
        .unwrap_or_else(|| (0..4.min(cfg.n_concepts())).collect());
    let ds = synthetic::generate(&cfg)?;
    let labels = ds.labels(&label_concepts)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    tensor_io::write_matrix(&ds.acts, out.join("acts.npy"))?;
    tensor_io::write_matrix(&ds.directions, out.join("directions.npy"))?;
    tensor_io::write_labels(&labels, out.join("labels.csv"))?;
    let mut report = Report::new("synth", &a)?;
    report.results = json!({
        "generator": cfg,
        "outputs": ["acts.npy", "directions.npy", "labels.csv", tensor_io::LABELS_META_FILE],
    });
    report.write(&out.join(REPORT_FILE))
}
