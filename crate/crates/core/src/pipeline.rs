//! End-to-end analysis of one model, plus the report builders shared with
//! the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activation_stats::{self, KurtosisResult, OutlierFeatureReport, ADVISORY_KURTOSIS};
use crate::concept_probe::{self, ConceptProbeResult, ConceptSummary};
use crate::data_model::report::{Cell, ReportDocument, Table};
use crate::data_model::{
    load_activations, load_baselines, load_head, load_matrix, ActivationMatrix, ClassifierHead,
    ConceptManifest,
};
use crate::error::{Error, Result};
use crate::head_analysis::{self, ImportanceProfile, PruneSweepResult, SVDecomposition};
use crate::zeroshot::{self, BaselineFit, RobustnessMetrics};

pub fn default_fractions() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

fn default_threshold() -> f64 {
    concept_probe::DEFAULT_THRESHOLD
}

fn default_top_k() -> usize {
    concept_probe::DEFAULT_TOP_K
}

fn default_z() -> f64 {
    activation_stats::DEFAULT_THRESHOLD_Z
}

fn default_rank_tol() -> f64 {
    head_analysis::DEFAULT_RANK_TOL
}

fn default_sweep() -> Vec<f64> {
    concept_probe::DEFAULT_SWEEP.to_vec()
}

/// Pipeline manifest. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model_id: String,
    /// Head weights, or text embeddings when `head_from_text` is set.
    pub head: PathBuf,
    #[serde(default)]
    pub head_from_text: bool,
    /// Temperature for `head_from_text`; falls back to the head sidecar.
    #[serde(default)]
    pub temperature: Option<f64>,
    /// Labeled in-distribution activations.
    pub acts: PathBuf,
    #[serde(default)]
    pub shift_acts: Vec<PathBuf>,
    /// Probe activations; defaults to `acts`.
    #[serde(default)]
    pub probe_acts: Option<PathBuf>,
    pub concepts: PathBuf,
    #[serde(default)]
    pub baselines: Option<PathBuf>,
    #[serde(default)]
    pub published_fit: bool,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Loads a head, either directly or by normalizing text embeddings.
pub fn load_classifier(path: &Path, from_text: bool, temperature: Option<f64>) -> Result<ClassifierHead> {
    if !from_text {
        return load_head(path);
    }
    let loaded = load_matrix(path)?;
    let t = temperature.or(loaded.sidecar.temperature).ok_or_else(|| {
        Error::Validation(format!(
            "{}: building a head from text embeddings needs a temperature",
            path.display()
        ))
    })?;
    let mut head = zeroshot::build_head(&loaded.matrix, t)?;
    head.class_names = loaded.sidecar.class_names;
    Ok(head)
}

pub fn add_kurtosis(doc: &mut ReportDocument, k: &KurtosisResult) -> Result<()> {
    doc.scalar("kurtosis.mean", k.mean_kurtosis)?;
    doc.integer("kurtosis.n_samples", k.n_samples as i64)?;
    doc.integer("kurtosis.dim", k.dim as i64)?;
    doc.scalar("kurtosis.advisory_threshold", ADVISORY_KURTOSIS)?;
    doc.integer(
        "kurtosis.above_advisory",
        i64::from(k.mean_kurtosis >= ADVISORY_KURTOSIS),
    )?;
    if let Some(per) = &k.per_sample {
        doc.vector("kurtosis.per_sample", per.clone())?;
    }
    Ok(())
}

pub fn add_outliers(doc: &mut ReportDocument, prefix: &str, r: &OutlierFeatureReport) -> Result<()> {
    doc.scalar(format!("{prefix}.threshold_z"), r.threshold_z)?;
    doc.vector(format!("{prefix}.frequency"), r.frequency.clone())?;
    let mut flagged = Table::new(["coordinate", "frequency"]);
    for (i, &f) in r.frequency.iter().enumerate().filter(|(_, &f)| f > 0.0) {
        flagged.push_row(vec![Cell::from(i), Cell::from(f)])?;
    }
    doc.integer(format!("{prefix}.n_flagged_coordinates"), flagged.rows.len() as i64)?;
    doc.table(format!("{prefix}.flagged"), flagged)
}

pub fn add_importance(
    doc: &mut ReportDocument,
    svd: &SVDecomposition,
    p: &ImportanceProfile,
) -> Result<()> {
    doc.integer("importance.rank", svd.rank() as i64)?;
    doc.vector("importance.singular_values", svd.singular_values.clone())?;
    doc.vector("importance.values", p.importance.clone())?;
    doc.scalar("importance.ratio", p.ratio)?;
    doc.text("importance.ratio_convention", head_analysis::RATIO_CONVENTION)?;
    doc.integer("importance.argmax_index", p.argmax_index as i64)?;
    if let Ok(rho) = head_analysis::spearman(&svd.singular_values, &p.importance) {
        doc.scalar("importance.spearman_sigma", rho)?;
    }
    Ok(())
}

pub fn add_prune_sweep(doc: &mut ReportDocument, r: &PruneSweepResult) -> Result<()> {
    let mut columns = vec!["fraction", "n_pruned", "acc_in"];
    let n_shift = r.acc_shift.as_ref().map_or(0, |s| s.first().map_or(0, Vec::len));
    let shift_names: Vec<String> = (0..n_shift).map(|s| format!("acc_shift_{s}")).collect();
    columns.extend(shift_names.iter().map(String::as_str));
    if r.acc_shift_mean.is_some() {
        columns.push("acc_shift_mean");
    }
    if r.er.is_some() {
        columns.push("er");
    }
    let mut t = Table::new(columns);
    for i in 0..r.fractions.len() {
        let mut row = vec![
            Cell::from(r.fractions[i]),
            Cell::from(r.n_pruned[i]),
            Cell::from(r.acc_in[i]),
        ];
        if let Some(s) = &r.acc_shift {
            row.extend(s[i].iter().map(|&v| Cell::from(v)));
        }
        if let Some(m) = &r.acc_shift_mean {
            row.push(Cell::from(m[i]));
        }
        if let Some(er) = &r.er {
            row.push(er[i].map_or_else(|| Cell::from("undefined"), Cell::from));
        }
        t.push_row(row)?;
    }
    doc.integer("prune_sweep.n_directions", r.n_directions as i64)?;
    doc.table("prune_sweep.table", t)
}

pub fn add_robustness(
    doc: &mut ReportDocument,
    m: &RobustnessMetrics,
    fit: &BaselineFit,
    fit_source: &str,
) -> Result<()> {
    doc.scalar("robustness.acc_in", m.acc_in)?;
    doc.scalar("robustness.acc_shift", m.acc_shift)?;
    doc.scalar("robustness.er", m.er)?;
    doc.scalar("robustness.pct_acc", m.pct_acc)?;
    doc.scalar("robustness.fit.beta0", fit.beta0)?;
    doc.scalar("robustness.fit.beta1", fit.beta1)?;
    doc.scalar("robustness.fit.pearson_r", fit.pearson_r)?;
    doc.integer("robustness.fit.n_points", fit.n_points as i64)?;
    doc.text("robustness.fit.source", fit_source)
}

pub fn add_concepts(
    doc: &mut ReportDocument,
    result: &ConceptProbeResult,
    summary: &ConceptSummary,
    sweep: &[f64],
) -> Result<()> {
    doc.scalar("concepts.threshold", result.threshold)?;
    doc.text("concepts.sign_convention", concept_probe::SIGN_CONVENTION)?;
    doc.integer("concepts.n_unique", summary.n_unique as i64)?;
    doc.scalar("concepts.polysemanticity", summary.polysemanticity)?;

    let name_of = |id: i64| {
        result
            .concept_ids
            .iter()
            .position(|&c| c == id)
            .map(|p| result.concept_names[p].clone())
            .unwrap_or_default()
    };
    let mut unique = Table::new(["concept_id", "name"]);
    for id in result.unique_concepts() {
        unique.push_row(vec![Cell::Int(id), Cell::Text(name_of(id))])?;
    }
    doc.table("concepts.unique", unique)?;

    let mut top = Table::new(["direction", "rank", "concept_id", "name", "ap"]);
    for (i, list) in summary.top_k.iter().enumerate() {
        for (rank, &(id, ap)) in list.iter().enumerate() {
            top.push_row(vec![
                Cell::from(i),
                Cell::from(rank + 1),
                Cell::Int(id),
                Cell::Text(name_of(id)),
                Cell::from(ap),
            ])?;
        }
    }
    doc.table("concepts.top_k", top)?;

    if !sweep.is_empty() {
        let mut t = Table::new(["threshold", "n_unique", "polysemanticity"]);
        for (thr, n, poly) in concept_probe::threshold_sweep(result, sweep)? {
            t.push_row(vec![Cell::from(thr), Cell::from(n), Cell::from(poly)])?;
        }
        doc.table("concepts.threshold_sweep", t)?;
    }
    Ok(())
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

/// Runs every analysis on one model and collects the results.
///
/// Metric groups: `kurtosis`, `outliers`, `importance`, `prune_sweep`,
/// `robustness` (when shifted sets are given) and `concepts`.
pub fn run_pipeline(
    config: &PipelineConfig,
    base_dir: &Path,
    command_line: Vec<String>,
    timestamp: String,
) -> Result<ReportDocument> {
    let resolve = |p: &Path| base_dir.join(p);
    let config_value =
        serde_json::to_value(config).map_err(|e| Error::Format(e.to_string()))?;
    let mut doc = ReportDocument::new(command_line, config_value, timestamp);
    doc.text("model_id", config.model_id.clone())?;

    let (head, acts, shifts, probe_acts, manifest) = stage("load", || {
        let head = load_classifier(&resolve(&config.head), config.head_from_text, config.temperature)?;
        let acts = load_activations(&resolve(&config.acts))?;
        let shifts = config
            .shift_acts
            .iter()
            .map(|p| load_activations(&resolve(p)))
            .collect::<Result<Vec<ActivationMatrix>>>()?;
        let probe_acts = match &config.probe_acts {
            Some(p) => load_activations(&resolve(p))?,
            None => acts.clone(),
        };
        let manifest = ConceptManifest::load(&resolve(&config.concepts))?;
        Ok((head, acts, shifts, probe_acts, manifest))
    })?;
    let mut inputs: Vec<&PathBuf> = vec![&config.head, &config.acts];
    inputs.extend(&config.shift_acts);
    inputs.extend(&config.probe_acts);
    inputs.push(&config.concepts);
    inputs.extend(&config.baselines);
    for p in inputs {
        let digest = crate::data_model::report::file_digest(&resolve(p))?;
        doc.inputs.push(crate::data_model::report::InputDigest {
            path: p.display().to_string(),
            sha256: digest,
        });
    }

    let k = stage("kurtosis", || activation_stats::kurtosis(&acts, false))?;
    add_kurtosis(&mut doc, &k)?;

    let outliers = stage("outliers", || activation_stats::detect_outlier_features(&acts, config.z))?;
    add_outliers(&mut doc, "outliers", &outliers)?;

    let svd = stage("importance", || head_analysis::svd_head(&head, config.rank_tol))?;
    let profile = stage("importance", || head_analysis::importance(&svd, &acts))?;
    add_importance(&mut doc, &svd, &profile)?;

    let fit = stage("robustness", || {
        match (&config.baselines, config.published_fit) {
            (_, true) => Ok(Some((BaselineFit::published(), "published"))),
            (Some(p), false) => {
                Ok(Some((zeroshot::fit_baseline(&load_baselines(&resolve(p))?)?, "baselines")))
            }
            (None, false) => Ok(None),
        }
    })?;

    let sweep = stage("prune_sweep", || {
        head_analysis::prune_sweep(&head, &acts, &config.fractions, &shifts, fit.as_ref().map(|f| &f.0))
    })?;
    add_prune_sweep(&mut doc, &sweep)?;

    if !shifts.is_empty() {
        stage("robustness", || {
            let acc_in = zeroshot::head_accuracy(&head, &acts)?;
            let per_shift = shifts
                .iter()
                .map(|s| zeroshot::head_accuracy(&head, s))
                .collect::<Result<Vec<_>>>()?;
            let acc_shift = zeroshot::mean_shift_accuracy(&per_shift)?;
            doc.vector("robustness.per_shift", per_shift)?;
            match &fit {
                Some((f, source)) => {
                    let m = zeroshot::robustness_metrics(acc_in, acc_shift, f)?;
                    add_robustness(&mut doc, &m, f, source)
                }
                None => {
                    doc.scalar("robustness.acc_in", acc_in)?;
                    doc.scalar("robustness.acc_shift", acc_shift)?;
                    doc.scalar("robustness.pct_acc", acc_shift / acc_in)
                }
            }
        })?;
    }

    stage("concepts", || {
        let result = concept_probe::probe(&svd, &probe_acts, &manifest, config.threshold)?;
        let summary = concept_probe::summarize(&result, config.top_k)?;
        add_concepts(&mut doc, &result, &summary, &config.sweep)
    })?;

    Ok(doc)
}

/// Loads the manifest at `path` and runs the pipeline relative to it.
pub fn pipeline_full(path: &Path, command_line: Vec<String>, timestamp: String) -> Result<ReportDocument> {
    let config = PipelineConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_pipeline(&config, base, command_line, timestamp)
}
