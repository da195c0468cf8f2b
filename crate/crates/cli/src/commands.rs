use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use repscope_core::activation_stats::{self, ADVISORY_KURTOSIS};
use repscope_core::checkpoint_interp;
use repscope_core::cka;
use repscope_core::concept_probe;
use repscope_core::data_model::report::{report_timestamp, Cell, ReportDocument, Table};
use repscope_core::data_model::{
    load_activations, load_baselines, load_checkpoint, load_labels, load_matrix, load_report,
    save_checkpoint, Matrix,
};
use repscope_core::head_analysis;
use repscope_core::pipeline::{self, load_classifier};
use repscope_core::zeroshot::{self, BaselineFit};
use repscope_core::{Error, Result};

use crate::args::*;

pub fn run(cli: &Cli, command_line: Vec<String>) -> Result<()> {
    let config = serde_json::to_value(cli).map_err(|e| Error::Format(e.to_string()))?;
    let mut doc = ReportDocument::new(command_line.clone(), config, report_timestamp());

    match &cli.command {
        Command::Kurtosis(a) => kurtosis(&mut doc, a)?,
        Command::Outliers(a) => outliers(&mut doc, a)?,
        Command::Importance(a) => importance(&mut doc, a)?,
        Command::PruneSweep(a) => prune_sweep(&mut doc, a)?,
        Command::Er(a) => er(&mut doc, a)?,
        Command::Probe(a) => probe(&mut doc, a)?,
        Command::Venn(a) => venn(&mut doc, a)?,
        Command::OverlapTraj(a) => overlap(&mut doc, a)?,
        Command::Cka(a) => cka_cmd(&mut doc, a)?,
        Command::Interp(a) => interp(&mut doc, a, cli.out.as_deref())?,
        Command::SweepReport(a) => {
            doc = sweep_report(a, command_line, doc.provenance.timestamp.clone())?;
            doc.provenance.config = serde_json::to_value(cli).map_err(|e| Error::Format(e.to_string()))?;
        }
        Command::Report(a) => {
            let config = doc.provenance.config.clone();
            doc = pipeline::pipeline_full(&a.config, command_line, doc.provenance.timestamp.clone())?;
            doc.provenance.config = serde_json::json!({ "cli": config, "pipeline": doc.provenance.config });
            doc.add_input(&a.config)?;
        }
    }

    let out = match &cli.command {
        Command::Interp(_) => None,
        _ => cli.out.as_deref(),
    };
    emit(&doc, cli.format, out)
}

fn emit(doc: &ReportDocument, format: Format, out: Option<&Path>) -> Result<()> {
    let text = match format {
        Format::Json => doc.to_canonical_json()?,
        Format::Csv => doc.to_csv()?,
    };
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn kurtosis(doc: &mut ReportDocument, a: &KurtosisArgs) -> Result<()> {
    let acts = load_activations(&a.acts)?;
    doc.add_input(&a.acts)?;
    let k = activation_stats::kurtosis(&acts, a.per_sample)?;
    pipeline::add_kurtosis(doc, &k)?;
    if k.mean_kurtosis >= ADVISORY_KURTOSIS {
        eprintln!(
            "note: mean kurtosis {:.3} >= {ADVISORY_KURTOSIS}, outlier features are likely present",
            k.mean_kurtosis
        );
    }
    if let Some(z) = a.z {
        let r = activation_stats::detect_outlier_features(&acts, z)?;
        pipeline::add_outliers(doc, "outliers", &r)?;
    }
    Ok(())
}

fn outliers(doc: &mut ReportDocument, a: &OutliersArgs) -> Result<()> {
    let acts = load_activations(&a.acts)?;
    doc.add_input(&a.acts)?;
    let r = match &a.directions {
        Some(p) => {
            let dirs = load_matrix(p)?.matrix;
            doc.add_input(p)?;
            head_analysis::projection_outliers(&acts, &dirs, a.z)?
        }
        None => activation_stats::detect_outlier_features(&acts, a.z)?,
    };
    pipeline::add_outliers(doc, "outliers", &r)
}

fn importance(doc: &mut ReportDocument, a: &ImportanceArgs) -> Result<()> {
    let head = load_classifier(&a.head.head, a.head.from_text, a.head.temperature)?;
    let acts = load_activations(&a.acts)?;
    doc.add_input(&a.head.head)?;
    doc.add_input(&a.acts)?;
    let svd = head_analysis::svd_head(&head, a.rank_tol)?;
    let p = head_analysis::importance(&svd, &acts)?;
    pipeline::add_importance(doc, &svd, &p)
}

fn baseline_fit(doc: &mut ReportDocument, baselines: Option<&Path>, published: bool) -> Result<Option<(BaselineFit, &'static str)>> {
    if published {
        return Ok(Some((BaselineFit::published(), "published")));
    }
    match baselines {
        Some(p) => {
            doc.add_input(p)?;
            Ok(Some((zeroshot::fit_baseline(&load_baselines(p)?)?, "baselines")))
        }
        None => Ok(None),
    }
}

fn prune_sweep(doc: &mut ReportDocument, a: &PruneSweepArgs) -> Result<()> {
    let head = load_classifier(&a.head.head, a.head.from_text, a.head.temperature)?;
    doc.add_input(&a.head.head)?;
    let mut acts = load_activations(&a.acts)?;
    doc.add_input(&a.acts)?;
    if let Some(p) = &a.labels {
        acts = acts.with_labels(load_labels(p)?)?;
        doc.add_input(p)?;
    }
    let shifts = a
        .shifts
        .iter()
        .map(|p| {
            doc.add_input(p)?;
            load_activations(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = baseline_fit(doc, a.baselines.as_deref(), a.published_fit)?;
    let r = head_analysis::prune_sweep(&head, &acts, &a.fractions, &shifts, fit.as_ref().map(|f| &f.0))?;
    pipeline::add_prune_sweep(doc, &r)
}

fn er(doc: &mut ReportDocument, a: &ErArgs) -> Result<()> {
    let (fit, source) = baseline_fit(doc, a.baselines.as_deref(), a.published_fit)?
        .ok_or_else(|| Error::Validation("either --baselines or --published-fit is required".into()))?;
    let m = zeroshot::robustness_metrics(a.acc_in, a.acc_shift, &fit)?;
    pipeline::add_robustness(doc, &m, &fit, source)
}

fn probe(doc: &mut ReportDocument, a: &ProbeArgs) -> Result<()> {
    let acts = load_activations(&a.probe_acts)?;
    let manifest = repscope_core::data_model::ConceptManifest::load(&a.manifest)?;
    let result = if a.canonical {
        concept_probe::probe_directions(&Matrix::identity(acts.dim()), &acts, &manifest, a.threshold)?
    } else {
        let head = load_classifier(&a.svd_head, false, None)?;
        doc.add_input(&a.svd_head)?;
        let svd = head_analysis::svd_head(&head, a.rank_tol)?;
        concept_probe::probe(&svd, &acts, &manifest, a.threshold)?
    };
    doc.add_input(&a.probe_acts)?;
    doc.add_input(&a.manifest)?;
    doc.text("concepts.basis", if a.canonical { "canonical" } else { "right_singular_vectors" })?;
    let summary = concept_probe::summarize(&result, a.top_k)?;
    pipeline::add_concepts(doc, &result, &summary, &a.sweep)
}

/// A concept-id set: a bare JSON integer array, or a report carrying a
/// `concepts.unique` table.
fn load_concept_set(path: &Path) -> Result<BTreeSet<i64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if let Ok(ids) = serde_json::from_str::<Vec<i64>>(&text) {
        return Ok(ids.into_iter().collect());
    }
    let report = load_report(path)?;
    match report.metrics.get("concepts.unique") {
        Some(repscope_core::data_model::Metric::Table(t)) => {
            let col = t.column_index("concept_id").ok_or_else(|| {
                Error::Format(format!("{}: concepts.unique has no concept_id column", path.display()))
            })?;
            t.rows
                .iter()
                .map(|r| match r[col] {
                    Cell::Int(id) => Ok(id),
                    _ => Err(Error::Format(format!("{}: non-integer concept id", path.display()))),
                })
                .collect()
        }
        _ => Err(Error::Format(format!(
            "{}: expected a JSON id array or a probe report",
            path.display()
        ))),
    }
}

fn venn(doc: &mut ReportDocument, a: &VennArgs) -> Result<()> {
    let sets = a
        .sets
        .iter()
        .map(|spec| {
            let (name, path) = spec
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("--set expects NAME=PATH, got '{spec}'")))?;
            doc.add_input(Path::new(path))?;
            Ok((name.to_string(), load_concept_set(Path::new(path))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let v = concept_probe::venn(&sets)?;
    let mut t = Table::new(["region", "size"]);
    for (sig, &n) in &v.region_sizes {
        t.push_row(vec![Cell::Text(sig.join("&")), Cell::from(n)])?;
    }
    doc.integer("venn.union_size", v.total() as i64)?;
    doc.table("venn.regions", t)
}

fn overlap(doc: &mut ReportDocument, a: &OverlapArgs) -> Result<()> {
    let fine = a
        .fine
        .iter()
        .map(|p| {
            doc.add_input(p)?;
            load_concept_set(p)
        })
        .collect::<Result<Vec<_>>>()?;
    doc.add_input(&a.zero)?;
    doc.add_input(&a.sup)?;
    let zero = load_concept_set(&a.zero)?;
    let sup = load_concept_set(&a.sup)?;
    let rows = concept_probe::overlap_trajectory(&fine, &zero, &sup)?;
    let mut t = Table::new([
        "epoch",
        "fine_size",
        "fine_only",
        "fine_zero",
        "fine_sup",
        "fine_zero_sup",
    ]);
    for (epoch, r) in rows.iter().enumerate() {
        t.push_row(vec![
            Cell::from(epoch),
            Cell::from(r.fine_size),
            Cell::from(r.fine_only),
            Cell::from(r.fine_zero),
            Cell::from(r.fine_sup),
            Cell::from(r.fine_zero_sup),
        ])?;
    }
    doc.table("overlap.trajectory", t)
}

fn cka_cmd(doc: &mut ReportDocument, a: &CkaArgs) -> Result<()> {
    let load_all = |doc: &mut ReportDocument, paths: &[std::path::PathBuf]| {
        paths
            .iter()
            .map(|p| {
                doc.add_input(p)?;
                load_activations(p)
            })
            .collect::<Result<Vec<_>>>()
    };
    let a_layers = load_all(doc, &a.a)?;
    let b_layers = load_all(doc, &a.b)?;
    let results = cka::cka_sweep(&a_layers, &b_layers)?;
    let mut t = Table::new(["layer", "layer_a", "layer_b", "n", "cka"]);
    for (i, r) in results.iter().enumerate() {
        let (la, lb) = r.layer_pair.clone().unwrap_or_default();
        t.push_row(vec![
            Cell::from(i),
            Cell::Text(la),
            Cell::Text(lb),
            Cell::from(r.n),
            Cell::from(r.value),
        ])?;
    }
    doc.text("cka.kernel", cka::KERNEL)?;
    doc.table("cka.layers", t)
}

fn interp(doc: &mut ReportDocument, a: &InterpArgs, out: Option<&Path>) -> Result<()> {
    let out = out.ok_or_else(|| Error::Validation("interp needs --out <dir>".into()))?;
    let theta0 = load_checkpoint(&a.theta0)?;
    let theta1 = load_checkpoint(&a.theta1)?;
    for dir in [&a.theta0, &a.theta1] {
        doc.add_input(&dir.join("index.json"))?;
    }
    let mut t = Table::new(["alpha", "directory", "n_tensors"]);
    match a.alpha {
        Some(alpha) => {
            let mixed = checkpoint_interp::interpolate(&theta0, &theta1, alpha)?;
            save_checkpoint(&mixed, out)?;
            t.push_row(vec![Cell::from(alpha), Cell::Text(out.display().to_string()), Cell::from(mixed.len())])?;
        }
        None => {
            for alpha in checkpoint_interp::default_alpha_grid() {
                let mixed = checkpoint_interp::interpolate(&theta0, &theta1, alpha)?;
                let dir = out.join(format!("alpha_{alpha:.1}"));
                save_checkpoint(&mixed, &dir)?;
                t.push_row(vec![Cell::from(alpha), Cell::Text(dir.display().to_string()), Cell::from(mixed.len())])?;
            }
        }
    }
    doc.table("interpolation.written", t)
}

fn sweep_report(a: &SweepReportArgs, command_line: Vec<String>, timestamp: String) -> Result<ReportDocument> {
    let per_alpha = a
        .entries
        .iter()
        .map(|spec| {
            let (alpha, path) = spec
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("--entry expects ALPHA=REPORT, got '{spec}'")))?;
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| Error::Validation(format!("invalid alpha '{alpha}'")))?;
            Ok((alpha, load_report(Path::new(path))?))
        })
        .collect::<Result<Vec<_>>>()?;
    checkpoint_interp::sweep_report(&per_alpha, command_line, timestamp)
}
