//! Subcommand implementations.

use std::fs;
use std::path::Path;
use std::time::Instant;

use docqs::binarize;
use docqs::dataset::{
    build_features, build_target, read_features_csv, read_manifest, write_features_csv,
    FeatureRow, TrainingSet,
};
use docqs::imaging::{load_binary, load_gray, save_binary};
use docqs::metrics::{all_metrics, MetricReport};
use docqs::surrogates::{
    ann_fit, ensemble_fit, evaluate as evaluate_vectors, gp_fit, load_model, save_model, svr_fit,
    EvalReport, Model, SvrTuning,
};

use crate::errors::CliError;
use crate::ModelType;

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(path)
        .to_string()
}

pub fn metrics(pred_path: &str, gt_path: &str) -> Result<(), CliError> {
    let pred = load_binary(pred_path)?;
    let gt = load_binary(gt_path)?;
    let report = all_metrics(&pred, &gt)?;
    println!("{}", MetricReport::CSV_HEADER);
    println!("{}", report.csv_row(&file_stem(pred_path)));
    Ok(())
}

pub fn build(manifest_path: &str, out_path: &str) -> Result<(), CliError> {
    let entries = read_manifest(manifest_path)?;
    let mut rows = Vec::new();
    for entry in &entries {
        let (Some(processed_path), Some(gt_path)) = (&entry.processed, &entry.gt) else {
            log::warn!(
                "skipping {}: missing {}",
                entry.id,
                if entry.processed.is_none() { "processed image" } else { "ground truth" }
            );
            continue;
        };
        let original = load_gray(&entry.original)?;
        let processed = load_binary(processed_path)?;
        let gt = load_binary(gt_path)?;
        let mut row = build_features(&entry.id, &original, &processed)?;
        row.target = Some(build_target(&processed, &gt)?);
        rows.push(row);
    }
    write_features_csv(out_path, &rows)?;
    log::info!("wrote {} feature rows to {}", rows.len(), out_path);
    Ok(())
}

pub fn train(
    features_path: &str,
    model_type: ModelType,
    out_path: &str,
    smo_budget: usize,
    hidden: usize,
    max_epochs: usize,
    seed: u64,
) -> Result<(), CliError> {
    let rows = read_features_csv(features_path)?;
    let ts = TrainingSet::from_rows(&rows)?;
    let start = Instant::now();
    let model = match model_type {
        ModelType::Gp => Model::Gp(gp_fit(&ts, seed)?),
        ModelType::Svr => Model::Svr(svr_fit(&ts, SvrTuning::Auto, smo_budget, seed)?),
        ModelType::Ann => Model::Ann(ann_fit(&ts, hidden, seed, max_epochs)?),
        ModelType::Ensemble => Model::Ensemble(ensemble_fit(&ts, smo_budget, seed)?),
    };
    eprintln!("training time: {:.4} s", start.elapsed().as_secs_f64());
    save_model(&model, out_path)?;
    log::info!(
        "trained {} on {} rows -> {}",
        model.type_name(),
        ts.len(),
        out_path
    );
    Ok(())
}

pub fn predict(model_path: &str, features_path: &str, out_path: &str) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let rows = read_features_csv(features_path)?;
    let start = Instant::now();
    let predictions: Vec<f64> = rows.iter().map(|row| model.predict(&row.inputs)).collect();
    eprintln!("prediction time: {:.4} s", start.elapsed().as_secs_f64());
    let mut out = String::from("id,prediction\n");
    for (row, value) in rows.iter().zip(&predictions) {
        if !(0.0..=100.0).contains(value) {
            log::warn!("prediction for {} is out of [0, 100]: {value}", row.id);
        }
        out.push_str(&format!("{},{}\n", csv_field(&row.id), value));
    }
    fs::write(out_path, out)?;
    Ok(())
}

pub fn evaluate(predictions_path: &str, targets_path: &str) -> Result<(), CliError> {
    let predictions = read_predictions_csv(predictions_path)?;
    let targets = read_features_csv(targets_path)?;
    let mut pred = Vec::with_capacity(predictions.len());
    let mut actual = Vec::with_capacity(predictions.len());
    for (id, value) in &predictions {
        let row: &FeatureRow = targets
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| CliError::usage(format!("prediction id {id:?} not in targets")))?;
        let target = row
            .target
            .ok_or_else(|| CliError::usage(format!("target missing for id {id:?}")))?;
        pred.push(*value);
        actual.push(target);
    }
    let report: EvalReport = evaluate_vectors(&pred, &actual)?;
    println!("{}", EvalReport::CSV_HEADER);
    println!("{}", report.csv_row());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn auto_binarize(
    image_path: &str,
    model_path: &str,
    out_path: &str,
    trace_path: Option<&str>,
    budget: usize,
    w_bounds: (usize, usize),
    k_bounds: (f64, f64),
    seed: u64,
) -> Result<(), CliError> {
    let image = load_gray(image_path)?;
    let model = load_model(model_path)?;
    let result = binarize::auto_binarize(&image, &model, w_bounds, k_bounds, budget, seed)?;
    save_binary(&result.image, out_path)?;
    if let Some(path) = trace_path {
        fs::write(path, result.trace_csv())?;
    }
    println!("w,k,predicted_f_measure");
    println!(
        "{},{},{}",
        result.params.window(),
        result.params.k(),
        result.predicted_f_measure
    );
    Ok(())
}

fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn read_predictions_csv(path: &str) -> Result<Vec<(String, f64)>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {path}: {e}")))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::usage(format!("{path}: {e}")))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != ["id", "prediction"] {
        return Err(CliError::usage(format!(
            "{path}: bad header {:?}, expected id,prediction",
            got.join(",")
        )));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::usage(format!("{path}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        let raw = record.get(1).unwrap_or("").trim();
        let value = raw.parse::<f64>().map_err(|_| {
            CliError::usage(format!("{path} line {line}: bad prediction {raw:?}"))
        })?;
        out.push((id, value));
    }
    Ok(out)
}
