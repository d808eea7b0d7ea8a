use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pipeline::{run_pipeline, PipelineSpec};
use super::MlError;
use crate::stats::loocv_linear;

/// A named subjects × features matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub name: String,
    pub subject_ids: Vec<String>,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub subject_ids: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub modality: String,
    pub pipeline: String,
    pub variance_explained: f64,
    pub mse: f64,
    pub mae: f64,
    pub flags: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRow {
    pub modality: String,
    pub pipeline: String,
    pub variance_explained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleFeatureRow {
    pub feature: String,
    pub variance_explained: f64,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub best: Vec<BestRow>,
    pub single_feature: Vec<SingleFeatureRow>,
}

impl BenchmarkTable {
    /// Median variance explained over all multivariate rows.
    pub fn median_multivariate(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.variance_explained).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(crate::linalg::quantile_sorted(&v, 0.5))
    }

    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<(), MlError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every spec on every modality and scores each single feature with
/// leave-one-out simple regression. Single features follow the target's
/// subject order.
pub fn run_benchmark(
    specs: &[PipelineSpec],
    modalities: &[FeatureSet],
    target: &Target,
    single_features: &[(String, Vec<f64>)],
) -> Result<BenchmarkTable, MlError> {
    for m in modalities {
        if m.subject_ids.len() != target.subject_ids.len() || m.matrix.nrows() != m.subject_ids.len() {
            return Err(MlError::Shape(format!(
                "{}: {} ids, {} rows, target has {}",
                m.name,
                m.subject_ids.len(),
                m.matrix.nrows(),
                target.subject_ids.len()
            )));
        }
        if let Some(row) = m.subject_ids.iter().zip(&target.subject_ids).position(|(a, b)| a != b) {
            return Err(MlError::Misaligned {
                modality: m.name.clone(),
                row,
            });
        }
    }
    let mut rows = Vec::new();
    let mut best = Vec::new();
    for m in modalities {
        let mut top: Option<BestRow> = None;
        for spec in specs {
            let r = run_pipeline(spec, &m.matrix, &target.values)?;
            log::info!("{} / {}: {:.3}%", m.name, spec.name, r.variance_explained);
            if top.as_ref().is_none_or(|t| r.variance_explained > t.variance_explained) {
                top = Some(BestRow {
                    modality: m.name.clone(),
                    pipeline: spec.name.clone(),
                    variance_explained: r.variance_explained,
                });
            }
            rows.push(BenchmarkRow {
                modality: m.name.clone(),
                pipeline: spec.name.clone(),
                variance_explained: r.variance_explained,
                mse: r.mse,
                mae: r.mae,
                flags: r.flags.join(";"),
            });
        }
        best.extend(top);
    }
    let single_feature = single_features
        .iter()
        .map(|(name, x)| {
            if x.len() != target.values.len() {
                return Err(MlError::Shape(format!("single feature {name} has {} values", x.len())));
            }
            let r = loocv_linear(x, &target.values)?;
            let n = x.len() as f64;
            Ok(SingleFeatureRow {
                feature: name.clone(),
                variance_explained: r.variance_explained,
                mse: r.predictions.iter().zip(&r.truths).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n,
                mae: r.predictions.iter().zip(&r.truths).map(|(p, t)| (p - t).abs()).sum::<f64>() / n,
            })
        })
        .collect::<Result<_, MlError>>()?;
    Ok(BenchmarkTable {
        rows,
        best,
        single_feature,
    })
}

/// Reads `subject_id,f1,f2,...`; empty cells become NaN.
pub fn read_feature_csv<R: Read>(name: &str, reader: R) -> Result<FeatureSet, MlError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec?;
        let d = rec.len().saturating_sub(1);
        if *width.get_or_insert(d) != d {
            return Err(MlError::Shape(format!("row {} has {d} features", ids.len())));
        }
        ids.push(rec.get(0).unwrap_or_default().to_string());
        for cell in rec.iter().skip(1) {
            values.push(if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>()
                    .map_err(|_| MlError::Parse(format!("{cell:?} is not a number")))?
            });
        }
    }
    let d = width.unwrap_or(0);
    Ok(FeatureSet {
        name: name.to_string(),
        matrix: DMatrix::from_row_slice(ids.len(), d, &values),
        subject_ids: ids,
    })
}

#[derive(Debug, Deserialize)]
struct SpecFile {
    pipelines: Vec<PipelineSpec>,
}

/// Loads `pipelines = [...]` from a TOML or JSON file, chosen by extension.
pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<PipelineSpec>, MlError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: SpecFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| MlError::Parse(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| MlError::Parse(e.to_string()))?
    };
    for s in &file.pipelines {
        s.validate()?;
    }
    Ok(file.pipelines)
}
