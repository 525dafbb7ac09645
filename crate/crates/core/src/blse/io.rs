//! JSON model documents. Matrices are row-major nested arrays; floats use
//! shortest round-trip decimals, so a reload is bit-exact.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::BlseModel;
use crate::corpus::Label;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: u32,
    d: usize,
    d_prime: usize,
    k: usize,
    label_order: [Label; 2],
    alpha: f64,
    ablate_target_matrix: bool,
    source_projection: Vec<Vec<f64>>,
    target_projection: Vec<Vec<f64>>,
    classifier: Vec<Vec<f64>>,
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(field: &str, rows: Vec<Vec<f64>>, expected_rows: (usize, &str), expected_cols: (usize, &str)) -> Result<Array2<f64>> {
    let shape_err = |message: String| Error::Shape {
        field: field.to_string(),
        message,
    };
    if rows.len() != expected_rows.0 {
        return Err(shape_err(format!(
            "has {} rows but {} = {}",
            rows.len(),
            expected_rows.1,
            expected_rows.0
        )));
    }
    let mut data = Vec::with_capacity(expected_rows.0 * expected_cols.0);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != expected_cols.0 {
            return Err(shape_err(format!(
                "row {i} has {} columns but {} = {}",
                row.len(),
                expected_cols.1,
                expected_cols.0
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(shape_err(format!("row {i} contains non-finite values")));
        }
        data.extend(row);
    }
    Ok(Array2::from_shape_vec((expected_rows.0, expected_cols.0), data).expect("shape checked"))
}

impl BlseModel {
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            d: self.source_projection.nrows(),
            d_prime: self.target_projection.nrows(),
            k: self.joint_dim(),
            label_order: Label::ORDER,
            alpha: self.alpha,
            ablate_target_matrix: self.ablate_target_matrix,
            source_projection: to_rows(&self.source_projection),
            target_projection: to_rows(&self.target_projection),
            classifier: to_rows(&self.classifier),
        };
        serde_json::to_string_pretty(&doc).expect("finite model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {} (expected {MODEL_FORMAT_VERSION})",
                doc.version
            )));
        }
        if doc.label_order != Label::ORDER {
            return Err(Error::Format("label_order must be [\"pos\", \"neg\"]".into()));
        }
        if !(0.0..=1.0).contains(&doc.alpha) {
            return Err(Error::Format(format!("alpha {} outside [0, 1]", doc.alpha)));
        }
        let source_projection = from_rows("source_projection", doc.source_projection, (doc.d, "d"), (doc.k, "k"))?;
        let target_projection = from_rows("target_projection", doc.target_projection, (doc.d_prime, "d_prime"), (doc.k, "k"))?;
        let classifier = from_rows("classifier", doc.classifier, (doc.k, "k"), (2, "label count"))?;
        if doc.ablate_target_matrix && doc.d != doc.d_prime {
            return Err(Error::Shape {
                field: "d_prime".into(),
                message: "an ablated model needs d_prime = d".into(),
            });
        }
        Ok(BlseModel {
            source_projection,
            target_projection,
            classifier,
            ablate_target_matrix: doc.ablate_target_matrix,
            alpha: doc.alpha,
        })
    }
}

pub fn save_model(model: &BlseModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BlseModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BlseModel::from_json(&text)
}
