//! Versioned JSON model files:
//! `{format_version, kind, classes, relations, params}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CombineMode, FrequencyModel, ModelKind, NeuralModel, PredictorModel, RegressionModel};
use crate::distribution::RelationCounts;
use crate::error::{Error, Result};
use crate::ids::{ClassId, RelationId, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    classes: Vec<ClassId>,
    relations: Vec<RelationId>,
    params: Value,
}

#[derive(Serialize, Deserialize)]
struct FrequencyParams {
    mode: CombineMode,
    fallback: bool,
    /// class index -> list of `[relation index, count]`
    per_class: BTreeMap<u32, Vec<(u32, u64)>>,
    global: Vec<(u32, u64)>,
}

#[derive(Serialize, Deserialize)]
struct RegressionParams {
    l2: f64,
    /// `n × m`
    weights: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct NeuralParams {
    hidden: usize,
    /// `h × n`
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    /// `m × h`
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    class_support: Vec<u32>,
}

fn rows_of(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

fn flat_of(rows: Vec<Vec<f64>>, nrows: usize, ncols: usize, what: &str) -> Result<Vec<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{what} is not {nrows} × {ncols}")));
    }
    Ok(rows.into_iter().flatten().collect())
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("model contains non-finite parameters".into()));
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

fn encode(model: &PredictorModel) -> Result<ModelFile> {
    let vocab = model.vocabulary();
    let params = match model {
        PredictorModel::Frequency(m) => to_value(&FrequencyParams {
            mode: m.mode,
            fallback: m.fallback,
            per_class: m
                .per_class
                .iter()
                .map(|(&c, counts)| (c, counts.iter().map(|(&r, &n)| (r, n)).collect()))
                .collect(),
            global: m.global.iter().map(|(&r, &n)| (r, n)).collect(),
        })?,
        PredictorModel::Regression(m) => {
            check_finite(&m.weights)?;
            to_value(&RegressionParams {
                l2: m.l2,
                weights: rows_of(&m.weights, vocab.n_relations()),
            })?
        }
        PredictorModel::Neural(m) => {
            check_finite(m.parameters().iter())?;
            let n = vocab.n_classes();
            let h = m.hidden;
            let w1 = (0..h)
                .map(|j| (0..n).map(|c| m.w_in[c * h + j]).collect())
                .collect();
            to_value(&NeuralParams {
                hidden: h,
                w1,
                b1: m.b_in.clone(),
                w2: rows_of(&m.w_out, h),
                b2: m.b_out.clone(),
                class_support: m.class_support.clone(),
            })?
        }
    };
    Ok(ModelFile {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        classes: vocab.classes().to_vec(),
        relations: vocab.relations().to_vec(),
        params,
    })
}

fn decode(file: ModelFile) -> Result<PredictorModel> {
    let vocabulary = Vocabulary::from_sorted(file.classes, file.relations)?;
    let n = vocabulary.n_classes();
    let m = vocabulary.n_relations();
    let bad = |e: serde_json::Error| Error::Format(format!("bad {} parameters: {e}", file.kind));
    let in_range = |c: u32, limit: usize, what: &str| {
        if (c as usize) < limit {
            Ok(())
        } else {
            Err(Error::Format(format!("{what} index {c} out of range")))
        }
    };
    Ok(match file.kind {
        ModelKind::Frequency => {
            let p: FrequencyParams = serde_json::from_value(file.params).map_err(bad)?;
            let mut per_class = BTreeMap::new();
            for (c, counts) in p.per_class {
                in_range(c, n, "class")?;
                let counts: RelationCounts = counts.into_iter().collect();
                for &r in counts.keys() {
                    in_range(r, m, "relation")?;
                }
                per_class.insert(c, counts);
            }
            let global: RelationCounts = p.global.into_iter().collect();
            for &r in global.keys() {
                in_range(r, m, "relation")?;
            }
            PredictorModel::Frequency(FrequencyModel {
                vocabulary,
                per_class,
                global,
                mode: p.mode,
                fallback: p.fallback,
            })
        }
        ModelKind::Regression => {
            let p: RegressionParams = serde_json::from_value(file.params).map_err(bad)?;
            let weights = flat_of(p.weights, n, m, "weights")?;
            check_finite(&weights)?;
            PredictorModel::Regression(RegressionModel {
                vocabulary,
                weights,
                l2: p.l2,
            })
        }
        ModelKind::Neural => {
            let p: NeuralParams = serde_json::from_value(file.params).map_err(bad)?;
            let h = p.hidden;
            if h == 0 {
                return Err(Error::Format("hidden width must be positive".into()));
            }
            let w1 = flat_of(p.w1, h, n, "w1")?;
            let mut w_in = vec![0.0; n * h];
            for j in 0..h {
                for c in 0..n {
                    w_in[c * h + j] = w1[j * n + c];
                }
            }
            let w_out = flat_of(p.w2, m, h, "w2")?;
            if p.b1.len() != h || p.b2.len() != m || p.class_support.len() != n {
                return Err(Error::Format("bias or support length mismatch".into()));
            }
            let model = NeuralModel {
                vocabulary,
                hidden: h,
                w_in,
                b_in: p.b1,
                w_out,
                b_out: p.b2,
                class_support: p.class_support,
            };
            check_finite(model.parameters().iter())?;
            PredictorModel::Neural(model)
        }
    })
}

/// Serializes a model to its JSON document.
pub fn model_to_string(model: &PredictorModel) -> Result<String> {
    serde_json::to_string(&encode(model)?).map_err(|e| Error::Format(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<PredictorModel> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    match value.get("format_version").and_then(Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Format(format!(
                "model format_version {v} is not supported (this build reads version {FORMAT_VERSION})"
            )))
        }
        None => return Err(Error::Format("model file lacks format_version".into())),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Format(format!("model file: {e}")))?;
    decode(file)
}

pub fn save_model(model: &PredictorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model_to_string(model)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PredictorModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{SignatureDataset, SignatureRow};
    use crate::ids::ClassSignature;
    use crate::models::{fit, TrainConfig};

    fn dataset() -> SignatureDataset {
        let vocab = Vocabulary::from_ids(
            ["a", "b", "c"].map(|c| ClassId::new(c).unwrap()),
            ["r0", "r1", "r2", "r3"].map(|r| RelationId::new(r).unwrap()),
        )
        .unwrap();
        let rows = vec![
            SignatureRow::new(ClassSignature::new([0]).unwrap(), [(0, 5), (1, 2)].into()).unwrap(),
            SignatureRow::new(ClassSignature::new([0, 1]).unwrap(), [(1, 3), (2, 4)].into()).unwrap(),
            SignatureRow::new(ClassSignature::new([2]).unwrap(), [(3, 9), (0, 1)].into()).unwrap(),
        ];
        SignatureDataset::new(vocab, rows).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ds = dataset();
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        for kind in ModelKind::ALL {
            let (model, _) = fit(kind, &ds, &cfg).unwrap();
            let text = model_to_string(&model).unwrap();
            let back = model_from_str(&text).unwrap();
            assert_eq!(back, model, "{kind}");
            for sig in [vec![0], vec![0, 1], vec![1, 2], vec![2]] {
                assert_eq!(
                    back.predict_indices(&sig).unwrap(),
                    model.predict_indices(&sig).unwrap()
                );
            }
            assert_eq!(model_to_string(&back).unwrap(), text);
        }
    }

    #[test]
    fn truncated_file_is_format_error() {
        let (model, _) = fit(ModelKind::Frequency, &dataset(), &TrainConfig::default()).unwrap();
        let text = model_to_string(&model).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(model_from_str(cut), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_version_names_both_versions() {
        let (model, _) = fit(ModelKind::Frequency, &dataset(), &TrainConfig::default()).unwrap();
        let text = model_to_string(&model)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":7");
        match model_from_str(&text) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains('7') && msg.contains('1'), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
