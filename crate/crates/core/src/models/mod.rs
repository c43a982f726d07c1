//! Class-signature to relation-distribution predictors.
//!
//! Three predictors share one interface: a per-class frequency baseline,
//! ridge regression on the binary class vector, and a one-hidden-layer
//! softmax network trained on KL divergence.

mod frequency;
mod neural;
mod persist;
mod regression;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use frequency::{CombineMode, FrequencyModel};
pub use neural::{FitHistory, NeuralGradient, NeuralModel, TrainExample};
pub use persist::{load_model, model_from_str, model_to_string, save_model, FORMAT_VERSION};
pub use regression::{clip_and_normalize, RegressionFit, RegressionModel};

use crate::aggregation::{SignatureDataset, SignatureRow};
use crate::distribution::RelationDistribution;
use crate::error::{Error, Result};
use crate::ids::{ClassId, ClassSignature, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Frequency,
    Regression,
    Neural,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Frequency, ModelKind::Regression, ModelKind::Neural];

    /// Short label used in reports and on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::Frequency => "freq",
            ModelKind::Regression => "regr",
            ModelKind::Neural => "nn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" | "frequency" => Ok(ModelKind::Frequency),
            "regr" | "regression" => Ok(ModelKind::Regression),
            "nn" | "neural" => Ok(ModelKind::Neural),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected freq, regr or nn)"
            ))),
        }
    }
}

/// How a prediction was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionFlag {
    Normal,
    /// No class was known; the frequency model fell back to the global
    /// training marginal.
    Fallback,
    /// Regression output had no positive component; uniform was returned.
    Degenerate,
    /// No class was known; the network ran on the zero input vector.
    OutOfVocabulary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub distribution: RelationDistribution,
    pub flag: PredictionFlag,
}

impl Prediction {
    pub fn is_flagged(&self) -> bool {
        self.flag != PredictionFlag::Normal
    }
}

/// Fitting hyper-parameters. Unused fields are ignored by models that do not
/// need them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Ridge coefficient for regression.
    pub l2: f64,
    /// Truncation threshold used when reporting.
    pub threshold: f64,
    pub frequency_fallback: bool,
    pub frequency_mode: CombineMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden: 10,
            l2: 1e-3,
            threshold: 0.95,
            frequency_fallback: true,
            frequency_mode: CombineMode::SumCounts,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if self.hidden == 0 {
            return bad("hidden");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config("threshold must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Summary of one fit, for logs and manifests.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FitSummary {
    pub kind: Option<ModelKind>,
    pub rows: usize,
    pub parameters: usize,
    /// Regression: Frobenius norm of the training residual.
    pub residual: Option<f64>,
    /// Regression: the normal equations were singular and the minimum-norm
    /// solution was used.
    pub min_norm_fallback: bool,
    /// Network: full-data loss before and after training.
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Any of the three fitted predictors.
#[derive(Clone, Debug, PartialEq)]
pub enum PredictorModel {
    Frequency(FrequencyModel),
    Regression(RegressionModel),
    Neural(NeuralModel),
}

impl PredictorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            PredictorModel::Frequency(_) => ModelKind::Frequency,
            PredictorModel::Regression(_) => ModelKind::Regression,
            PredictorModel::Neural(_) => ModelKind::Neural,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        match self {
            PredictorModel::Frequency(m) => &m.vocabulary,
            PredictorModel::Regression(m) => &m.vocabulary,
            PredictorModel::Neural(m) => &m.vocabulary,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            PredictorModel::Frequency(m) => m.parameter_count(),
            PredictorModel::Regression(m) => m.parameter_count(),
            PredictorModel::Neural(m) => m.parameter_count(),
        }
    }

    /// Predicts over class indices of the model vocabulary. Out-of-range
    /// indices are ignored; the slice may be empty.
    pub fn predict_indices(&self, classes: &[u32]) -> Result<Prediction> {
        match self {
            PredictorModel::Frequency(m) => m.predict_indices(classes),
            PredictorModel::Regression(m) => Ok(m.predict_indices(classes)),
            PredictorModel::Neural(m) => Ok(m.predict_indices(classes)),
        }
    }

    pub fn predict(&self, signature: &ClassSignature) -> Result<Prediction> {
        self.predict_indices(signature.classes())
    }

    /// Predicts for a set of class ids; ids outside the vocabulary are
    /// dropped.
    pub fn predict_classes<'a>(
        &self,
        classes: impl IntoIterator<Item = &'a ClassId>,
    ) -> Result<Prediction> {
        let vocab = self.vocabulary();
        let idx: Vec<u32> = classes
            .into_iter()
            .filter_map(|c| vocab.class_index(c.as_str()))
            .collect();
        self.predict_indices(&idx)
    }
}

/// Fits a model of the given kind on all rows of `ds`.
pub fn fit(kind: ModelKind, ds: &SignatureDataset, cfg: &TrainConfig) -> Result<(PredictorModel, FitSummary)> {
    let rows: Vec<&SignatureRow> = ds.rows.iter().collect();
    fit_rows(kind, &ds.vocabulary, &rows, cfg)
}

/// Fits on a subset of rows while keeping the full vocabulary, so that held
/// out rows share the model's index space.
pub fn fit_rows(
    kind: ModelKind,
    vocab: &Vocabulary,
    rows: &[&SignatureRow],
    cfg: &TrainConfig,
) -> Result<(PredictorModel, FitSummary)> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::Config("cannot fit on an empty dataset".into()));
    }
    let (model, mut summary) = match kind {
        ModelKind::Frequency => {
            let m = FrequencyModel::fit_rows(vocab, rows, cfg.frequency_mode, cfg.frequency_fallback);
            (PredictorModel::Frequency(m), FitSummary::default())
        }
        ModelKind::Regression => {
            let (m, fit) = RegressionModel::fit_rows(vocab, rows, cfg.l2)?;
            let summary = FitSummary {
                residual: Some(fit.residual),
                min_norm_fallback: fit.min_norm_fallback,
                ..Default::default()
            };
            (PredictorModel::Regression(m), summary)
        }
        ModelKind::Neural => {
            let (m, hist) = NeuralModel::fit_rows(vocab, rows, cfg)?;
            let summary = FitSummary {
                initial_loss: Some(hist.initial_loss),
                final_loss: Some(hist.final_loss),
                epoch_losses: hist.epoch_losses,
                ..Default::default()
            };
            (PredictorModel::Neural(m), summary)
        }
    };
    summary.kind = Some(kind);
    summary.rows = rows.len();
    summary.parameters = model.parameter_count();
    Ok((model, summary))
}

pub fn fit_frequency(ds: &SignatureDataset) -> FrequencyModel {
    let rows: Vec<&SignatureRow> = ds.rows.iter().collect();
    FrequencyModel::fit_rows(&ds.vocabulary, &rows, CombineMode::SumCounts, true)
}

pub fn fit_regression(ds: &SignatureDataset, cfg: &TrainConfig) -> Result<(RegressionModel, RegressionFit)> {
    let rows: Vec<&SignatureRow> = ds.rows.iter().collect();
    RegressionModel::fit_rows(&ds.vocabulary, &rows, cfg.l2)
}

pub fn fit_neural(ds: &SignatureDataset, cfg: &TrainConfig) -> Result<(NeuralModel, FitHistory)> {
    cfg.validate()?;
    let rows: Vec<&SignatureRow> = ds.rows.iter().collect();
    NeuralModel::fit_rows(&ds.vocabulary, &rows, cfg)
}

/// Parameter count of a ridge model with `n` classes and `m` relations.
pub fn regression_parameter_count(n: usize, m: usize) -> usize {
    n * m
}

/// Parameter count of a one-hidden-layer network, including biases.
pub fn neural_parameter_count(n: usize, m: usize, h: usize) -> usize {
    h * (n + m) + h + m
}

/// Number of training rows mentioning each class.
pub(crate) fn class_support(n: usize, rows: &[&SignatureRow]) -> Vec<u32> {
    let mut support = vec![0u32; n];
    for row in rows {
        for &c in row.signature.classes() {
            support[c as usize] += 1;
        }
    }
    support
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.short_name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn parameter_counts_at_scale() {
        // 4,400 classes by 1,300 relations: ~6M regression parameters.
        let p = regression_parameter_count(4400, 1300);
        assert_eq!(p, 5_720_000);
        assert!((5_500_000..6_500_000).contains(&p));
        // 9,400 by 2,100: ~20M regression parameters and ~115k network
        // parameters with a 10-unit hidden layer.
        assert!((19_000_000..21_000_000).contains(&regression_parameter_count(9400, 2100)));
        let nn = neural_parameter_count(9400, 2100, 10);
        assert_eq!(nn, 10 * 11_500 + 10 + 2100);
        assert!((110_000..120_000).contains(&nn));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            threshold: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
