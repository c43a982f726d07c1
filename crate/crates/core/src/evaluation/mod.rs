//! Scoring predicted against observed relation distributions: per-row
//! metrics, grouped k-fold cross-validation and evaluation on later periods.

mod metrics;
pub mod report;

use std::thread;

use serde::{Deserialize, Serialize};

pub use metrics::{intersection_metric, weighted_jaccard, JaccardScores};

use crate::aggregation::{assign_folds, ReindexStats, SignatureDataset, SignatureRow};
use crate::error::{Error, Result};
use crate::models::{fit, fit_rows, ModelKind, PredictorModel, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub truncate_predicted: bool,
    pub truncate_observed: bool,
    pub threshold: f64,
    /// Selects the usage-weighted summary as the headline figure.
    pub weight_by_usage: bool,
    /// Apply the truncation settings to the intersection metric as well.
    pub truncate_intersection: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            truncate_predicted: true,
            truncate_observed: true,
            threshold: 0.95,
            weight_by_usage: false,
            truncate_intersection: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Scores of one held-out row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RowScore {
    pub jaccard: f64,
    pub false_neg: f64,
    pub false_pos: f64,
    pub intersection: f64,
    pub usage_total: u64,
    pub flagged: bool,
}

/// Mean metrics over a set of rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub jaccard: f64,
    pub false_neg: f64,
    pub false_pos: f64,
    pub intersection: f64,
    pub n_rows: usize,
    /// Predictions produced by a fallback path (unknown signature, clipped
    /// to nothing, or out of vocabulary).
    pub degenerate_count: usize,
}

impl MetricReport {
    /// Weighted mean of row scores; `weighted` uses each row's usage total.
    pub fn from_rows(rows: &[RowScore], weighted: bool) -> Self {
        let weight = |r: &RowScore| if weighted { r.usage_total as f64 } else { 1.0 };
        let total: f64 = rows.iter().map(weight).sum();
        let mean = |f: fn(&RowScore) -> f64| {
            if total > 0.0 {
                rows.iter().map(|r| weight(r) * f(r)).sum::<f64>() / total
            } else {
                0.0
            }
        };
        Self {
            jaccard: mean(|r| r.jaccard),
            false_neg: mean(|r| r.false_neg),
            false_pos: mean(|r| r.false_pos),
            intersection: mean(|r| r.intersection),
            n_rows: rows.len(),
            degenerate_count: rows.iter().filter(|r| r.flagged).count(),
        }
    }

    /// Unweighted mean over reports; counts are summed.
    pub fn mean_of(reports: &[MetricReport]) -> Self {
        let k = reports.len().max(1) as f64;
        let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        Self {
            jaccard: mean(|r| r.jaccard),
            false_neg: mean(|r| r.false_neg),
            false_pos: mean(|r| r.false_pos),
            intersection: mean(|r| r.intersection),
            n_rows: reports.iter().map(|r| r.n_rows).sum(),
            degenerate_count: reports.iter().map(|r| r.degenerate_count).sum(),
        }
    }
}

/// Unweighted (per-signature) and usage-weighted summaries side by side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub unweighted: MetricReport,
    pub weighted: MetricReport,
}

impl MetricPair {
    pub fn from_rows(rows: &[RowScore]) -> Self {
        Self {
            unweighted: MetricReport::from_rows(rows, false),
            weighted: MetricReport::from_rows(rows, true),
        }
    }

    pub fn headline(&self, cfg: &EvalConfig) -> &MetricReport {
        if cfg.weight_by_usage {
            &self.weighted
        } else {
            &self.unweighted
        }
    }
}

/// Scores one row's prediction against its observation.
pub fn score_row(model: &PredictorModel, row: &SignatureRow, cfg: &EvalConfig) -> Result<RowScore> {
    let pred = model.predict(&row.signature)?;
    let p_full = &pred.distribution;
    let o_full = &row.observed;
    let p = if cfg.truncate_predicted {
        p_full.truncate_to_mass(cfg.threshold)?
    } else {
        p_full.clone()
    };
    let o = if cfg.truncate_observed {
        o_full.truncate_to_mass(cfg.threshold)?
    } else {
        o_full.clone()
    };
    let j = weighted_jaccard(&p, &o)?;
    let intersection = if cfg.truncate_intersection {
        intersection_metric(&p, &o)
    } else {
        intersection_metric(p_full, o_full)
    };
    Ok(RowScore {
        jaccard: j.jaccard,
        false_neg: j.false_neg,
        false_pos: j.false_pos,
        intersection,
        usage_total: row.usage_total,
        flagged: pred.is_flagged(),
    })
}

pub fn score_rows<'a>(
    model: &PredictorModel,
    rows: impl IntoIterator<Item = &'a SignatureRow>,
    cfg: &EvalConfig,
) -> Result<Vec<RowScore>> {
    rows.into_iter().map(|r| score_row(model, r, cfg)).collect()
}

/// Evaluates a fitted model on every row of a dataset sharing its
/// vocabulary.
pub fn evaluate(model: &PredictorModel, ds: &SignatureDataset, cfg: &EvalConfig) -> Result<MetricPair> {
    cfg.validate()?;
    Ok(MetricPair::from_rows(&score_rows(model, &ds.rows, cfg)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_rows: usize,
    pub metrics: MetricPair,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvReport {
    pub model: ModelKind,
    pub k: usize,
    pub seed: u64,
    /// Mean over non-empty folds.
    pub mean: MetricPair,
    pub folds: Vec<FoldReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Folds trained concurrently. Results do not depend on it.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            jobs: 1,
        }
    }
}

fn run_fold(
    ds: &SignatureDataset,
    fold_of: &[usize],
    fold: usize,
    kind: ModelKind,
    cfg: &TrainConfig,
    eval: &EvalConfig,
) -> Result<Option<FoldReport>> {
    let test: Vec<&SignatureRow> = (0..ds.len()).filter(|&i| fold_of[i] == fold).map(|i| &ds.rows[i]).collect();
    if test.is_empty() {
        return Ok(None);
    }
    let train: Vec<&SignatureRow> = (0..ds.len()).filter(|&i| fold_of[i] != fold).map(|i| &ds.rows[i]).collect();
    let (model, _) = fit_rows(kind, &ds.vocabulary, &train, cfg)?;
    let scores = score_rows(&model, test.iter().copied(), eval)?;
    Ok(Some(FoldReport {
        fold,
        train_rows: train.len(),
        metrics: MetricPair::from_rows(&scores),
    }))
}

/// Grouped k-fold cross-validation: each fold's signatures are predicted by
/// a model trained on the other folds.
pub fn cross_validate(
    ds: &SignatureDataset,
    kind: ModelKind,
    cfg: &TrainConfig,
    eval: &EvalConfig,
    opts: CvOptions,
) -> Result<CvReport> {
    eval.validate()?;
    cfg.validate()?;
    let folds = assign_folds(ds, opts.k, opts.seed)?;
    let fold_of = &folds.fold_of;
    let wrap = |fold: usize| {
        move |e: Error| Error::Fold {
            fold,
            source: Box::new(e),
        }
    };

    let mut results: Vec<Option<FoldReport>> = Vec::with_capacity(opts.k);
    if opts.jobs <= 1 {
        for f in 0..opts.k {
            results.push(run_fold(ds, fold_of, f, kind, cfg, eval).map_err(wrap(f))?);
        }
    } else {
        let chunk: Vec<Vec<usize>> = (0..opts.jobs)
            .map(|j| (0..opts.k).filter(|f| f % opts.jobs == j).collect())
            .collect();
        let mut slots: Vec<Result<Option<FoldReport>>> = (0..opts.k).map(|_| Ok(None)).collect();
        thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|fs| {
                    s.spawn(move || {
                        fs.iter()
                            .map(|&f| (f, run_fold(ds, fold_of, f, kind, cfg, eval)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (f, r) in h.join().expect("fold worker panicked") {
                    slots[f] = r;
                }
            }
        });
        for (f, r) in slots.into_iter().enumerate() {
            results.push(r.map_err(wrap(f))?);
        }
    }

    let folds: Vec<FoldReport> = results.into_iter().flatten().collect();
    let unweighted: Vec<MetricReport> = folds.iter().map(|f| f.metrics.unweighted).collect();
    let weighted: Vec<MetricReport> = folds.iter().map(|f| f.metrics.weighted).collect();
    Ok(CvReport {
        model: kind,
        k: opts.k,
        seed: opts.seed,
        mean: MetricPair {
            unweighted: MetricReport::mean_of(&unweighted),
            weighted: MetricReport::mean_of(&weighted),
        },
        folds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemporalResult {
    pub label: String,
    pub metrics: MetricPair,
    pub reindex: ReindexStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemporalReport {
    pub model: ModelKind,
    /// The training set scored by its own model (an upper reference).
    pub self_eval: MetricPair,
    pub periods: Vec<TemporalResult>,
}

/// Trains once on `train` and scores each later dataset in full, after
/// moving it onto the training vocabulary.
pub fn temporal_eval(
    train: &SignatureDataset,
    future: &[(String, SignatureDataset)],
    kind: ModelKind,
    cfg: &TrainConfig,
    eval: &EvalConfig,
) -> Result<TemporalReport> {
    eval.validate()?;
    let (model, _) = fit(kind, train, cfg)?;
    temporal_eval_model(&model, train, future, eval)
}

/// Like [`temporal_eval`] with an already-fitted model.
pub fn temporal_eval_model(
    model: &PredictorModel,
    train: &SignatureDataset,
    future: &[(String, SignatureDataset)],
    eval: &EvalConfig,
) -> Result<TemporalReport> {
    let vocab = model.vocabulary();
    let self_eval = evaluate(model, &train.reindex(vocab).0, eval)?;
    let mut periods = Vec::with_capacity(future.len());
    for (label, ds) in future {
        let overlap = ds
            .vocabulary
            .relations()
            .iter()
            .any(|r| vocab.relation_index(r.as_str()).is_some());
        if !overlap {
            return Err(Error::Config(format!(
                "dataset {label} shares no relation with the training vocabulary"
            )));
        }
        let (re, stats) = ds.reindex(vocab);
        if stats.dropped_classes > 0 || stats.dropped_relations > 0 {
            log::info!(
                "{label}: dropped {} unseen classes, {} unseen relations ({} clauses)",
                stats.dropped_classes,
                stats.dropped_relations,
                stats.dropped_count
            );
        }
        periods.push(TemporalResult {
            label: label.clone(),
            metrics: evaluate(model, &re, eval)?,
            reindex: stats,
        });
    }
    Ok(TemporalReport {
        model: model.kind(),
        self_eval,
        periods,
    })
}
