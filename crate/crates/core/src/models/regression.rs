use nalgebra::DMatrix;

use super::{class_support, Prediction, PredictionFlag};
use crate::aggregation::SignatureRow;
use crate::distribution::RelationDistribution;
use crate::error::{Error, Result};
use crate::ids::Vocabulary;

/// Ridge regression from the binary class vector to the dense relation
/// distribution, without intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionModel {
    pub vocabulary: Vocabulary,
    /// `n × m`, row-major by class.
    pub weights: Vec<f64>,
    pub l2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionFit {
    /// `‖XW − Y‖_F` over the training rows.
    pub residual: f64,
    pub min_norm_fallback: bool,
}

impl RegressionModel {
    /// Solves `(XᵀX + l2·I) W = XᵀY` for all relation columns at once.
    ///
    /// With `l2 == 0` the system is solved through an SVD, which yields the
    /// minimum-norm solution when the design is rank deficient. The normal
    /// matrix is dense `n × n`.
    pub fn fit_rows(vocab: &Vocabulary, rows: &[&SignatureRow], l2: f64) -> Result<(Self, RegressionFit)> {
        let n = vocab.n_classes();
        let m = vocab.n_relations();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DMatrix::<f64>::zeros(n, m);
        for row in rows {
            let cls = row.signature.classes();
            for &a in cls {
                for &b in cls {
                    gram[(a as usize, b as usize)] += 1.0;
                }
                for &(r, p) in row.observed.entries() {
                    rhs[(a as usize, r as usize)] += p;
                }
            }
        }

        let mut min_norm_fallback = false;
        let solution = if l2 > 0.0 {
            for i in 0..n {
                gram[(i, i)] += l2;
            }
            gram.cholesky()
                .ok_or_else(|| Error::Config("regularized normal matrix is not positive definite".into()))?
                .solve(&rhs)
        } else {
            let svd = gram.svd(true, true);
            let max_sv = svd.singular_values.max();
            let tol = max_sv * n as f64 * f64::EPSILON;
            let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
            if rank < n {
                min_norm_fallback = true;
                log::info!("design has rank {rank} < {n}; using minimum-norm solution");
            }
            svd.solve(&rhs, tol).map_err(|e| Error::Config(e.to_string()))?
        };

        let mut weights = vec![0.0; n * m];
        for c in 0..n {
            for r in 0..m {
                weights[c * m + r] = solution[(c, r)];
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence {
                epoch: 0,
                batch: 0,
                loss: f64::NAN,
            });
        }
        // Classes absent from training carry no information.
        for (c, &s) in class_support(n, rows).iter().enumerate() {
            if s == 0 {
                weights[c * m..(c + 1) * m].fill(0.0);
            }
        }
        let model = Self {
            vocabulary: vocab.clone(),
            weights,
            l2,
        };
        let residual = model.training_residual(rows);
        Ok((
            model,
            RegressionFit {
                residual,
                min_norm_fallback,
            },
        ))
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
    }

    /// `x·W` for the indicator vector of `classes`.
    pub fn raw_output(&self, classes: &[u32]) -> Vec<f64> {
        let m = self.vocabulary.n_relations();
        let n = self.vocabulary.n_classes();
        let mut out = vec![0.0; m];
        let mut seen: Vec<u32> = classes.iter().copied().filter(|&c| (c as usize) < n).collect();
        seen.sort_unstable();
        seen.dedup();
        for c in seen {
            let w = &self.weights[c as usize * m..(c as usize + 1) * m];
            for (o, &wi) in out.iter_mut().zip(w) {
                *o += wi;
            }
        }
        out
    }

    pub fn predict_indices(&self, classes: &[u32]) -> Prediction {
        clip_and_normalize(&self.raw_output(classes))
    }

    pub fn training_residual(&self, rows: &[&SignatureRow]) -> f64 {
        let m = self.vocabulary.n_relations();
        let mut sum = 0.0;
        for row in rows {
            let mut diff = self.raw_output(row.signature.classes());
            for &(r, p) in row.observed.entries() {
                diff[r as usize] -= p;
            }
            sum += diff[..m].iter().map(|d| d * d).sum::<f64>();
        }
        sum.sqrt()
    }
}

/// Clips negative components to zero and renormalizes; falls back to the
/// uniform distribution (flagged degenerate) when nothing is positive.
pub fn clip_and_normalize(raw: &[f64]) -> Prediction {
    match RelationDistribution::from_dense(raw) {
        Ok(distribution) => Prediction {
            distribution,
            flag: PredictionFlag::Normal,
        },
        Err(_) => Prediction {
            distribution: RelationDistribution::uniform(raw.len()),
            flag: PredictionFlag::Degenerate,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{ClassId, ClassSignature, RelationId};

    fn vocab(n: usize, m: usize) -> Vocabulary {
        Vocabulary::from_ids(
            (0..n).map(|i| ClassId::new(format!("c{i:03}")).unwrap()),
            (0..m).map(|i| RelationId::new(format!("r{i:03}")).unwrap()),
        )
        .unwrap()
    }

    fn row(classes: &[u32], counts: &[(u32, u64)]) -> SignatureRow {
        SignatureRow::new(
            ClassSignature::new(classes.iter().copied()).unwrap(),
            counts.iter().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn clipping_examples() {
        let p = clip_and_normalize(&[0.5, -0.1, 0.6]);
        assert_eq!(p.flag, PredictionFlag::Normal);
        assert_eq!(p.distribution.len(), 2);
        assert!((p.distribution.get(0) - 0.454_545_454_545_454_5).abs() < 1e-12);
        assert!((p.distribution.get(2) - 0.545_454_545_454_545_4).abs() < 1e-12);

        let p = clip_and_normalize(&[0.25, 0.75]);
        assert_eq!(p.distribution.entries(), &[(0, 0.25), (1, 0.75)]);

        let p = clip_and_normalize(&[-0.2, -0.1, 0.0]);
        assert_eq!(p.flag, PredictionFlag::Degenerate);
        assert_eq!(p.distribution, RelationDistribution::uniform(3));
    }

    #[test]
    fn one_row_one_class() {
        let rows = [row(&[0], &[(0, 4)])];
        let refs: Vec<&SignatureRow> = rows.iter().collect();
        let (m, _) = RegressionModel::fit_rows(&vocab(1, 1), &refs, 1e-3).unwrap();
        let p = m.predict_indices(&[0]);
        assert_eq!(p.distribution.entries(), &[(0, 1.0)]);
        assert_eq!(p.flag, PredictionFlag::Normal);
    }

    #[test]
    fn rank_deficient_uses_min_norm() {
        // Classes 0 and 1 always co-occur: columns of X are identical.
        let rows = [row(&[0, 1], &[(0, 1)]), row(&[0, 1, 2], &[(1, 1)])];
        let refs: Vec<&SignatureRow> = rows.iter().collect();
        let (m, fit) = RegressionModel::fit_rows(&vocab(3, 2), &refs, 0.0).unwrap();
        assert!(fit.min_norm_fallback);
        assert!(m.weights.iter().all(|w| w.is_finite()));
        // Minimum norm splits the shared effect evenly.
        assert!((m.weights[0] - m.weights[2]).abs() < 1e-12);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn unseen_class_has_zero_weights() {
        let rows = [row(&[0], &[(0, 1)])];
        let refs: Vec<&SignatureRow> = rows.iter().collect();
        let (m, _) = RegressionModel::fit_rows(&vocab(2, 1), &refs, 0.0).unwrap();
        assert_eq!(m.weights[1], 0.0);
        assert_eq!(m.predict_indices(&[1]).flag, PredictionFlag::Degenerate);
    }
}
