use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{class_support, Prediction, PredictionFlag, TrainConfig};
use crate::aggregation::SignatureRow;
use crate::distribution::RelationDistribution;
use crate::error::{Error, Result};
use crate::ids::Vocabulary;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-7;

/// One training row: active class indices and a sparse target distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainExample {
    pub classes: Vec<u32>,
    pub target: Vec<(u32, f64)>,
}

impl TrainExample {
    pub fn from_row(row: &SignatureRow) -> Self {
        Self {
            classes: row.signature.classes().to_vec(),
            target: row.observed.entries().to_vec(),
        }
    }
}

/// `p = softmax(W2 · relu(W1 · x + b1) + b2)` over a binary class vector `x`.
///
/// The input weights are stored class-major (`n × h`, the transpose of
/// `W1`) because inputs are sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralModel {
    pub vocabulary: Vocabulary,
    pub hidden: usize,
    /// `n × h`, row `c` is column `c` of `W1`.
    pub w_in: Vec<f64>,
    /// `h`
    pub b_in: Vec<f64>,
    /// `m × h`
    pub w_out: Vec<f64>,
    /// `m`
    pub b_out: Vec<f64>,
    /// Training rows per class; classes with zero support are ignored at
    /// prediction time.
    pub class_support: Vec<u32>,
}

/// Gradient with the same layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralGradient {
    pub w_in: Vec<f64>,
    pub b_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl NeuralGradient {
    fn zeros_like(m: &NeuralModel) -> Self {
        Self {
            w_in: vec![0.0; m.w_in.len()],
            b_in: vec![0.0; m.b_in.len()],
            w_out: vec![0.0; m.w_out.len()],
            b_out: vec![0.0; m.b_out.len()],
        }
    }

    fn clear(&mut self) {
        for v in [&mut self.w_in, &mut self.b_in, &mut self.w_out, &mut self.b_out] {
            v.fill(0.0);
        }
    }

    /// Flattened in the order of [`NeuralModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w_in, &self.b_in, &self.w_out, &self.b_out]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitHistory {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Scratch buffers for one forward/backward pass.
struct Pass {
    z: Vec<f64>,
    a: Vec<f64>,
    logits: Vec<f64>,
    p: Vec<f64>,
    dlogits: Vec<f64>,
    da: Vec<f64>,
}

impl Pass {
    fn new(h: usize, m: usize) -> Self {
        Self {
            z: vec![0.0; h],
            a: vec![0.0; h],
            logits: vec![0.0; m],
            p: vec![0.0; m],
            dlogits: vec![0.0; m],
            da: vec![0.0; h],
        }
    }
}

impl NeuralModel {
    /// Glorot-uniform weights and zero biases.
    pub fn new_random(vocab: &Vocabulary, hidden: usize, rng: &mut impl Rng) -> Self {
        let n = vocab.n_classes();
        let m = vocab.n_relations();
        let lim_in = (6.0 / (n + hidden) as f64).sqrt();
        let lim_out = (6.0 / (hidden + m) as f64).sqrt();
        let w_in = (0..n * hidden).map(|_| rng.random_range(-lim_in..lim_in)).collect();
        let w_out = (0..m * hidden).map(|_| rng.random_range(-lim_out..lim_out)).collect();
        Self {
            vocabulary: vocab.clone(),
            hidden,
            w_in,
            b_in: vec![0.0; hidden],
            w_out,
            b_out: vec![0.0; m],
            class_support: vec![1; n],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.w_in.len() + self.b_in.len() + self.w_out.len() + self.b_out.len()
    }

    /// All parameters flattened as `w_in, b_in, w_out, b_out`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w_in, &self.b_in, &self.w_out, &self.b_out]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.parameter_count());
        let mut rest = flat;
        for v in [&mut self.w_in, &mut self.b_in, &mut self.w_out, &mut self.b_out] {
            let (head, tail) = rest.split_at(v.len());
            v.copy_from_slice(head);
            rest = tail;
        }
    }

    fn forward(&self, classes: &[u32], pass: &mut Pass) {
        let h = self.hidden;
        pass.z.copy_from_slice(&self.b_in);
        for &c in classes {
            let w = &self.w_in[c as usize * h..(c as usize + 1) * h];
            for (z, &wi) in pass.z.iter_mut().zip(w) {
                *z += wi;
            }
        }
        for (a, &z) in pass.a.iter_mut().zip(&pass.z) {
            *a = z.max(0.0);
        }
        let mut max = f64::NEG_INFINITY;
        for (i, l) in pass.logits.iter_mut().enumerate() {
            let w = &self.w_out[i * h..(i + 1) * h];
            *l = self.b_out[i] + w.iter().zip(&pass.a).map(|(w, a)| w * a).sum::<f64>();
            max = max.max(*l);
        }
        let mut sum = 0.0;
        for (p, &l) in pass.p.iter_mut().zip(&pass.logits) {
            *p = (l - max).exp();
            sum += *p;
        }
        for p in pass.p.iter_mut() {
            *p /= sum;
        }
    }

    /// `Σ y ln(y / p)` over the support of `y`, given a completed forward pass.
    fn kl(target: &[(u32, f64)], pass: &Pass) -> f64 {
        let max = pass.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + pass.logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        target
            .iter()
            .filter(|&&(_, y)| y > 0.0)
            .map(|&(r, y)| y * (y.ln() - (pass.logits[r as usize] - lse)))
            .sum()
    }

    /// Mean KL loss of a batch.
    pub fn loss(&self, batch: &[&TrainExample]) -> f64 {
        let mut pass = Pass::new(self.hidden, self.b_out.len());
        let total: f64 = batch
            .iter()
            .map(|ex| {
                self.forward(&ex.classes, &mut pass);
                Self::kl(&ex.target, &pass)
            })
            .sum();
        total / batch.len() as f64
    }

    /// Mean KL loss of a batch and its analytic gradient.
    pub fn loss_and_gradient(&self, batch: &[&TrainExample]) -> (f64, NeuralGradient) {
        let mut grad = NeuralGradient::zeros_like(self);
        let mut pass = Pass::new(self.hidden, self.b_out.len());
        let loss = self.accumulate(batch, &mut grad, &mut pass);
        (loss, grad)
    }

    fn accumulate(&self, batch: &[&TrainExample], grad: &mut NeuralGradient, pass: &mut Pass) -> f64 {
        let h = self.hidden;
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for ex in batch {
            self.forward(&ex.classes, pass);
            loss += Self::kl(&ex.target, pass);

            // dL/dlogits = p·Σy − y
            let ysum: f64 = ex.target.iter().map(|&(_, y)| y).sum();
            for (d, &p) in pass.dlogits.iter_mut().zip(&pass.p) {
                *d = p * ysum * scale;
            }
            for &(r, y) in &ex.target {
                pass.dlogits[r as usize] -= y * scale;
            }

            pass.da.fill(0.0);
            for (i, &d) in pass.dlogits.iter().enumerate() {
                grad.b_out[i] += d;
                let w = &self.w_out[i * h..(i + 1) * h];
                let g = &mut grad.w_out[i * h..(i + 1) * h];
                for j in 0..h {
                    g[j] += d * pass.a[j];
                    pass.da[j] += d * w[j];
                }
            }
            for j in 0..h {
                if pass.z[j] <= 0.0 {
                    pass.da[j] = 0.0;
                }
                grad.b_in[j] += pass.da[j];
            }
            for &c in &ex.classes {
                let g = &mut grad.w_in[c as usize * h..(c as usize + 1) * h];
                for (gj, &dj) in g.iter_mut().zip(&pass.da) {
                    *gj += dj;
                }
            }
        }
        loss * scale
    }

    /// Seeded minibatch Adam on the mean KL divergence between observed and
    /// predicted distributions.
    pub fn fit_rows(vocab: &Vocabulary, rows: &[&SignatureRow], cfg: &TrainConfig) -> Result<(Self, FitHistory)> {
        let examples: Vec<TrainExample> = rows.iter().map(|r| TrainExample::from_row(r)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = Self::new_random(vocab, cfg.hidden, &mut rng);
        model.class_support = class_support(vocab.n_classes(), rows);

        let all: Vec<&TrainExample> = examples.iter().collect();
        let initial_loss = model.loss(&all);
        let mut adam = Adam::new(&model, cfg.learning_rate);
        let mut grad = NeuralGradient::zeros_like(&model);
        let mut pass = Pass::new(model.hidden, vocab.n_relations());
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut batch: Vec<&TrainExample> = Vec::with_capacity(cfg.batch_size);
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| &examples[i]));
                grad.clear();
                let loss = model.accumulate(&batch, &mut grad, &mut pass);
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch: b, loss });
                }
                adam.step(&mut model, &grad);
                epoch_loss += loss * chunk.len() as f64;
            }
            epoch_losses.push(epoch_loss / examples.len() as f64);
        }

        let final_loss = model.loss(&all);
        if !final_loss.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence {
                epoch: cfg.epochs,
                batch: 0,
                loss: final_loss,
            });
        }
        Ok((
            model,
            FitHistory {
                initial_loss,
                final_loss,
                epoch_losses,
            },
        ))
    }

    pub fn predict_indices(&self, classes: &[u32]) -> Prediction {
        let n = self.vocabulary.n_classes();
        let mut known: Vec<u32> = classes
            .iter()
            .copied()
            .filter(|&c| (c as usize) < n && self.class_support[c as usize] > 0)
            .collect();
        known.sort_unstable();
        known.dedup();
        let mut pass = Pass::new(self.hidden, self.b_out.len());
        self.forward(&known, &mut pass);
        let distribution = RelationDistribution::from_dense(&pass.p)
            .expect("softmax output has positive mass");
        Prediction {
            distribution,
            flag: if known.is_empty() {
                PredictionFlag::OutOfVocabulary
            } else {
                PredictionFlag::Normal
            },
        }
    }
}

struct Adam {
    lr: f64,
    t: i32,
    m: NeuralGradient,
    v: NeuralGradient,
}

impl Adam {
    fn new(model: &NeuralModel, lr: f64) -> Self {
        Self {
            lr,
            t: 0,
            m: NeuralGradient::zeros_like(model),
            v: NeuralGradient::zeros_like(model),
        }
    }

    fn step(&mut self, model: &mut NeuralModel, grad: &NeuralGradient) {
        self.t += 1;
        let lr_t = self.lr * (1.0 - ADAM_BETA2.powi(self.t)).sqrt() / (1.0 - ADAM_BETA1.powi(self.t));
        let params = [
            (&mut model.w_in, &grad.w_in, &mut self.m.w_in, &mut self.v.w_in),
            (&mut model.b_in, &grad.b_in, &mut self.m.b_in, &mut self.v.b_in),
            (&mut model.w_out, &grad.w_out, &mut self.m.w_out, &mut self.v.w_out),
            (&mut model.b_out, &grad.b_out, &mut self.m.b_out, &mut self.v.b_out),
        ];
        for (p, g, m, v) in params {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                p[i] -= lr_t * m[i] / (v[i].sqrt() + ADAM_EPS);
            }
        }
    }
}
