//! Central finite differences against the network's analytic gradient.

use dwc::ids::{ClassId, RelationId, Vocabulary};
use dwc::models::{NeuralModel, TrainExample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dwc::Result<()> {
    let vocab = Vocabulary::from_ids(
        ["a", "b", "c", "d"].map(|s| ClassId::new(s).unwrap()),
        ["p", "q", "r"].map(|s| RelationId::new(s).unwrap()),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = NeuralModel::new_random(&vocab, 3, &mut rng);
    let batch = [
        TrainExample {
            classes: vec![0, 2],
            target: vec![(0, 0.7), (2, 0.3)],
        },
        TrainExample {
            classes: vec![1],
            target: vec![(1, 1.0)],
        },
    ];
    let refs: Vec<&TrainExample> = batch.iter().collect();
    let (loss, grad) = model.loss_and_gradient(&refs);
    let analytic = grad.flatten();
    let theta = model.parameters();
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let mut t = theta.clone();
        t[i] += h;
        probe.set_parameters(&t);
        let up = probe.loss(&refs);
        t[i] -= 2.0 * h;
        probe.set_parameters(&t);
        let numeric = (up - probe.loss(&refs)) / (2.0 * h);
        worst = worst.max((analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6));
    }
    println!("loss {loss:.6}, {} parameters, max relative error {worst:.2e}", theta.len());
    Ok(())
}
