//! Train on the first period of a drifting workload and score the later
//! ones.
//!
//!     cargo run --release --example temporal_drift -- [drift]

use dwc::aggregation::aggregate;
use dwc::evaluation::{report, temporal_eval, EvalConfig};
use dwc::models::{ModelKind, TrainConfig};
use dwc::synth::{generate, GenConfig, SynthOutput};

fn main() -> dwc::Result<()> {
    let drift: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.25);
    let gen = GenConfig {
        n_classes: 60,
        n_relations: 40,
        n_entities: 1000,
        classes_per_entity: (1, 3),
        clauses_per_entity: (200, 400),
        drift_rate: drift,
        n_periods: 4,
        ..Default::default()
    };
    let out = generate(&gen)?;
    let mut datasets = Vec::new();
    for (p, records) in out.periods.iter().enumerate() {
        datasets.push((SynthOutput::period_label(p), aggregate(records, &out.kb, 1)?.0));
    }
    let (_, base) = datasets.remove(0);

    let rep = temporal_eval(&base, &datasets, ModelKind::Neural, &TrainConfig::default(), &EvalConfig::default())?;
    let rows = std::iter::once(("nn", "T0 (train)", &rep.self_eval))
        .chain(rep.periods.iter().map(|r| ("nn", r.label.as_str(), &r.metrics)));
    print!("{}", report::tsv_table(rows));
    for r in &rep.periods {
        if r.reindex.dropped_rows > 0 {
            println!("{}: {} rows had only unseen classes", r.label, r.reindex.dropped_rows);
        }
    }
    Ok(())
}
