//! Grouped k-fold cross-validation with per-fold detail.
//!
//!     cargo run --release --example cross_validate -- [folds] [jobs]

use dwc::aggregation::{aggregate, assign_folds};
use dwc::evaluation::{cross_validate, CvOptions, EvalConfig};
use dwc::models::{ModelKind, TrainConfig};
use dwc::synth::{generate, GenConfig};

fn main() -> dwc::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let k = args.next().flatten().unwrap_or(5);
    let jobs = args.next().flatten().unwrap_or(1);

    let gen = GenConfig {
        n_classes: 80,
        n_relations: 50,
        n_entities: 1500,
        usage_zipf: 0.8,
        clauses_per_entity: (5, 500),
        ..Default::default()
    };
    let out = generate(&gen)?;
    let (ds, _) = aggregate(&out.periods[0], &out.kb, 1)?;
    let opts = CvOptions { k, seed: 7, jobs };
    println!("fold sizes {:?}", assign_folds(&ds, k, opts.seed)?.fold_sizes());

    let eval = EvalConfig::default();
    for kind in ModelKind::ALL {
        let r = cross_validate(&ds, kind, &TrainConfig::default(), &eval, opts)?;
        let per_fold: Vec<String> = r
            .folds
            .iter()
            .map(|f| format!("{:.3}", f.metrics.unweighted.jaccard))
            .collect();
        println!(
            "{:<5} J {:.4} (weighted {:.4})  folds [{}]",
            kind.short_name(),
            r.mean.unweighted.jaccard,
            r.mean.weighted.jaccard,
            per_fold.join(" ")
        );
    }
    Ok(())
}
