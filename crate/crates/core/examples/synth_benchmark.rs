//! Generates the bundled synthetic benchmark and cross-validates all three
//! predictors on it, printing a TSV table.
//!
//!     cargo run --release --example synth_benchmark -- [epochs] [folds]

use dwc::aggregation::aggregate;
use dwc::evaluation::{cross_validate, report, CvOptions, EvalConfig};
use dwc::models::{ModelKind, TrainConfig};
use dwc::synth::{generate, GenConfig};

fn main() -> dwc::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let k: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);

    let cfg = GenConfig::benchmark();
    let out = generate(&cfg)?;
    let (ds, _) = aggregate(&out.periods[0], &out.kb, 1)?;
    eprintln!(
        "{} signatures, {} classes, {} relations",
        ds.len(),
        ds.vocabulary.n_classes(),
        ds.vocabulary.n_relations()
    );

    let train = TrainConfig {
        epochs,
        ..Default::default()
    };
    let eval = EvalConfig::default();
    let opts = CvOptions {
        k,
        ..Default::default()
    };
    let mut reports = Vec::new();
    for kind in ModelKind::ALL {
        let t = std::time::Instant::now();
        let r = cross_validate(&ds, kind, &train, &eval, opts)?;
        eprintln!("{} done in {:.1?}", kind.short_name(), t.elapsed());
        reports.push(r);
    }
    let rows = reports.iter().map(|r| (r.model.short_name(), "synthetic", &r.mean));
    print!("{}", report::tsv_table(rows));
    Ok(())
}
