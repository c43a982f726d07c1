//! Fitting each predictor, predicting the demand of an unseen class
//! combination, and saving/loading a model.

use dwc::aggregation::aggregate;
use dwc::models::{fit, load_model, save_model, ModelKind, TrainConfig};
use dwc::synth::{class_id, generate, GenConfig};

fn main() -> dwc::Result<()> {
    let gen = GenConfig {
        n_classes: 40,
        n_relations: 30,
        n_entities: 800,
        ..Default::default()
    };
    let out = generate(&gen)?;
    let (ds, _) = aggregate(&out.periods[0], &out.kb, 1)?;
    println!("{} signatures over {} classes\n", ds.len(), ds.vocabulary.n_classes());

    // A combination that may not occur in the data.
    let query = [class_id(0), class_id(1), class_id(2)];
    let cfg = TrainConfig::default();
    for kind in ModelKind::ALL {
        let (model, summary) = fit(kind, &ds, &cfg)?;
        let p = model.predict_classes(query.iter())?;
        let top: Vec<String> = p
            .distribution
            .ranked()
            .iter()
            .take(4)
            .map(|&(r, q)| format!("{}={q:.3}", ds.vocabulary.relation(r)))
            .collect();
        println!(
            "{:<5} {:>6} params  {:?}  {}",
            kind.short_name(),
            summary.parameters,
            p.flag,
            top.join(" ")
        );
    }

    let (nn, _) = fit(ModelKind::Neural, &ds, &cfg)?;
    let dir = std::env::temp_dir().join("dwc-example-model");
    std::fs::create_dir_all(&dir).map_err(|e| dwc::Error::Config(e.to_string()))?;
    let path = dir.join("nn.json");
    save_model(&nn, &path)?;
    let back = load_model(&path)?;
    assert_eq!(back, nn);
    println!("\nsaved and reloaded {}", path.display());
    Ok(())
}
