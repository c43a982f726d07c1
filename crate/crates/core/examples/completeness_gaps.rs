//! Scoring a KB against predicted demand and listing the facts worth
//! adding first.

use dwc::aggregation::{aggregate, entity_usage};
use dwc::completeness::{completeness_report, SubsetOptions};
use dwc::ids::EntityId;
use dwc::models::{fit, ModelKind, TrainConfig};
use dwc::synth::{generate, GenConfig};

fn main() -> dwc::Result<()> {
    let gen = GenConfig {
        n_classes: 50,
        n_relations: 40,
        n_entities: 1200,
        usage_zipf: 0.9,
        gap_rate: 0.25,
        ..Default::default()
    };
    let out = generate(&gen)?;
    let (ds, _) = aggregate(&out.periods[0], &out.kb, 1)?;
    let (model, _) = fit(ModelKind::Frequency, &ds, &TrainConfig::default())?;

    let usage = entity_usage(&out.periods[0]);
    let entities: Vec<EntityId> = usage.keys().cloned().collect();
    let rep = completeness_report(&model, &out.kb, &entities, &usage, SubsetOptions::default(), 10)?;

    println!(
        "{} entities: completeness {:.3} of an attainable {:.3}\n",
        rep.per_entity.len(),
        rep.subset_score,
        rep.max_score
    );
    println!("{:<4} {:<8} {:>10} {:>9}", "rank", "relation", "delta", "entities");
    for (i, g) in rep.gaps.iter().enumerate() {
        println!("{:<4} {:<8} {:>10.4} {:>9}", i + 1, g.relation, g.completeness_delta, g.entities);
    }

    let worst = rep
        .per_entity
        .iter()
        .min_by(|a, b| a.score.total_cmp(&b.score))
        .expect("non-empty");
    println!(
        "\nleast complete: {} ({:.3}), missing {}",
        worst.entity,
        worst.score,
        worst
            .missing
            .iter()
            .map(|(r, p)| format!("{r}={p:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}
