//! Comparing a predicted relation distribution with an observed one.

use dwc::distribution::RelationDistribution;
use dwc::evaluation::{intersection_metric, weighted_jaccard};

fn main() -> dwc::Result<()> {
    // relation indices: 0 = name, 1 = birthDate, 2 = spouse, 3 = height
    let predicted = RelationDistribution::from_proportions([(0, 0.6), (1, 0.4)])?;
    let observed = RelationDistribution::from_proportions([(0, 0.5), (2, 0.5)])?;

    let s = weighted_jaccard(&predicted, &observed)?;
    println!("jaccard   {:.3}", s.jaccard);
    println!("false neg {:.3}", s.false_neg);
    println!("false pos {:.3}", s.false_pos);
    println!("intersect {:.3}", intersection_metric(&predicted, &observed));

    // Long tails are usually cut before comparing.
    let counts = RelationDistribution::from_counts([(0, 50), (1, 30), (2, 15), (3, 5)])?;
    let head = counts.truncate_to_mass(0.95)?;
    println!(
        "\ntruncated to 0.95: kept {} of {} relations, mass {:.2}",
        head.len(),
        counts.len(),
        head.mass()
    );
    Ok(())
}
