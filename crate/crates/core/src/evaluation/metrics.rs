//! Distribution comparison metrics.

use serde::Serialize;

use crate::distribution::{merge_join, RelationDistribution};
use crate::error::{Error, Result};

/// Weighted Jaccard and its two error complements for one comparison.
///
/// The three numerators partition the union, so the fields sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JaccardScores {
    pub jaccard: f64,
    /// Observed but not predicted.
    pub false_neg: f64,
    /// Predicted but not observed.
    pub false_pos: f64,
}

/// Relation weight `W(R) = (P(R) + O(R)) / 2`; jaccard is the weight of
/// `supp(P) ∩ supp(O)` over the weight of `supp(P) ∪ supp(O)`.
pub fn weighted_jaccard(
    predicted: &RelationDistribution,
    observed: &RelationDistribution,
) -> Result<JaccardScores> {
    let (mut both, mut only_obs, mut only_pred) = (0.0, 0.0, 0.0);
    merge_join(predicted.entries(), observed.entries(), |_, p, o| {
        let w = 0.5 * (p + o);
        match (p > 0.0, o > 0.0) {
            (true, true) => both += w,
            (false, true) => only_obs += w,
            (true, false) => only_pred += w,
            (false, false) => {}
        }
    });
    let union = both + only_obs + only_pred;
    if union <= 0.0 {
        return Err(Error::Metric("both distributions are empty".into()));
    }
    Ok(JaccardScores {
        jaccard: both / union,
        false_neg: only_obs / union,
        false_pos: only_pred / union,
    })
}

/// `Σ min(P(R), O(R))`, absent relations counting as zero.
pub fn intersection_metric(a: &RelationDistribution, b: &RelationDistribution) -> f64 {
    let mut sum = 0.0;
    merge_join(a.entries(), b.entries(), |_, p, o| sum += p.min(o));
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(e: &[(u32, f64)]) -> RelationDistribution {
        RelationDistribution::from_proportions(e.iter().copied()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn identical() {
        let p = dist(&[(0, 0.3), (4, 0.7)]);
        let s = weighted_jaccard(&p, &p).unwrap();
        assert_eq!((s.jaccard, s.false_neg, s.false_pos), (1.0, 0.0, 0.0));
        assert!(close(intersection_metric(&p, &p), 1.0));
    }

    #[test]
    fn partial_overlap() {
        // a, b, c = 0, 1, 2
        let p = dist(&[(0, 0.6), (1, 0.4)]);
        let o = dist(&[(0, 0.5), (2, 0.5)]);
        let s = weighted_jaccard(&p, &o).unwrap();
        assert!(close(s.jaccard, 0.55));
        assert!(close(s.false_neg, 0.25));
        assert!(close(s.false_pos, 0.20));
        assert!(close(intersection_metric(&p, &o), 0.5));
    }

    #[test]
    fn disjoint() {
        let p = dist(&[(0, 1.0)]);
        let o = dist(&[(1, 0.5), (2, 0.5)]);
        let s = weighted_jaccard(&p, &o).unwrap();
        assert_eq!(s.jaccard, 0.0);
        assert!(close(s.false_neg + s.false_pos, 1.0));
        assert_eq!(intersection_metric(&p, &o), 0.0);
    }

    #[test]
    fn argument_swap_exchanges_errors() {
        let p = dist(&[(0, 0.6), (1, 0.4)]);
        let o = dist(&[(0, 0.5), (2, 0.5)]);
        let a = weighted_jaccard(&p, &o).unwrap();
        let b = weighted_jaccard(&o, &p).unwrap();
        assert_eq!(a.jaccard, b.jaccard);
        assert_eq!(a.false_neg, b.false_pos);
        assert_eq!(a.false_pos, b.false_neg);
    }

    #[test]
    fn works_on_truncated_inputs() {
        let p = dist(&[(0, 0.5), (1, 0.3), (2, 0.15), (3, 0.05)])
            .truncate_to_mass(0.95)
            .unwrap();
        let o = dist(&[(0, 0.9), (3, 0.1)]).truncate_to_mass(0.95).unwrap();
        let s = weighted_jaccard(&p, &o).unwrap();
        assert!(close(s.jaccard + s.false_neg + s.false_pos, 1.0));
        assert!(s.false_neg > 0.0);
    }
}
