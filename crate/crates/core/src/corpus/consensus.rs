use serde::{Deserialize, Serialize};

use super::{AttributeId, CorpusError, SalienceAnnotation, SalienceVector};

/// How per-annotator salience marks are merged into one gold vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusRule {
    /// Salient iff strictly more than half of the annotators marked it; ties
    /// resolve to non-salient.
    #[default]
    StrictMajority,
    /// Salient iff every annotator marked it.
    Unanimous,
}

/// Merges the annotations of a single artwork.
pub fn consensus_salience(
    annotations: &[SalienceAnnotation],
    rule: ConsensusRule,
) -> Result<SalienceVector, CorpusError> {
    let first = annotations.first().ok_or(CorpusError::EmptyAnnotationSet)?;
    if let Some(other) = annotations.iter().find(|a| a.artwork_id != first.artwork_id) {
        return Err(CorpusError::MixedArtworkIds(
            first.artwork_id.clone(),
            other.artwork_id.clone(),
        ));
    }
    let n = annotations.len();
    let mut out = SalienceVector::default();
    for attr in AttributeId::ALL {
        let yes = annotations.iter().filter(|a| a.salience.get(attr)).count();
        let salient = match rule {
            ConsensusRule::StrictMajority => 2 * yes > n,
            ConsensusRule::Unanimous => yes == n,
        };
        out.set(attr, salient);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ann(rater: &str, bits: [bool; 5]) -> SalienceAnnotation {
        SalienceAnnotation {
            artwork_id: "a1".into(),
            annotator_id: rater.into(),
            salience: SalienceVector::new(bits),
        }
    }

    // Independent vote-counting oracle: tally each attribute column by hand.
    fn vote_oracle(votes: &[bool]) -> bool {
        let mut yes = 0;
        let mut no = 0;
        for &v in votes {
            if v {
                yes += 1
            } else {
                no += 1
            }
        }
        yes > no
    }

    #[test]
    fn two_of_three_is_salient() {
        let anns = [
            ann("r1", [true, false, false, false, false]),
            ann("r2", [true, false, false, false, false]),
            ann("r3", [false, false, false, false, false]),
        ];
        let v = consensus_salience(&anns, ConsensusRule::StrictMajority).unwrap();
        assert!(v.get(AttributeId::Color));
        assert_eq!(v.l0(), 1);
    }

    #[test]
    fn tie_is_not_salient() {
        let anns = [
            ann("r1", [false, false, true, false, false]),
            ann("r2", [false, false, false, false, false]),
        ];
        let v = consensus_salience(&anns, ConsensusRule::StrictMajority).unwrap();
        assert_eq!(v.get(AttributeId::Line), vote_oracle(&[true, false]));
        assert!(!v.get(AttributeId::Line));
    }

    #[test]
    fn single_annotator_is_copied() {
        let anns = [ann("r1", [false, true, false, false, false])];
        let v = consensus_salience(&anns, ConsensusRule::StrictMajority).unwrap();
        assert_eq!(v.support().iter().collect::<Vec<_>>(), vec![AttributeId::Composition]);
    }

    #[test]
    fn unanimous_rule() {
        let anns = [
            ann("r1", [true, true, false, false, false]),
            ann("r2", [true, false, false, false, false]),
        ];
        let v = consensus_salience(&anns, ConsensusRule::Unanimous).unwrap();
        assert_eq!(v.decisions(), [true, false, false, false, false]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            consensus_salience(&[], ConsensusRule::StrictMajority),
            Err(CorpusError::EmptyAnnotationSet)
        ));
        let mut b = ann("r2", [false; 5]);
        b.artwork_id = "a2".into();
        assert!(matches!(
            consensus_salience(&[ann("r1", [false; 5]), b], ConsensusRule::StrictMajority),
            Err(CorpusError::MixedArtworkIds(..))
        ));
    }

    proptest! {
        #[test]
        fn matches_vote_oracle_and_is_permutation_invariant(
            rows in prop::collection::vec(prop::array::uniform5(any::<bool>()), 1..9),
            seed in any::<u64>(),
        ) {
            let anns: Vec<_> = rows.iter().enumerate().map(|(i, r)| ann(&format!("r{i}"), *r)).collect();
            let v = consensus_salience(&anns, ConsensusRule::StrictMajority).unwrap();
            for a in AttributeId::ALL {
                let col: Vec<bool> = rows.iter().map(|r| r[a.index()]).collect();
                prop_assert_eq!(v.get(a), vote_oracle(&col));
            }
            let mut shuffled = anns.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(consensus_salience(&shuffled, ConsensusRule::StrictMajority).unwrap(), v);
        }

        #[test]
        fn unanimous_panel_equals_any_member(bits in prop::array::uniform5(any::<bool>()), n in 1usize..7) {
            let anns: Vec<_> = (0..n).map(|i| ann(&format!("r{i}"), bits)).collect();
            prop_assert_eq!(consensus_salience(&anns, ConsensusRule::StrictMajority).unwrap(), SalienceVector::new(bits));
        }
    }
}
