//! Best-worst score aggregation, gold screening and score bins.
//!
//! A post's score is `(n_best - n_worst) / n_appearances`, which lies on
//! `[-1, 1]`. By default every judgment (tuple x annotator) is one
//! appearance; [`CountingMode::TupleMajority`] collapses each tuple's
//! judgments into a single plurality vote instead.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::Tuple4;
use crate::{PostId, TupleId};

pub const DEFAULT_GOLD_THRESHOLD: f64 = 0.70;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("invalid judgment #{index} (tuple {tuple_id}, annotator {annotator_id}): {reason}")]
    InvalidJudgment {
        index: usize,
        tuple_id: TupleId,
        annotator_id: String,
        reason: String,
    },
    #[error("score {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("annotator judged no gold tuples")]
    NoGoldOverlap,
}

/// One annotator's best/worst choice for one tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub tuple_id: TupleId,
    pub annotator_id: String,
    pub best_post_id: PostId,
    pub worst_post_id: PostId,
    #[serde(default)]
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityScore {
    pub post_id: PostId,
    pub n_appearances: u32,
    pub n_best: u32,
    pub n_worst: u32,
    pub score: f64,
}

impl IntensityScore {
    fn from_counts(post_id: PostId, n_appearances: u32, n_best: u32, n_worst: u32) -> Self {
        Self {
            post_id,
            n_appearances,
            n_best,
            n_worst,
            score: (n_best as f64 - n_worst as f64) / n_appearances as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountingMode {
    /// Every judgment counts once.
    #[default]
    PerJudgment,
    /// Each tuple contributes one appearance with its plurality best/worst.
    TupleMajority,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    /// Sorted by post id.
    pub scores: Vec<IntensityScore>,
    /// Posts that occur in some tuple but were never judged.
    pub unjudged_posts: Vec<PostId>,
}

/// Checks a judgment against its tuple.
pub fn validate_judgment(tuple: &Tuple4, best: PostId, worst: PostId) -> Result<(), String> {
    if best == worst {
        return Err(format!("best and worst are both post {best}"));
    }
    for (role, id) in [("best", best), ("worst", worst)] {
        if !tuple.contains(id) {
            return Err(format!(
                "{role} post {id} is not in tuple {:?}",
                tuple.post_ids
            ));
        }
    }
    Ok(())
}

pub fn aggregate_scores(
    tuples: &[Tuple4],
    judgments: &[Judgment],
    mode: CountingMode,
) -> Result<Aggregation, ScoringError> {
    let by_id: HashMap<TupleId, &Tuple4> = tuples.iter().map(|t| (t.id, t)).collect();
    let mut per_tuple: BTreeMap<TupleId, Vec<(PostId, PostId)>> = BTreeMap::new();
    for (index, j) in judgments.iter().enumerate() {
        let invalid = |reason: String| ScoringError::InvalidJudgment {
            index,
            tuple_id: j.tuple_id,
            annotator_id: j.annotator_id.clone(),
            reason,
        };
        let tuple = by_id
            .get(&j.tuple_id)
            .ok_or_else(|| invalid("unknown tuple".to_string()))?;
        validate_judgment(tuple, j.best_post_id, j.worst_post_id).map_err(invalid)?;
        per_tuple
            .entry(j.tuple_id)
            .or_default()
            .push((j.best_post_id, j.worst_post_id));
    }

    // post -> (appearances, best, worst)
    let mut counts: BTreeMap<PostId, (u32, u32, u32)> = BTreeMap::new();
    for (tuple_id, picks) in &per_tuple {
        let tuple = by_id[tuple_id];
        let votes: Vec<(PostId, PostId)> = match mode {
            CountingMode::PerJudgment => picks.clone(),
            CountingMode::TupleMajority => vec![majority(picks)],
        };
        for (best, worst) in votes {
            for &p in &tuple.post_ids {
                let c = counts.entry(p).or_default();
                c.0 += 1;
                if p == best {
                    c.1 += 1;
                }
                if p == worst {
                    c.2 += 1;
                }
            }
        }
    }

    let all_posts: BTreeSet<PostId> = tuples.iter().flat_map(|t| t.post_ids).collect();
    let unjudged_posts = all_posts
        .into_iter()
        .filter(|p| !counts.contains_key(p))
        .collect();
    let scores = counts
        .into_iter()
        .map(|(p, (app, best, worst))| IntensityScore::from_counts(p, app, best, worst))
        .collect();
    Ok(Aggregation {
        scores,
        unjudged_posts,
    })
}

/// Plurality best and worst for one tuple; ties go to the lower post id and
/// the worst pick skips the chosen best.
fn majority(picks: &[(PostId, PostId)]) -> (PostId, PostId) {
    let mut best_votes: BTreeMap<PostId, u32> = BTreeMap::new();
    let mut worst_votes: BTreeMap<PostId, u32> = BTreeMap::new();
    for &(b, w) in picks {
        *best_votes.entry(b).or_default() += 1;
        *worst_votes.entry(w).or_default() += 1;
    }
    let top = |votes: &BTreeMap<PostId, u32>, skip: Option<PostId>| {
        votes
            .iter()
            .filter(|(p, _)| Some(**p) != skip)
            .fold(None::<(PostId, u32)>, |acc, (&p, &v)| match acc {
                Some((_, av)) if av >= v => acc,
                _ => Some((p, v)),
            })
            .map(|(p, _)| p)
    };
    let best = top(&best_votes, None).expect("at least one judgment");
    // Some judgment picked `best` as best, so its worst vote went elsewhere.
    let worst = top(&worst_votes, Some(best)).expect("a worst vote differs from best");
    (best, worst)
}

/// Score bin 1..=5 over `[-1,-0.6)`, `[-0.6,-0.2)`, `[-0.2,0.2)`,
/// `[0.2,0.6)`, `[0.6,1]`.
pub fn bin_score(score: f64) -> Result<u8, ScoringError> {
    if !(-1.0..=1.0).contains(&score) {
        return Err(ScoringError::OutOfRange(score));
    }
    Ok(if score < -0.6 {
        1
    } else if score < -0.2 {
        2
    } else if score < 0.2 {
        3
    } else if score < 0.6 {
        4
    } else {
        5
    })
}

/// Expert answer for a gold tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub best_post_id: PostId,
    pub worst_post_id: PostId,
}

/// Gold tuple as stored in the gold file: the tuple plus its expert answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTuple {
    pub tuple_id: TupleId,
    pub post_ids: [PostId; 4],
    pub best_post_id: PostId,
    pub worst_post_id: PostId,
}

impl GoldTuple {
    pub fn tuple(&self) -> Tuple4 {
        Tuple4::new(self.tuple_id, self.post_ids)
    }

    pub fn answer(&self) -> GoldAnswer {
        GoldAnswer {
            best_post_id: self.best_post_id,
            worst_post_id: self.worst_post_id,
        }
    }
}

pub fn gold_map(gold: &[GoldTuple]) -> HashMap<TupleId, GoldAnswer> {
    gold.iter().map(|g| (g.tuple_id, g.answer())).collect()
}

/// Correct best and worst picks over all gold decisions (two per judged gold
/// tuple). Judgments on non-gold tuples are ignored.
pub fn gold_accuracy(
    judgments: &[Judgment],
    gold: &HashMap<TupleId, GoldAnswer>,
) -> Result<f64, ScoringError> {
    let (correct, total) = gold_tally(judgments, gold);
    if total == 0 {
        return Err(ScoringError::NoGoldOverlap);
    }
    Ok(correct as f64 / total as f64)
}

/// `(correct decisions, total decisions)` on gold tuples.
pub fn gold_tally(judgments: &[Judgment], gold: &HashMap<TupleId, GoldAnswer>) -> (u32, u32) {
    let mut correct = 0;
    let mut total = 0;
    for j in judgments {
        if let Some(answer) = gold.get(&j.tuple_id) {
            total += 2;
            correct += u32::from(j.best_post_id == answer.best_post_id);
            correct += u32::from(j.worst_post_id == answer.worst_post_id);
        }
    }
    (correct, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorStatus {
    Active,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub annotator_id: String,
    pub gold_accuracy: f64,
    pub status: AnnotatorStatus,
}

impl AnnotatorProfile {
    pub fn new(annotator_id: impl Into<String>, gold_accuracy: f64, threshold: f64) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            gold_accuracy,
            status: status_for(gold_accuracy, threshold),
        }
    }
}

/// Rejected only when accuracy is strictly below the threshold.
pub fn status_for(accuracy: f64, threshold: f64) -> AnnotatorStatus {
    if accuracy < threshold {
        AnnotatorStatus::Rejected
    } else {
        AnnotatorStatus::Active
    }
}

/// Profiles for every annotator with at least one gold judgment. Annotators
/// without gold overlap are returned separately; they cannot be screened.
pub fn annotator_profiles(
    judgments: &[Judgment],
    gold: &HashMap<TupleId, GoldAnswer>,
    threshold: f64,
) -> (Vec<AnnotatorProfile>, Vec<String>) {
    let mut by_annotator: BTreeMap<&str, Vec<Judgment>> = BTreeMap::new();
    for j in judgments {
        by_annotator
            .entry(j.annotator_id.as_str())
            .or_default()
            .push(j.clone());
    }
    let mut profiles = Vec::new();
    let mut unscreened = Vec::new();
    for (id, js) in by_annotator {
        match gold_accuracy(&js, gold) {
            Ok(acc) => profiles.push(AnnotatorProfile::new(id, acc, threshold)),
            Err(_) => unscreened.push(id.to_string()),
        }
    }
    (profiles, unscreened)
}

/// Partitions annotator ids by gold accuracy.
pub fn filter_annotators(
    profiles: &[AnnotatorProfile],
    threshold: f64,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut active = BTreeSet::new();
    let mut rejected = BTreeSet::new();
    for p in profiles {
        match status_for(p.gold_accuracy, threshold) {
            AnnotatorStatus::Active => active.insert(p.annotator_id.clone()),
            AnnotatorStatus::Rejected => rejected.insert(p.annotator_id.clone()),
        };
    }
    (active, rejected)
}

/// Drops judgments by rejected annotators and judgments on gold tuples.
pub fn scoring_judgments(
    judgments: &[Judgment],
    rejected: &BTreeSet<String>,
    gold: &HashMap<TupleId, GoldAnswer>,
) -> Vec<Judgment> {
    judgments
        .iter()
        .filter(|j| !rejected.contains(&j.annotator_id) && !gold.contains_key(&j.tuple_id))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn j(tuple_id: TupleId, annotator: &str, best: PostId, worst: PostId) -> Judgment {
        Judgment {
            tuple_id,
            annotator_id: annotator.to_string(),
            best_post_id: best,
            worst_post_id: worst,
            timestamp: 0,
        }
    }

    fn score_of(agg: &Aggregation, post: PostId) -> IntensityScore {
        *agg.scores.iter().find(|s| s.post_id == post).unwrap()
    }

    /// Post 0 appears in 8 tuples (one judgment each).
    fn eight_tuples() -> Vec<Tuple4> {
        (0..8)
            .map(|i| Tuple4::new(i, [0, 1 + 3 * i, 2 + 3 * i, 3 + 3 * i]))
            .collect()
    }

    #[test]
    fn extremes_and_formula() {
        let tuples = eight_tuples();
        let always_best: Vec<_> = (0..8).map(|i| j(i, "a", 0, 1 + 3 * i)).collect();
        let agg = aggregate_scores(&tuples, &always_best, CountingMode::PerJudgment).unwrap();
        assert_eq!(score_of(&agg, 0).score, 1.0);

        let never: Vec<_> = (0..8).map(|i| j(i, "a", 2 + 3 * i, 1 + 3 * i)).collect();
        let agg = aggregate_scores(&tuples, &never, CountingMode::PerJudgment).unwrap();
        let s = score_of(&agg, 0);
        assert_eq!(
            (s.n_appearances, s.n_best, s.n_worst, s.score),
            (8, 0, 0, 0.0)
        );

        let mut mixed: Vec<_> = (0..6).map(|i| j(i, "a", 0, 1 + 3 * i)).collect();
        mixed.push(j(6, "a", 6 * 3 + 1, 0));
        mixed.push(j(7, "a", 7 * 3 + 2, 7 * 3 + 3));
        let agg = aggregate_scores(&tuples, &mixed, CountingMode::PerJudgment).unwrap();
        let s = score_of(&agg, 0);
        assert_eq!((s.n_appearances, s.n_best, s.n_worst), (8, 6, 1));
        assert_eq!(s.score, 0.625);
    }

    #[test]
    fn unjudged_posts_reported() {
        let tuples = vec![Tuple4::new(0, [0, 1, 2, 3]), Tuple4::new(1, [4, 5, 6, 7])];
        let agg = aggregate_scores(&tuples, &[j(0, "a", 0, 3)], CountingMode::PerJudgment).unwrap();
        assert_eq!(agg.scores.len(), 4);
        assert_eq!(agg.unjudged_posts, vec![4, 5, 6, 7]);
    }

    #[test]
    fn invalid_judgments() {
        let tuples = vec![Tuple4::new(0, [0, 1, 2, 3])];
        let cases = [
            j(0, "a", 1, 1),
            j(0, "a", 9, 1),
            j(0, "a", 1, 9),
            j(5, "a", 0, 1),
        ];
        for bad in cases {
            let err = aggregate_scores(&tuples, &[j(0, "b", 0, 1), bad], CountingMode::PerJudgment)
                .unwrap_err();
            assert!(
                matches!(err, ScoringError::InvalidJudgment { index: 1, .. }),
                "{err}"
            );
        }
    }

    #[test]
    fn tuple_majority_mode() {
        let tuples = vec![Tuple4::new(0, [0, 1, 2, 3])];
        let js = [j(0, "a", 0, 3), j(0, "b", 0, 2), j(0, "c", 1, 3)];
        let agg = aggregate_scores(&tuples, &js, CountingMode::TupleMajority).unwrap();
        assert_eq!(score_of(&agg, 0).score, 1.0);
        assert_eq!(score_of(&agg, 3).score, -1.0);
        assert_eq!(score_of(&agg, 1).n_appearances, 1);

        // Three-way tie on best goes to the lowest id; worst avoids it.
        let js = [j(0, "a", 1, 0), j(0, "b", 2, 0), j(0, "c", 3, 0)];
        let (best, worst) = majority(
            &js.iter()
                .map(|j| (j.best_post_id, j.worst_post_id))
                .collect::<Vec<_>>(),
        );
        assert_eq!((best, worst), (1, 0));
        let picks = [(0, 1), (1, 0)];
        let (b, w) = majority(&picks);
        assert_ne!(b, w);
    }

    #[test]
    fn table_bins() {
        assert_eq!(bin_score(-1.0).unwrap(), 1);
        assert_eq!(bin_score(-0.56).unwrap(), 2);
        assert_eq!(bin_score(0.12).unwrap(), 3);
        assert_eq!(bin_score(0.4).unwrap(), 4);
        assert_eq!(bin_score(1.0).unwrap(), 5);
    }

    #[test]
    fn bin_boundaries_belong_to_upper_bin() {
        assert_eq!(bin_score(-0.6).unwrap(), 2);
        assert_eq!(bin_score(-0.2).unwrap(), 3);
        assert_eq!(bin_score(0.2).unwrap(), 4);
        assert_eq!(bin_score(0.6).unwrap(), 5);
        assert_eq!(bin_score(1.0001), Err(ScoringError::OutOfRange(1.0001)));
        assert!(bin_score(f64::NAN).is_err());
    }

    fn gold_fixture() -> HashMap<TupleId, GoldAnswer> {
        (100..110)
            .map(|t| {
                (
                    t,
                    GoldAnswer {
                        best_post_id: 0,
                        worst_post_id: 1,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn gold_accuracy_counts_decisions() {
        let gold = gold_fixture();
        // 5 fully right, 5 with only the best pick right: 15 of 20.
        let js: Vec<_> = (100..110)
            .map(|t| {
                if t < 105 {
                    j(t, "a", 0, 1)
                } else {
                    j(t, "a", 0, 2)
                }
            })
            .collect();
        let acc = gold_accuracy(&js, &gold).unwrap();
        assert_eq!(acc, 0.75);
        assert_eq!(
            status_for(acc, DEFAULT_GOLD_THRESHOLD),
            AnnotatorStatus::Active
        );

        let perfect: Vec<_> = (100..110).map(|t| j(t, "a", 0, 1)).collect();
        assert_eq!(gold_accuracy(&perfect, &gold).unwrap(), 1.0);

        // 13 of 20.
        let js: Vec<_> = (100..110)
            .map(|t| match t {
                100..=102 => j(t, "a", 0, 1),
                103..=109 => j(t, "a", 0, 3),
                _ => unreachable!(),
            })
            .collect();
        let acc = gold_accuracy(&js, &gold).unwrap();
        assert_eq!(acc, 0.65);
        assert_eq!(
            status_for(acc, DEFAULT_GOLD_THRESHOLD),
            AnnotatorStatus::Rejected
        );

        assert_eq!(
            gold_accuracy(&[j(1, "a", 0, 1)], &gold),
            Err(ScoringError::NoGoldOverlap)
        );
    }

    #[test]
    fn threshold_is_strict() {
        let profiles = vec![
            AnnotatorProfile::new("a", 0.70, DEFAULT_GOLD_THRESHOLD),
            AnnotatorProfile::new("b", 0.699, DEFAULT_GOLD_THRESHOLD),
        ];
        assert_eq!(profiles[0].status, AnnotatorStatus::Active);
        assert_eq!(profiles[1].status, AnnotatorStatus::Rejected);
        let (active, rejected) = filter_annotators(&profiles, DEFAULT_GOLD_THRESHOLD);
        assert!(active.contains("a") && active.len() == 1);
        assert!(rejected.contains("b") && rejected.len() == 1);
        let (active, rejected) = filter_annotators(&[], DEFAULT_GOLD_THRESHOLD);
        assert!(active.is_empty() && rejected.is_empty());
    }

    #[test]
    fn screening_pipeline() {
        let gold = gold_fixture();
        let mut js: Vec<_> = (100..110).map(|t| j(t, "good", 0, 1)).collect();
        js.extend((100..110).map(|t| j(t, "bad", 1, 0)));
        js.push(j(0, "good", 4, 5));
        js.push(j(0, "bad", 5, 4));
        js.push(j(0, "nogold", 4, 6));
        let (profiles, unscreened) = annotator_profiles(&js, &gold, DEFAULT_GOLD_THRESHOLD);
        assert_eq!(unscreened, vec!["nogold"]);
        let (_, rejected) = filter_annotators(&profiles, DEFAULT_GOLD_THRESHOLD);
        let kept = scoring_judgments(&js, &rejected, &gold);
        assert_eq!(kept.len(), 2);
        assert!(kept
            .iter()
            .all(|j| j.tuple_id == 0 && j.annotator_id != "bad"));
    }

    fn judgment_set() -> impl Strategy<Value = (Vec<Tuple4>, Vec<Judgment>)> {
        let tuples: Vec<Tuple4> = (0..10)
            .map(|i| Tuple4::new(i, [i, i + 1, i + 2, i + 3]))
            .collect();
        let picks = prop::collection::vec((0usize..10, 0usize..4, 1usize..4, 0usize..3), 1..60);
        picks.prop_map(move |raw| {
            let js = raw
                .into_iter()
                .map(|(t, b, off, a)| {
                    let ids = tuples[t].post_ids;
                    j(t, &format!("a{a}"), ids[b], ids[(b + off) % 4])
                })
                .collect();
            (tuples.clone(), js)
        })
    }

    proptest! {
        #[test]
        fn score_invariants((tuples, js) in judgment_set(), rot in 0usize..60) {
            let agg = aggregate_scores(&tuples, &js, CountingMode::PerJudgment).unwrap();
            let net: i64 = agg.scores.iter().map(|s| s.n_best as i64 - s.n_worst as i64).sum();
            prop_assert_eq!(net, 0);
            for s in &agg.scores {
                prop_assert!((-1.0..=1.0).contains(&s.score));
                prop_assert!(s.n_best + s.n_worst <= s.n_appearances);
            }

            let mut rotated = js.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let agg2 = aggregate_scores(&tuples, &rotated, CountingMode::PerJudgment).unwrap();
            prop_assert_eq!(&agg.scores, &agg2.scores);

            let doubled: Vec<_> = js.iter().chain(js.iter()).cloned().collect();
            let agg3 = aggregate_scores(&tuples, &doubled, CountingMode::PerJudgment).unwrap();
            for (a, b) in agg.scores.iter().zip(&agg3.scores) {
                prop_assert_eq!(a.score, b.score);
            }
        }
    }
}
