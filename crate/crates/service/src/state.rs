//! Deterministic annotation state. Every mutation is a [`Record`]; the live
//! service plans a record, journals it, then applies it, and replay applies
//! the same records in order.

use std::collections::{BTreeMap, BTreeSet};

use bws_core::design::Tuple4;
use bws_core::scoring::{
    status_for, validate_judgment, AnnotatorStatus, GoldAnswer, GoldTuple, Judgment,
    DEFAULT_GOLD_THRESHOLD,
};
use bws_core::{PostId, TupleId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Milliseconds since the Unix epoch.
pub type Millis = i64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub judgments_per_tuple: u32,
    pub gold_rate: f64,
    pub assignment_ttl_ms: Millis,
    pub seed: u64,
    pub rejection_threshold: f64,
    /// Gold tuples an annotator must complete before screening applies.
    pub min_gold_judgments: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            judgments_per_tuple: 3,
            gold_rate: 0.1,
            assignment_ttl_ms: 30 * 60 * 1000,
            seed: 0,
            rejection_threshold: DEFAULT_GOLD_THRESHOLD,
            min_gold_judgments: 5,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.judgments_per_tuple == 0 {
            return Err(ServiceError::Config(
                "judgments_per_tuple must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gold_rate) {
            return Err(ServiceError::Config(format!(
                "gold_rate {} outside [0, 1]",
                self.gold_rate
            )));
        }
        if self.assignment_ttl_ms <= 0 {
            return Err(ServiceError::Config(
                "assignment TTL must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.rejection_threshold) {
            return Err(ServiceError::Config(
                "rejection threshold outside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Journal record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Register {
        annotator_id: String,
        at: Millis,
    },
    Assign {
        seq: u64,
        annotator_id: String,
        tuple_id: TupleId,
        display_order: [PostId; 4],
        issued_at: Millis,
        expires_at: Millis,
    },
    Judgment {
        annotator_id: String,
        tuple_id: TupleId,
        best_post_id: PostId,
        worst_post_id: PostId,
        at: Millis,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub tuple_id: TupleId,
    pub annotator_id: String,
    pub issued_at: Millis,
    pub expires_at: Millis,
    pub display_order: [PostId; 4],
}

impl Assignment {
    pub fn is_live(&self, now: Millis) -> bool {
        now < self.expires_at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorRecord {
    pub annotator_id: String,
    pub registered_at: Millis,
    pub gold_judgments: u32,
    pub gold_correct: u32,
    pub gold_decisions: u32,
    pub status: AnnotatorStatus,
}

impl AnnotatorRecord {
    /// Correct gold decisions over total gold decisions; `None` before the
    /// first gold judgment.
    pub fn gold_accuracy(&self) -> Option<f64> {
        (self.gold_decisions > 0).then(|| self.gold_correct as f64 / self.gold_decisions as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredJudgment {
    pub judgment: Judgment,
    pub gold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub tuples_total: usize,
    pub tuples_complete: usize,
    /// Judgments on design tuples, excluded ones included.
    pub judgments_total: usize,
    pub judgments_excluded: usize,
    pub gold_judgments: usize,
    pub annotators_active: usize,
    pub annotators_rejected: usize,
}

/// Effect of applying a judgment record.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmitOutcome {
    pub gold: bool,
    pub annotator: AnnotatorRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceState {
    config: ServiceConfig,
    posts: BTreeMap<PostId, String>,
    tuples: BTreeMap<TupleId, Tuple4>,
    gold: BTreeMap<TupleId, (Tuple4, GoldAnswer)>,
    annotators: BTreeMap<String, AnnotatorRecord>,
    assignments: BTreeMap<(String, TupleId), Assignment>,
    /// Judgments from non-rejected annotators per design tuple.
    completed: BTreeMap<TupleId, u32>,
    judged: BTreeSet<(String, TupleId)>,
    judgments: Vec<StoredJudgment>,
    assignment_seq: u64,
}

impl ServiceState {
    pub fn new(
        config: ServiceConfig,
        posts: impl IntoIterator<Item = (PostId, String)>,
        tuples: &[Tuple4],
        gold: &[GoldTuple],
    ) -> Result<Self, ServiceError> {
        config.validate()?;
        let posts: BTreeMap<PostId, String> = posts.into_iter().collect();
        let mut tuple_map = BTreeMap::new();
        for t in tuples {
            check_posts(t, &posts)?;
            if tuple_map.insert(t.id, *t).is_some() {
                return Err(ServiceError::Config(format!("duplicate tuple id {}", t.id)));
            }
        }
        let mut gold_map = BTreeMap::new();
        for g in gold {
            let t = g.tuple();
            check_posts(&t, &posts)?;
            if tuple_map.contains_key(&g.tuple_id) || gold_map.contains_key(&g.tuple_id) {
                return Err(ServiceError::Config(format!(
                    "gold tuple id {} collides with another tuple",
                    g.tuple_id
                )));
            }
            validate_judgment(&t, g.best_post_id, g.worst_post_id)
                .map_err(|e| ServiceError::Config(format!("gold tuple {}: {e}", g.tuple_id)))?;
            gold_map.insert(g.tuple_id, (t, g.answer()));
        }
        Ok(Self {
            config,
            posts,
            tuples: tuple_map,
            gold: gold_map,
            annotators: BTreeMap::new(),
            assignments: BTreeMap::new(),
            completed: BTreeMap::new(),
            judged: BTreeSet::new(),
            judgments: Vec::new(),
            assignment_seq: 0,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn post_text(&self, id: PostId) -> Option<&str> {
        self.posts.get(&id).map(String::as_str)
    }

    pub fn annotator(&self, id: &str) -> Option<&AnnotatorRecord> {
        self.annotators.get(id)
    }

    pub fn annotators(&self) -> impl Iterator<Item = &AnnotatorRecord> {
        self.annotators.values()
    }

    pub fn judgments(&self) -> &[StoredJudgment] {
        &self.judgments
    }

    pub fn is_gold(&self, tuple_id: TupleId) -> bool {
        self.gold.contains_key(&tuple_id)
    }

    /// Judgments by non-rejected annotators on a design tuple.
    pub fn completed(&self, tuple_id: TupleId) -> u32 {
        self.completed.get(&tuple_id).copied().unwrap_or(0)
    }

    pub fn live_holds(&self, tuple_id: TupleId, now: Millis) -> usize {
        self.assignments
            .values()
            .filter(|a| a.tuple_id == tuple_id && a.is_live(now))
            .count()
    }

    pub fn assignment(&self, annotator_id: &str, tuple_id: TupleId) -> Option<&Assignment> {
        self.assignments.get(&(annotator_id.to_string(), tuple_id))
    }

    pub fn live_assignments(&self, annotator_id: &str, now: Millis) -> Vec<&Assignment> {
        self.assignments
            .values()
            .filter(|a| a.annotator_id == annotator_id && a.is_live(now))
            .collect()
    }

    fn tuple(&self, tuple_id: TupleId) -> Option<&Tuple4> {
        self.tuples
            .get(&tuple_id)
            .or_else(|| self.gold.get(&tuple_id).map(|(t, _)| t))
    }

    fn active_annotator(&self, id: &str) -> Result<&AnnotatorRecord, ServiceError> {
        let a = self
            .annotators
            .get(id)
            .ok_or_else(|| ServiceError::UnknownAnnotator(id.to_string()))?;
        if a.status == AnnotatorStatus::Rejected {
            return Err(ServiceError::RejectedAnnotator(id.to_string()));
        }
        Ok(a)
    }

    /// `None` when the annotator is already registered.
    pub fn plan_register(
        &self,
        annotator_id: &str,
        now: Millis,
    ) -> Result<Option<Record>, ServiceError> {
        if annotator_id.trim().is_empty() {
            return Err(ServiceError::Validation(
                "annotator id must be non-empty".into(),
            ));
        }
        if self.annotators.contains_key(annotator_id) {
            return Ok(None);
        }
        Ok(Some(Record::Register {
            annotator_id: annotator_id.to_string(),
            at: now,
        }))
    }

    /// Chooses the next tuple for an annotator. Gold is chosen with
    /// probability `gold_rate` (lowest unseen gold id); otherwise the design
    /// tuple with the fewest completed judgments (ties to the lowest id)
    /// that still has capacity and that the annotator neither judged nor
    /// holds. Randomness comes from the stream of the assignment sequence
    /// number, so replanning after replay gives the same answer.
    pub fn plan_next(
        &self,
        annotator_id: &str,
        now: Millis,
    ) -> Result<Option<Record>, ServiceError> {
        self.active_annotator(annotator_id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.assignment_seq);
        let want_gold = rng.random::<f64>() < self.config.gold_rate;

        let seen = |id: TupleId| {
            let key = (annotator_id.to_string(), id);
            self.judged.contains(&key) || self.assignments.get(&key).is_some_and(|a| a.is_live(now))
        };
        let gold_pick = || self.gold.keys().copied().find(|&id| !seen(id));
        let design_pick = || {
            let cap = self.config.judgments_per_tuple as usize;
            self.tuples
                .keys()
                .copied()
                .filter(|&id| !seen(id))
                .filter(|&id| self.completed(id) as usize + self.live_holds(id, now) < cap)
                .min_by_key(|&id| (self.completed(id), id))
        };
        let pick = if want_gold {
            gold_pick().or_else(design_pick)
        } else {
            design_pick()
        };
        let Some(tuple_id) = pick else {
            return Ok(None);
        };
        let mut display_order = self
            .tuple(tuple_id)
            .expect("picked from known tuples")
            .post_ids;
        display_order.shuffle(&mut rng);
        Ok(Some(Record::Assign {
            seq: self.assignment_seq,
            annotator_id: annotator_id.to_string(),
            tuple_id,
            display_order,
            issued_at: now,
            expires_at: now.saturating_add(self.config.assignment_ttl_ms),
        }))
    }

    pub fn plan_submit(
        &self,
        annotator_id: &str,
        tuple_id: TupleId,
        best_post_id: PostId,
        worst_post_id: PostId,
        now: Millis,
    ) -> Result<Record, ServiceError> {
        self.active_annotator(annotator_id)?;
        let tuple = self
            .tuple(tuple_id)
            .ok_or(ServiceError::UnknownTuple(tuple_id))?;
        validate_judgment(tuple, best_post_id, worst_post_id).map_err(ServiceError::Validation)?;
        let key = (annotator_id.to_string(), tuple_id);
        if self.judged.contains(&key) {
            return Err(ServiceError::Duplicate {
                annotator_id: annotator_id.to_string(),
                tuple_id,
            });
        }
        match self.assignments.get(&key) {
            Some(a) if a.is_live(now) => {}
            _ => {
                return Err(ServiceError::NoAssignment {
                    annotator_id: annotator_id.to_string(),
                    tuple_id,
                })
            }
        }
        if !self.is_gold(tuple_id) && self.completed(tuple_id) >= self.config.judgments_per_tuple {
            return Err(ServiceError::NoAssignment {
                annotator_id: annotator_id.to_string(),
                tuple_id,
            });
        }
        Ok(Record::Judgment {
            annotator_id: annotator_id.to_string(),
            tuple_id,
            best_post_id,
            worst_post_id,
            at: now,
        })
    }

    /// Applies a record. Records produced by the planners always apply; a
    /// record that does not fit the current state is reported as corrupt.
    pub fn apply(&mut self, record: &Record) -> Result<Option<SubmitOutcome>, ServiceError> {
        match record {
            Record::Register { annotator_id, at } => {
                if self.annotators.contains_key(annotator_id) {
                    return Err(ServiceError::Replay(format!(
                        "annotator {annotator_id} registered twice"
                    )));
                }
                self.annotators.insert(
                    annotator_id.clone(),
                    AnnotatorRecord {
                        annotator_id: annotator_id.clone(),
                        registered_at: *at,
                        gold_judgments: 0,
                        gold_correct: 0,
                        gold_decisions: 0,
                        status: AnnotatorStatus::Active,
                    },
                );
                Ok(None)
            }
            Record::Assign {
                seq,
                annotator_id,
                tuple_id,
                display_order,
                issued_at,
                expires_at,
            } => {
                if *seq != self.assignment_seq {
                    return Err(ServiceError::Replay(format!(
                        "assignment sequence {seq}, expected {}",
                        self.assignment_seq
                    )));
                }
                if self.tuple(*tuple_id).is_none() || !self.annotators.contains_key(annotator_id) {
                    return Err(ServiceError::Replay(format!(
                        "assignment of unknown tuple {tuple_id}"
                    )));
                }
                self.assignment_seq += 1;
                self.assignments.insert(
                    (annotator_id.clone(), *tuple_id),
                    Assignment {
                        tuple_id: *tuple_id,
                        annotator_id: annotator_id.clone(),
                        issued_at: *issued_at,
                        expires_at: *expires_at,
                        display_order: *display_order,
                    },
                );
                Ok(None)
            }
            Record::Judgment {
                annotator_id,
                tuple_id,
                best_post_id,
                worst_post_id,
                at,
            } => {
                let key = (annotator_id.clone(), *tuple_id);
                if self.assignments.remove(&key).is_none() || !self.judged.insert(key) {
                    return Err(ServiceError::Replay(format!(
                        "judgment by {annotator_id} on {tuple_id} without assignment"
                    )));
                }
                let judgment = Judgment {
                    tuple_id: *tuple_id,
                    annotator_id: annotator_id.clone(),
                    best_post_id: *best_post_id,
                    worst_post_id: *worst_post_id,
                    timestamp: *at,
                };
                let gold = self.gold.get(tuple_id).map(|(_, answer)| *answer);
                self.judgments.push(StoredJudgment {
                    judgment,
                    gold: gold.is_some(),
                });
                match gold {
                    None => *self.completed.entry(*tuple_id).or_insert(0) += 1,
                    Some(answer) => {
                        self.score_gold(annotator_id, answer, *best_post_id, *worst_post_id)
                    }
                }
                let annotator = self.annotators.get(annotator_id).cloned().ok_or_else(|| {
                    ServiceError::Replay(format!("unknown annotator {annotator_id}"))
                })?;
                Ok(Some(SubmitOutcome {
                    gold: gold.is_some(),
                    annotator,
                }))
            }
        }
    }

    fn score_gold(&mut self, annotator_id: &str, answer: GoldAnswer, best: PostId, worst: PostId) {
        let threshold = self.config.rejection_threshold;
        let min_gold = self.config.min_gold_judgments;
        let Some(a) = self.annotators.get_mut(annotator_id) else {
            return;
        };
        a.gold_judgments += 1;
        a.gold_decisions += 2;
        a.gold_correct +=
            u32::from(best == answer.best_post_id) + u32::from(worst == answer.worst_post_id);
        let accuracy = a.gold_correct as f64 / a.gold_decisions as f64;
        if a.gold_judgments >= min_gold
            && status_for(accuracy, threshold) == AnnotatorStatus::Rejected
        {
            a.status = AnnotatorStatus::Rejected;
            self.reject(annotator_id);
        }
    }

    /// Releases the annotator's holds and reopens the design tuples they
    /// judged; their judgments stay in the log, flagged as excluded.
    fn reject(&mut self, annotator_id: &str) {
        self.assignments.retain(|(a, _), _| a != annotator_id);
        for sj in &self.judgments {
            if !sj.gold && sj.judgment.annotator_id == annotator_id {
                if let Some(c) = self.completed.get_mut(&sj.judgment.tuple_id) {
                    *c -= 1;
                }
            }
        }
    }

    pub fn is_excluded(&self, j: &StoredJudgment) -> bool {
        self.annotators
            .get(&j.judgment.annotator_id)
            .is_some_and(|a| a.status == AnnotatorStatus::Rejected)
    }

    /// Design-tuple judgments in log order; rejected annotators' judgments
    /// only when `include_excluded`.
    pub fn export_judgments(&self, include_excluded: bool) -> Vec<Judgment> {
        self.judgments
            .iter()
            .filter(|j| !j.gold && (include_excluded || !self.is_excluded(j)))
            .map(|j| j.judgment.clone())
            .collect()
    }

    pub fn progress(&self) -> Progress {
        let cap = self.config.judgments_per_tuple;
        let rejected = self
            .annotators
            .values()
            .filter(|a| a.status == AnnotatorStatus::Rejected)
            .count();
        let design: Vec<&StoredJudgment> = self.judgments.iter().filter(|j| !j.gold).collect();
        Progress {
            tuples_total: self.tuples.len(),
            tuples_complete: self.completed.values().filter(|&&c| c >= cap).count(),
            judgments_total: design.len(),
            judgments_excluded: design.iter().filter(|j| self.is_excluded(j)).count(),
            gold_judgments: self.judgments.len() - design.len(),
            annotators_active: self.annotators.len() - rejected,
            annotators_rejected: rejected,
        }
    }
}

fn check_posts(t: &Tuple4, posts: &BTreeMap<PostId, String>) -> Result<(), ServiceError> {
    match t.post_ids.iter().find(|p| !posts.contains_key(p)) {
        Some(p) => Err(ServiceError::Config(format!(
            "tuple {} references unknown post {p}",
            t.id
        ))),
        None => Ok(()),
    }
}
