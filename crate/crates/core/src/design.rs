//! Generation and verification of best-worst 4-tuple designs.
//!
//! A design over `n` posts has `multiplier * n` tuples and must satisfy four
//! criteria:
//!
//! 1. no two tuples are the same (as sets);
//! 2. no post repeats within a tuple;
//! 3. every post appears in about the same number of tuples;
//! 4. every pair of posts co-occurs in about the same number of tuples.
//!
//! Generation shuffles a pool holding each post `4 * multiplier` times and
//! cuts it into 4-tuples, which fixes criterion 3 exactly. Swaps between
//! tuples then repair criteria 1 and 2, and a bounded swap descent lowers
//! the maximum pair co-occurrence. Every swap exchanges two slots, so item
//! counts never change after the initial cut.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{PostId, TupleId};

pub const DEFAULT_MULTIPLIER: usize = 2;
pub const DEFAULT_MAX_PAIR_SPREAD: u32 = 2;

const MAX_RESTARTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DesignError {
    #[error("infeasible design: C({n},4) = {available} distinct tuples < {required} required")]
    Infeasible {
        n: usize,
        available: u128,
        required: u128,
    },
    #[error("multiplier must be at least 1")]
    ZeroMultiplier,
    #[error("could not repair duplicate tuples after {0} restarts")]
    RepairFailed(usize),
}

/// Four distinct posts judged together, stored in ascending id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tuple4 {
    pub id: TupleId,
    pub post_ids: [PostId; 4],
}

impl Tuple4 {
    /// Builds a tuple, sorting the ids into canonical order.
    pub fn new(id: TupleId, mut post_ids: [PostId; 4]) -> Self {
        post_ids.sort_unstable();
        Self { id, post_ids }
    }

    pub fn contains(&self, post: PostId) -> bool {
        self.post_ids.contains(&post)
    }

    /// A random presentation order of the four posts.
    pub fn display_order<R: Rng + ?Sized>(&self, rng: &mut R) -> [PostId; 4] {
        let mut order = self.post_ids;
        order.shuffle(rng);
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n: usize,
    pub multiplier: usize,
    pub seed: u64,
    /// Target for the maximum pair co-occurrence; best effort.
    pub max_pair_spread: u32,
    /// Swap attempts for pair balancing; `None` means `50 * n`.
    pub pair_swap_budget: Option<usize>,
}

impl DesignConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            multiplier: DEFAULT_MULTIPLIER,
            seed,
            max_pair_spread: DEFAULT_MAX_PAIR_SPREAD,
            pair_swap_budget: None,
        }
    }

    pub fn with_multiplier(mut self, multiplier: usize) -> Self {
        self.multiplier = multiplier;
        self
    }

    pub fn tuple_count(&self) -> usize {
        self.multiplier * self.n
    }

    pub fn check_feasible(&self) -> Result<(), DesignError> {
        if self.multiplier == 0 {
            return Err(DesignError::ZeroMultiplier);
        }
        let available = binomial4(self.n);
        let required = self.tuple_count() as u128;
        if available < required {
            return Err(DesignError::Infeasible {
                n: self.n,
                available,
                required,
            });
        }
        Ok(())
    }
}

fn binomial4(n: usize) -> u128 {
    if n < 4 {
        return 0;
    }
    let n = n as u128;
    n * (n - 1) * (n - 2) * (n - 3) / 24
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignStats {
    pub item_count_min: u32,
    pub item_count_max: u32,
    pub pair_count_max: u32,
    /// Co-occurrence count -> number of post pairs with that count,
    /// including pairs that never co-occur.
    pub pair_count_histogram: BTreeMap<u32, u64>,
}

impl DesignStats {
    pub fn item_spread(&self) -> u32 {
        self.item_count_max - self.item_count_min
    }
}

/// Generates `multiplier * n` distinct, item-balanced 4-tuples.
///
/// The output depends only on `config`.
pub fn design_tuples(config: &DesignConfig) -> Result<(Vec<Tuple4>, DesignStats), DesignError> {
    config.check_feasible()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let copies = 4 * config.multiplier;

    let mut slots = None;
    for _ in 0..MAX_RESTARTS {
        let mut pool: Vec<u32> = (0..n as u32)
            .flat_map(|p| std::iter::repeat_n(p, copies))
            .collect();
        pool.shuffle(&mut rng);
        let mut tuples: Vec<[u32; 4]> = pool
            .chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect();
        if repair_validity(&mut tuples, &mut rng) {
            slots = Some(tuples);
            break;
        }
    }
    let mut slots = slots.ok_or(DesignError::RepairFailed(MAX_RESTARTS))?;

    let budget = config.pair_swap_budget.unwrap_or(50 * n);
    balance_pairs(&mut slots, n, config.max_pair_spread, budget, &mut rng);

    let tuples: Vec<Tuple4> = slots
        .iter()
        .enumerate()
        .map(|(id, t)| Tuple4::new(id, t.map(|p| p as PostId)))
        .collect();
    let stats = compute_stats(&tuples, n);
    Ok((tuples, stats))
}

fn canonical(t: &[u32; 4]) -> [u32; 4] {
    let mut c = *t;
    c.sort_unstable();
    c
}

fn duplicate_pairs(t: &[u32; 4]) -> usize {
    let mut d = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if t[i] == t[j] {
                d += 1;
            }
        }
    }
    d
}

/// Violation bookkeeping for criteria 1 and 2: each within-tuple duplicate
/// pair costs one, and each extra copy of a valid canonical tuple costs one.
struct ValidityState {
    counts: HashMap<[u32; 4], u32>,
    violations: usize,
}

impl ValidityState {
    fn new(tuples: &[[u32; 4]]) -> Self {
        let mut s = Self {
            counts: HashMap::with_capacity(tuples.len()),
            violations: 0,
        };
        for t in tuples {
            s.add(t);
        }
        s
    }

    fn add(&mut self, t: &[u32; 4]) {
        let d = duplicate_pairs(t);
        if d > 0 {
            self.violations += d;
            return;
        }
        let c = self.counts.entry(canonical(t)).or_insert(0);
        if *c >= 1 {
            self.violations += 1;
        }
        *c += 1;
    }

    fn remove(&mut self, t: &[u32; 4]) {
        let d = duplicate_pairs(t);
        if d > 0 {
            self.violations -= d;
            return;
        }
        let key = canonical(t);
        let c = self.counts.get_mut(&key).expect("tuple was added");
        *c -= 1;
        if *c >= 1 {
            self.violations -= 1;
        } else {
            self.counts.remove(&key);
        }
    }

    fn is_bad(&self, t: &[u32; 4]) -> bool {
        duplicate_pairs(t) > 0 || self.counts.get(&canonical(t)).copied().unwrap_or(0) > 1
    }
}

/// Random swap descent on the violation count, allowing sideways moves.
fn repair_validity(tuples: &mut [[u32; 4]], rng: &mut ChaCha8Rng) -> bool {
    let mut state = ValidityState::new(tuples);
    let total = tuples.len();
    if total < 2 {
        return state.violations == 0;
    }
    let mut attempts_left = 20_000 + 200 * total;
    while state.violations > 0 {
        let bad: Vec<usize> = (0..total).filter(|&i| state.is_bad(&tuples[i])).collect();
        for &b in &bad {
            if !state.is_bad(&tuples[b]) {
                continue;
            }
            for _ in 0..16 {
                if attempts_left == 0 {
                    return false;
                }
                attempts_left -= 1;
                let o = rng.random_range(0..total);
                if o == b {
                    continue;
                }
                let (p, q) = (rng.random_range(0..4), rng.random_range(0..4));
                if tuples[b][p] == tuples[o][q] {
                    continue;
                }
                let before = state.violations;
                state.remove(&tuples[b]);
                state.remove(&tuples[o]);
                swap_slots(tuples, b, p, o, q);
                state.add(&tuples[b]);
                state.add(&tuples[o]);
                if state.violations <= before {
                    break;
                }
                state.remove(&tuples[b]);
                state.remove(&tuples[o]);
                swap_slots(tuples, b, p, o, q);
                state.add(&tuples[b]);
                state.add(&tuples[o]);
            }
        }
    }
    true
}

fn swap_slots(tuples: &mut [[u32; 4]], a: usize, p: usize, b: usize, q: usize) {
    let tmp = tuples[a][p];
    tuples[a][p] = tuples[b][q];
    tuples[b][q] = tmp;
}

fn pair_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

fn pair_cost(count: u32, target: u32) -> i64 {
    let c = count as i64;
    let over = (count.saturating_sub(target)) as i64;
    c * c + 1000 * over * over
}

/// Swap descent on a pair-count cost that heavily penalizes counts above
/// `target` and otherwise equalizes counts. Validity (criteria 1 and 2) is
/// preserved by rejecting any swap that breaks it.
fn balance_pairs(
    tuples: &mut [[u32; 4]],
    n: usize,
    target: u32,
    budget: usize,
    rng: &mut ChaCha8Rng,
) {
    let total = tuples.len();
    if total < 2 || n < 5 {
        return;
    }
    let mut pairs: HashMap<u64, u32> = HashMap::new();
    let mut canon: HashMap<[u32; 4], usize> = HashMap::with_capacity(total);
    for (i, t) in tuples.iter().enumerate() {
        for a in 0..4 {
            for b in a + 1..4 {
                *pairs.entry(pair_key(t[a], t[b])).or_insert(0) += 1;
            }
        }
        canon.insert(canonical(t), i);
    }

    let mut attempts = 0;
    while attempts < budget {
        // Tuples holding at least one over-target pair, with the offending slots.
        let hot: Vec<(usize, usize)> = tuples
            .iter()
            .enumerate()
            .flat_map(|(i, t)| {
                let pairs = &pairs;
                (0..4).filter_map(move |a| {
                    let over = (0..4).any(|b| b != a && pairs[&pair_key(t[a], t[b])] > target);
                    over.then_some((i, a))
                })
            })
            .collect();
        if hot.is_empty() {
            return;
        }
        let round = hot.len().max(n);
        for _ in 0..round {
            if attempts >= budget {
                return;
            }
            attempts += 1;
            let (h, p) = hot[rng.random_range(0..hot.len())];
            let o = rng.random_range(0..total);
            let q = rng.random_range(0..4);
            if o == h {
                continue;
            }
            let x = tuples[h][p];
            let y = tuples[o][q];
            if x == y || tuples[h].contains(&y) || tuples[o].contains(&x) {
                continue;
            }
            let mut new_h = tuples[h];
            new_h[p] = y;
            let mut new_o = tuples[o];
            new_o[q] = x;
            let (ch, co) = (canonical(&new_h), canonical(&new_o));
            if ch == co || canon.contains_key(&ch) || canon.contains_key(&co) {
                continue;
            }

            let mut delta = 0i64;
            let mut changes: Vec<(u64, bool)> = Vec::with_capacity(12);
            for k in (0..4).filter(|&k| k != p) {
                changes.push((pair_key(x, tuples[h][k]), false));
                changes.push((pair_key(y, tuples[h][k]), true));
            }
            for k in (0..4).filter(|&k| k != q) {
                changes.push((pair_key(y, tuples[o][k]), false));
                changes.push((pair_key(x, tuples[o][k]), true));
            }
            for &(key, inc) in &changes {
                let c = pairs.entry(key).or_insert(0);
                let before = pair_cost(*c, target);
                if inc {
                    *c += 1;
                } else {
                    *c -= 1;
                }
                delta += pair_cost(*c, target) - before;
            }
            if delta <= 0 {
                canon.remove(&canonical(&tuples[h]));
                canon.remove(&canonical(&tuples[o]));
                tuples[h] = new_h;
                tuples[o] = new_o;
                canon.insert(ch, h);
                canon.insert(co, o);
                if delta < 0 {
                    // The hot list may be stale; rebuild it.
                    break;
                }
            } else {
                for &(key, inc) in changes.iter().rev() {
                    let c = pairs.get_mut(&key).expect("pair touched above");
                    if inc {
                        *c -= 1;
                    } else {
                        *c += 1;
                    }
                }
            }
        }
    }
}

/// Item and pair statistics of a design over posts `0..n`.
pub fn compute_stats(tuples: &[Tuple4], n: usize) -> DesignStats {
    let mut items = vec![0u32; n];
    let mut pairs: HashMap<(PostId, PostId), u32> = HashMap::new();
    for t in tuples {
        for (a, &pa) in t.post_ids.iter().enumerate() {
            if pa < n {
                items[pa] += 1;
            }
            for &pb in &t.post_ids[a + 1..] {
                if pa != pb {
                    *pairs.entry((pa.min(pb), pa.max(pb))).or_insert(0) += 1;
                }
            }
        }
    }
    let mut histogram: BTreeMap<u32, u64> = BTreeMap::new();
    for &c in pairs.values() {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let all_pairs = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let seen = pairs.len() as u64;
    if all_pairs > seen {
        histogram.insert(0, all_pairs - seen);
    }
    DesignStats {
        item_count_min: items.iter().copied().min().unwrap_or(0),
        item_count_max: items.iter().copied().max().unwrap_or(0),
        pair_count_max: pairs.values().copied().max().unwrap_or(0),
        pair_count_histogram: histogram,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    /// A post id is outside `0..n`.
    PostRange,
    /// Criterion 1: no two tuples are the same.
    DistinctTuples,
    /// Criterion 2: no post repeats within a tuple.
    DistinctPosts,
    /// Criterion 3: item appearance counts differ by at most one.
    ItemBalance,
    /// Criterion 4: pair co-occurrence within the tolerance.
    PairBalance,
}

impl Criterion {
    pub fn number(self) -> u8 {
        match self {
            Criterion::PostRange => 0,
            Criterion::DistinctTuples => 1,
            Criterion::DistinctPosts => 2,
            Criterion::ItemBalance => 3,
            Criterion::PairBalance => 4,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::PostRange => write!(f, "post range"),
            c => write!(f, "criterion {}", c.number()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub criterion: Criterion,
    pub tuple_ids: Vec<TupleId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (tuples {:?})",
            self.criterion, self.detail, self.tuple_ids
        )
    }
}

/// Pair co-occurrence limit used when none is given: the larger of the
/// default target and one above the mean co-occurrence rounded up. The second
/// term only matters for small `n`, where the default target is unreachable.
pub fn default_pair_limit(tuple_count: usize, n: usize) -> u32 {
    if n < 2 {
        return DEFAULT_MAX_PAIR_SPREAD;
    }
    let all_pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    let mean = 6.0 * tuple_count as f64 / all_pairs;
    DEFAULT_MAX_PAIR_SPREAD.max(mean.ceil() as u32 + 1)
}

/// Re-checks all four criteria from scratch with the default pair limit.
pub fn verify_design(tuples: &[Tuple4], n: usize) -> Result<DesignStats, Vec<Violation>> {
    verify_design_with(tuples, n, default_pair_limit(tuples.len(), n))
}

pub fn verify_design_with(
    tuples: &[Tuple4],
    n: usize,
    pair_limit: u32,
) -> Result<DesignStats, Vec<Violation>> {
    let mut violations = Vec::new();

    for t in tuples {
        if let Some(&bad) = t.post_ids.iter().find(|&&p| p >= n) {
            violations.push(Violation {
                criterion: Criterion::PostRange,
                tuple_ids: vec![t.id],
                detail: format!("post id {bad} not in 0..{n}"),
            });
        }
    }

    let mut by_canonical: BTreeMap<[PostId; 4], Vec<TupleId>> = BTreeMap::new();
    for t in tuples {
        let mut c = t.post_ids;
        c.sort_unstable();
        by_canonical.entry(c).or_default().push(t.id);
    }
    for (c, ids) in by_canonical.into_iter().filter(|(_, ids)| ids.len() > 1) {
        violations.push(Violation {
            criterion: Criterion::DistinctTuples,
            tuple_ids: ids,
            detail: format!("duplicate tuple {c:?}"),
        });
    }

    for t in tuples {
        let mut c = t.post_ids;
        c.sort_unstable();
        if c.windows(2).any(|w| w[0] == w[1]) {
            violations.push(Violation {
                criterion: Criterion::DistinctPosts,
                tuple_ids: vec![t.id],
                detail: format!("repeated post in {:?}", t.post_ids),
            });
        }
    }

    let stats = compute_stats(tuples, n);
    if stats.item_spread() > 1 {
        violations.push(Violation {
            criterion: Criterion::ItemBalance,
            tuple_ids: vec![],
            detail: format!(
                "item counts range {}..={}",
                stats.item_count_min, stats.item_count_max
            ),
        });
    }
    if stats.pair_count_max > pair_limit {
        let offending: Vec<TupleId> = over_limit_tuples(tuples, pair_limit);
        violations.push(Violation {
            criterion: Criterion::PairBalance,
            tuple_ids: offending,
            detail: format!(
                "pair co-occurrence {} exceeds limit {pair_limit}",
                stats.pair_count_max
            ),
        });
    }

    if violations.is_empty() {
        Ok(stats)
    } else {
        Err(violations)
    }
}

fn over_limit_tuples(tuples: &[Tuple4], limit: u32) -> Vec<TupleId> {
    let mut pairs: HashMap<(PostId, PostId), u32> = HashMap::new();
    for t in tuples {
        for a in 0..4 {
            for b in a + 1..4 {
                let (x, y) = (t.post_ids[a], t.post_ids[b]);
                *pairs.entry((x.min(y), x.max(y))).or_insert(0) += 1;
            }
        }
    }
    tuples
        .iter()
        .filter(|t| {
            (0..4).any(|a| {
                (a + 1..4).any(|b| {
                    let (x, y) = (t.post_ids[a], t.post_ids[b]);
                    pairs[&(x.min(y), x.max(y))] > limit
                })
            })
        })
        .map(|t| t.id)
        .collect()
}
