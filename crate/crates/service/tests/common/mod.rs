#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use bws_core::design::{design_tuples, DesignConfig, Tuple4};
use bws_core::scoring::GoldTuple;
use bws_service::{ManualClock, Service, ServiceConfig, ServiceState};

pub const GOLD_BASE: usize = 10_000;

pub fn posts(n: usize) -> Vec<(usize, String)> {
    (0..n).map(|i| (i, format!("帖子{i}"))).collect()
}

pub fn tuples(n: usize, seed: u64) -> Vec<Tuple4> {
    design_tuples(&DesignConfig::new(n, seed)).unwrap().0
}

/// Gold tuples over consecutive posts; the lowest id is best, the highest worst.
pub fn gold(k: usize, n_posts: usize) -> Vec<GoldTuple> {
    (0..k)
        .map(|i| {
            let base = (4 * i) % (n_posts - 3);
            GoldTuple {
                tuple_id: GOLD_BASE + i,
                post_ids: [base, base + 1, base + 2, base + 3],
                best_post_id: base,
                worst_post_id: base + 3,
            }
        })
        .collect()
}

pub fn state(n: usize, n_gold: usize, config: ServiceConfig) -> ServiceState {
    ServiceState::new(config, posts(n), &tuples(n, 7), &gold(n_gold, n)).unwrap()
}

pub fn in_memory(n: usize, n_gold: usize, config: ServiceConfig) -> (Service, ManualClock) {
    let clock = ManualClock::new(1_700_000_000_000);
    (
        Service::in_memory(state(n, n_gold, config), Arc::new(clock.clone())),
        clock,
    )
}

/// Design-tuple judgment counts from active annotators, computed from the
/// export rather than the service's own counters.
pub fn active_counts(svc: &Service) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for j in svc.export_judgments(false) {
        *counts.entry(j.tuple_id).or_insert(0) += 1;
    }
    counts
}
