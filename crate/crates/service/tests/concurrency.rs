mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;

use bws_service::{ServiceConfig, ServiceError, SharedService};
use common::{active_counts, gold, in_memory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLIENTS: usize = 16;

fn shared() -> SharedService {
    let config = ServiceConfig {
        gold_rate: 0.1,
        min_gold_judgments: 3,
        seed: 99,
        ..ServiceConfig::default()
    };
    in_memory(40, 5, config).0.into_shared()
}

fn client(service: SharedService, id: usize) -> usize {
    let who = format!("client{id}");
    let golds = gold(5, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(id as u64);
    service.lock().unwrap().register(&who).unwrap();
    let mut submitted = 0;
    for _ in 0..400 {
        let task = match service.lock().unwrap().next_tuple(&who) {
            Ok(Some(t)) => t,
            Ok(None) | Err(ServiceError::RejectedAnnotator(_)) => break,
            Err(e) => panic!("{e}"),
        };
        thread::yield_now();
        let (best, worst) = match golds.iter().find(|g| g.tuple_id == task.tuple_id) {
            Some(g) if !id.is_multiple_of(5) => (g.best_post_id, g.worst_post_id),
            _ => {
                let i = rng.random_range(0..4);
                let j = (i + rng.random_range(1..4)) % 4;
                (task.display_order[i], task.display_order[j])
            }
        };
        match service
            .lock()
            .unwrap()
            .submit(&who, task.tuple_id, best, worst)
        {
            Ok(_) => submitted += 1,
            Err(ServiceError::RejectedAnnotator(_)) => break,
            Err(e) => panic!("{e}"),
        }
    }
    submitted
}

#[test]
fn sixteen_clients_never_exceed_the_cap() {
    for round in 0..3 {
        let service = shared();
        let watcher = {
            let service = Arc::clone(&service);
            thread::spawn(move || {
                for _ in 0..200 {
                    let svc = service.lock().unwrap();
                    for (&t, &c) in &active_counts(&svc) {
                        assert!(c <= 3, "tuple {t}: {c}");
                    }
                    drop(svc);
                    thread::yield_now();
                }
            })
        };
        let handles: Vec<_> = (0..CLIENTS)
            .map(|id| {
                let service = Arc::clone(&service);
                thread::spawn(move || client(service, id + round * CLIENTS))
            })
            .collect();
        let submitted: usize = handles.into_iter().map(|h| h.join().unwrap()).sum();
        watcher.join().unwrap();

        let svc = service.lock().unwrap();
        assert_eq!(svc.state().judgments().len(), submitted);
        let counts: BTreeMap<usize, usize> = active_counts(&svc);
        assert!(counts.values().all(|&c| c <= 3));
        let p = svc.progress();
        assert_eq!(
            p.judgments_total - p.judgments_excluded,
            counts.values().sum::<usize>()
        );
        assert!(p.tuples_complete > 0, "{p:?}");
    }
}
