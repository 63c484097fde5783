//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Criterion 9 needs the public annotated corpus. Point `BWS_PUBLIC_CORPUS`
//! at a directory holding `corpus.jsonl` (output of `bws ingest`) and
//! `scores.csv` (output of `bws score`); without it the line is skipped.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use bws_core::baseline::{evaluate, train, EvalProtocol, Example, FeatureConfig, Hyperparameters};
use bws_core::design::{design_tuples, verify_design_with, DesignConfig, Tuple4};
use bws_core::lexicon::distribution_report;
use bws_core::metrics::{self, MetricsError};
use bws_core::popularity::{evaluate_levels, fit_levels, Variant};
use bws_core::reliability::{
    simulate_judgments, split_half_reliability, ShrConfig, SimulationConfig, SplitMode,
};
use bws_core::scoring::{aggregate_scores, bin_score, CountingMode, GoldTuple, Judgment};
use bws_core::{io, Post};
use bws_service::{
    Durability, ManualClock, Service, ServiceConfig, ServiceError, ServiceState, SharedService,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Criterion = (&'static str, fn() -> Outcome);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("tuple design balance", tuple_design),
        ("scoring exactness", scoring_exactness),
        ("split-half reliability", split_half),
        ("pipeline recovery", pipeline_recovery),
        ("popularity fitting", popularity_fitting),
        ("metrics", metrics_oracles),
        ("baseline regressor", baseline_regressor),
        ("service durability", service_durability),
        ("public corpus", public_corpus),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {}: {tag} {name}: {detail} [{secs:.2}s]", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn tuple_design() -> Outcome {
    let started = Instant::now();
    let (tuples, reported) = match design_tuples(&DesignConfig::new(500, 42).with_multiplier(2)) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = started.elapsed();
    let stats = match verify_design_with(&tuples, 500, 2) {
        Ok(s) => s,
        Err(v) => return Outcome::Fail(format!("{} violations, first: {}", v.len(), v[0])),
    };
    let distinct: HashSet<[usize; 4]> = tuples
        .iter()
        .map(|t| {
            let mut c = t.post_ids;
            c.sort_unstable();
            c
        })
        .collect();
    let no_repeats = tuples
        .iter()
        .all(|t| t.post_ids.iter().collect::<HashSet<_>>().len() == 4);
    let ok = tuples.len() == 1000
        && distinct.len() == 1000
        && no_repeats
        && stats.item_count_min == 8
        && stats.item_spread() == 0
        && stats.pair_count_max <= 2
        && reported == stats
        && elapsed < Duration::from_secs(5);
    verdict(
        ok,
        format!(
            "{} tuples ({} distinct), appearances {}..={}, pair_count_max {}, {:.3}s",
            tuples.len(),
            distinct.len(),
            stats.item_count_min,
            stats.item_count_max,
            stats.pair_count_max,
            elapsed.as_secs_f64()
        ),
    )
}

fn judgment(tuple_id: usize, annotator: usize, best: usize, worst: usize) -> Judgment {
    Judgment {
        tuple_id,
        annotator_id: format!("a{annotator}"),
        best_post_id: best,
        worst_post_id: worst,
        timestamp: 0,
    }
}

fn scoring_exactness() -> Outcome {
    let tuples: Vec<Tuple4> = [
        [0, 1, 2, 3],
        [0, 4, 5, 6],
        [1, 2, 4, 7],
        [3, 5, 6, 7],
        [0, 2, 5, 7],
        [1, 3, 4, 6],
    ]
    .into_iter()
    .enumerate()
    .map(|(id, p)| Tuple4::new(id, p))
    .collect();
    let picks: [[(usize, usize); 3]; 6] = [
        [(0, 3), (0, 3), (1, 3)],
        [(0, 6), (0, 5), (4, 6)],
        [(1, 7), (2, 7), (1, 4)],
        [(5, 3), (5, 7), (6, 3)],
        [(0, 7), (0, 7), (2, 7)],
        [(1, 6), (4, 6), (1, 3)],
    ];
    let judgments: Vec<Judgment> = picks
        .iter()
        .enumerate()
        .flat_map(|(t, row)| {
            row.iter()
                .enumerate()
                .map(move |(a, &(b, w))| judgment(t, a, b, w))
        })
        .collect();
    // (post, n_best, n_worst, n_appearances, score), counted by hand.
    let expected: [(usize, u32, u32, u32, f64); 8] = [
        (0, 6, 0, 9, 2.0 / 3.0),
        (1, 5, 0, 9, 5.0 / 9.0),
        (2, 2, 0, 9, 2.0 / 9.0),
        (3, 0, 6, 9, -2.0 / 3.0),
        (4, 2, 1, 9, 1.0 / 9.0),
        (5, 2, 1, 9, 1.0 / 9.0),
        (6, 1, 4, 9, -1.0 / 3.0),
        (7, 0, 6, 9, -2.0 / 3.0),
    ];
    let agg = match aggregate_scores(&tuples, &judgments, CountingMode::PerJudgment) {
        Ok(a) => a,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let fixture_ok = agg.scores.len() == 8
        && agg
            .scores
            .iter()
            .zip(expected)
            .all(|(s, (p, b, w, n, score))| {
                (s.post_id, s.n_best, s.n_worst, s.n_appearances) == (p, b, w, n)
                    && s.score == score
            });

    // Post 0 in eight single-judgment tuples: best six times, worst once.
    let wide: Vec<Tuple4> = (0..8)
        .map(|i| Tuple4::new(i, [0, 1 + 3 * i, 2 + 3 * i, 3 + 3 * i]))
        .collect();
    let wide_judgments: Vec<Judgment> = (0..8)
        .map(|i| match i {
            0..6 => judgment(i, 0, 0, 1 + 3 * i),
            6 => judgment(i, 0, 1 + 3 * i, 0),
            _ => judgment(i, 0, 1 + 3 * i, 2 + 3 * i),
        })
        .collect();
    let example = aggregate_scores(&wide, &wide_judgments, CountingMode::PerJudgment)
        .ok()
        .and_then(|a| a.scores.into_iter().find(|s| s.post_id == 0));
    let example_ok = example
        .is_some_and(|s| (s.n_best, s.n_worst, s.n_appearances) == (6, 1, 8) && s.score == 0.625);

    let table = [(-1.0, 1), (-0.56, 2), (0.12, 3), (0.4, 4), (1.0, 5)];
    let bins: Vec<Option<u8>> = table.iter().map(|&(s, _)| bin_score(s).ok()).collect();
    let bins_ok = bins
        .iter()
        .zip(table)
        .all(|(got, (_, want))| *got == Some(want));

    verdict(
        fixture_ok && example_ok && bins_ok,
        format!(
            "fixture {}, (6,1,8) -> {:?}, bins {:?}",
            if fixture_ok { "exact" } else { "mismatch" },
            example.map(|s| s.score),
            bins.iter().map(|b| b.unwrap_or(0)).collect::<Vec<_>>()
        ),
    )
}

struct Simulation {
    tuples: Vec<Tuple4>,
    judgments: Vec<Judgment>,
    latent: Vec<f64>,
}

fn simulation() -> Simulation {
    let n = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let latent: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let (tuples, _) = design_tuples(&DesignConfig::new(n, 42).with_multiplier(2)).expect("design");
    let config = SimulationConfig {
        annotators_per_tuple: 3,
        noise_sigma: 0.1,
        seed: 42,
    };
    let judgments = simulate_judgments(&latent, &tuples, &config).expect("simulation");
    Simulation {
        tuples,
        judgments,
        latent,
    }
}

fn split_half() -> Outcome {
    let started = Instant::now();
    let sim = simulation();
    let random = match split_half_reliability(&sim.tuples, &sim.judgments, &ShrConfig::new(42)) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let duplicated = split_half_reliability(
        &sim.tuples,
        &sim.judgments,
        &ShrConfig {
            split: SplitMode::DuplicatedIdentical,
            ..ShrConfig::new(42)
        },
    );
    let elapsed = started.elapsed();
    let dup_r = duplicated.as_ref().map(|r| r.mean_r).unwrap_or(f64::NAN);
    verdict(
        random.repeats == 100 && random.mean_r >= 0.90 && dup_r == 1.0 && elapsed < Duration::from_secs(30),
        format!(
            "mean_r {:.4} (need >= 0.90; Spearman-Brown corrected {:.4}) over {} splits, duplicated halves {dup_r}",
            random.mean_r, random.mean_r_corrected, random.repeats
        ),
    )
}

fn pipeline_recovery() -> Outcome {
    let sim = simulation();
    let agg = match aggregate_scores(&sim.tuples, &sim.judgments, CountingMode::PerJudgment) {
        Ok(a) => a,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let est: Vec<f64> = agg.scores.iter().map(|s| s.score).collect();
    let truth: Vec<f64> = agg.scores.iter().map(|s| sim.latent[s.post_id]).collect();
    match metrics::pearson(&est, &truth) {
        Ok(r) => verdict(
            r >= 0.95,
            format!("pearson {r:.4} over {} posts", est.len()),
        ),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

/// Log-scale series where the previous bucket's density drives growth.
fn popularity_series(beta: [f64; 3], n: usize, sigma: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let densities: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut levels = vec![3.0];
    for i in 1..n {
        let eps = if sigma > 0.0 {
            Normal::new(0.0, sigma).unwrap().sample(&mut rng)
        } else {
            0.0
        };
        levels.push(beta[0] * levels[i - 1] + beta[1] * densities[i - 1] + beta[2] + eps);
    }
    (levels, densities)
}

fn popularity_fitting() -> Outcome {
    let beta = [0.9, 0.5, 0.3];
    let (levels, densities) = popularity_series(beta, 60, 0.0, 5);
    let err = match fit_levels(&levels, &densities, Variant::Density) {
        Ok(m) if !m.rank_fallback => m
            .coefficients
            .iter()
            .zip(beta)
            .map(|(g, w)| (g - w).abs())
            .fold(0.0, f64::max),
        Ok(_) => return Outcome::Fail("density fit fell back to baseline".into()),
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut wins = 0;
    for seed in 0..100 {
        let (levels, densities) = popularity_series(beta, 120, 0.1, 1000 + seed);
        let base = evaluate_levels(&levels, &densities, Variant::Baseline, 0.8);
        let dens = evaluate_levels(&levels, &densities, Variant::Density, 0.8);
        match (base, dens) {
            (Ok(b), Ok(d)) if d.rmse < b.rmse => wins += 1,
            (Ok(_), Ok(_)) => {}
            (Err(e), _) | (_, Err(e)) => return Outcome::Fail(format!("seed {seed}: {e}")),
        }
    }
    verdict(
        err <= 1e-6 && wins >= 90,
        format!("max coefficient error {err:.2e}, density beats baseline in {wins}/100 seeds"),
    )
}

fn metrics_oracles() -> Outcome {
    // Hand-derived: r = 3 / sqrt(2 * (14/3)).
    let oracle = 3.0 / (2.0_f64 * 14.0 / 3.0).sqrt();
    let r = metrics::pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap_or(f64::NAN);
    let pearson_ok = (r - 0.98198).abs() <= 1e-5 && (r - oracle).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..64);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let rmse = metrics::rmse(&x, &y).unwrap();
        let mse = metrics::mse(&x, &y).unwrap();
        worst = worst.max((rmse * rmse - mse).abs());
    }
    let constant = metrics::pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]);
    let zero_var = matches!(constant, Err(MetricsError::ZeroVariance(_)));
    verdict(
        pearson_ok && worst <= 1e-12 && zero_var,
        format!("pearson {r:.6}, max |rmse^2 - mse| {worst:.1e}, constant input -> {constant:?}"),
    )
}

const FILLER: &str = "今天天气很好我们一起去公园散步吃饭喝茶看书写字听音乐买东西上班下课回家睡觉";
const MARKER: &str = "怒怒";
const POST_CHARS: usize = 60;

/// Posts of fixed length with `k` marker bigrams spread through random
/// filler; the target is `k / 10`.
fn planted_corpus(n: usize, seed: u64) -> Vec<Example> {
    let filler: Vec<char> = FILLER.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.random_range(0..=10usize);
            let filler_len = POST_CHARS - 2 * k;
            // k + 1 runs of at least one filler char each.
            let mut runs = vec![1; k + 1];
            for _ in 0..filler_len - (k + 1) {
                runs[rng.random_range(0..=k)] += 1;
            }
            let mut text = String::new();
            for (j, run) in runs.iter().enumerate() {
                if j > 0 {
                    text.push_str(MARKER);
                }
                for _ in 0..*run {
                    text.push(filler[rng.random_range(0..filler.len())]);
                }
            }
            Example {
                text,
                hashtag: format!("h{}", i % 5),
                target: k as f64 / 10.0,
            }
        })
        .collect()
}

fn baseline_regressor() -> Outcome {
    let examples = planted_corpus(1000, 7);
    let config = FeatureConfig::default();
    let report = match evaluate(
        &examples,
        &EvalProtocol::mix(7),
        &config,
        &Hyperparameters::default(),
    ) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };

    let subset = &examples[..60];
    let texts: Vec<&str> = subset.iter().map(|e| e.text.as_str()).collect();
    let targets: Vec<f64> = subset.iter().map(|e| e.target).collect();
    let features = bws_core::baseline::extract_all(&texts, &config);
    let interp = match train(&config, features.clone(), &targets, 1e-10, 1.0) {
        Ok(model) => features
            .iter()
            .zip(&targets)
            .map(|(x, y)| (model.decision(x) - y).abs())
            .fold(0.0, f64::max),
        Err(e) => return Outcome::Fail(format!("interpolation fit: {e}")),
    };
    let split = &report.splits[0];
    verdict(
        report.mean_pearson >= 0.8 && report.mean_mse <= 0.05 && interp <= 1e-6,
        format!(
            "test pearson {:.4}, mse {:.4} (n_test {}, lambda {}, gamma {}), max training residual at lambda 1e-10 {interp:.1e}",
            report.mean_pearson, report.mean_mse, split.n_test, split.lambda, split.gamma
        ),
    )
}

const SERVICE_POSTS: usize = 40;
const SERVICE_GOLD: usize = 5;

fn service_state(config: ServiceConfig) -> (ServiceState, Vec<GoldTuple>) {
    let posts = (0..SERVICE_POSTS).map(|i| (i, format!("帖子{i}")));
    let (tuples, _) = design_tuples(&DesignConfig::new(SERVICE_POSTS, 7)).expect("design");
    let gold: Vec<GoldTuple> = (0..SERVICE_GOLD)
        .map(|i| GoldTuple {
            tuple_id: 10_000 + i,
            post_ids: [4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3],
            best_post_id: 4 * i,
            worst_post_id: 4 * i + 3,
        })
        .collect();
    let state = ServiceState::new(config, posts, &tuples, &gold).expect("service state");
    (state, gold)
}

/// Non-excluded design judgments per tuple, counted from the export.
fn active_counts(svc: &Service) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for j in svc.export_judgments(false) {
        *counts.entry(j.tuple_id).or_insert(0) += 1;
    }
    counts
}

fn cap_held(svc: &Service) -> bool {
    active_counts(svc).values().all(|&c| c <= 3)
}

fn replay_sequence(seed: u64) -> Result<(usize, usize), String> {
    let config = ServiceConfig {
        gold_rate: 0.2,
        min_gold_judgments: 2,
        seed,
        ..ServiceConfig::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("journal.jsonl");
    let clock = ManualClock::new(1_700_000_000_000);
    let open = |clock: &ManualClock| {
        let (state, _) = service_state(config.clone());
        Service::open(state, &path, Durability::Flush, Arc::new(clock.clone()))
            .map_err(|e| e.to_string())
    };
    let (_, gold) = service_state(config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut svc = open(&clock)?;
    let mut kills = 0;
    for step in 0..2000 {
        let who = format!("ann{}", rng.random_range(0..8));
        match rng.random_range(0..100) {
            0..8 => {
                svc.register(&who).map_err(|e| e.to_string())?;
            }
            8..50 => match svc.next_tuple(&who) {
                Ok(_)
                | Err(ServiceError::UnknownAnnotator(_) | ServiceError::RejectedAnnotator(_)) => {}
                Err(e) => return Err(format!("step {step}: next: {e}")),
            },
            50..92 => {
                let live = svc.state().live_assignments(&who, svc.now());
                if live.is_empty() {
                    continue;
                }
                let a = live[rng.random_range(0..live.len())].clone();
                let (mut best, mut worst) = (
                    a.display_order[rng.random_range(0..4)],
                    a.display_order[rng.random_range(0..4)],
                );
                if let Some(g) = gold.iter().find(|g| g.tuple_id == a.tuple_id) {
                    if rng.random_bool(0.7) {
                        (best, worst) = (g.best_post_id, g.worst_post_id);
                    }
                }
                match svc.submit(&who, a.tuple_id, best, worst) {
                    Ok(_)
                    | Err(ServiceError::Validation(_) | ServiceError::RejectedAnnotator(_)) => {}
                    Err(e) => return Err(format!("step {step}: submit: {e}")),
                }
            }
            92..99 => clock.advance(rng.random_range(0..40 * 60 * 1000)),
            _ => {
                let live = svc.state().clone();
                drop(svc);
                svc = open(&clock)?;
                kills += 1;
                if svc.state() != &live {
                    return Err(format!("step {step}: replayed state differs"));
                }
            }
        }
        if !cap_held(&svc) {
            return Err(format!("step {step}: cap exceeded"));
        }
    }
    let live = svc.state().clone();
    drop(svc);
    if open(&clock)?.state() != &live {
        return Err("final replay differs".into());
    }
    Ok((kills + 1, live.judgments().len()))
}

fn concurrent_client(service: SharedService, gold: Vec<GoldTuple>, id: usize) {
    let who = format!("client{id}");
    let mut rng = ChaCha8Rng::seed_from_u64(id as u64);
    service.lock().unwrap().register(&who).unwrap();
    for _ in 0..400 {
        let task = match service.lock().unwrap().next_tuple(&who) {
            Ok(Some(t)) => t,
            Ok(None) | Err(ServiceError::RejectedAnnotator(_)) => return,
            Err(e) => panic!("{e}"),
        };
        thread::yield_now();
        let (best, worst) = match gold.iter().find(|g| g.tuple_id == task.tuple_id) {
            Some(g) if !id.is_multiple_of(5) => (g.best_post_id, g.worst_post_id),
            _ => {
                let i = rng.random_range(0..4);
                (
                    task.display_order[i],
                    task.display_order[(i + rng.random_range(1..4)) % 4],
                )
            }
        };
        match service
            .lock()
            .unwrap()
            .submit(&who, task.tuple_id, best, worst)
        {
            Ok(_) => {}
            Err(ServiceError::RejectedAnnotator(_)) => return,
            Err(e) => panic!("{e}"),
        }
    }
}

fn concurrent_round(seed: u64) -> Result<usize, String> {
    let (state, gold) = service_state(ServiceConfig {
        gold_rate: 0.1,
        min_gold_judgments: 3,
        seed,
        ..ServiceConfig::default()
    });
    let service = Service::in_memory(state, Arc::new(ManualClock::new(0))).into_shared();
    let watcher = {
        let service = Arc::clone(&service);
        thread::spawn(move || {
            (0..200).all(|_| {
                let ok = cap_held(&service.lock().unwrap());
                thread::yield_now();
                ok
            })
        })
    };
    let clients: Vec<_> = (0..16)
        .map(|id| {
            let service = Arc::clone(&service);
            let gold = gold.clone();
            thread::spawn(move || concurrent_client(service, gold, id))
        })
        .collect();
    for c in clients {
        c.join().map_err(|_| "client panicked".to_string())?;
    }
    let watched_ok = watcher.join().map_err(|_| "watcher panicked".to_string())?;
    let svc = service.lock().unwrap();
    if !watched_ok || !cap_held(&svc) {
        return Err("cap exceeded".into());
    }
    Ok(svc.progress().tuples_complete)
}

fn service_durability() -> Outcome {
    let mut replays = 0;
    let mut recorded = 0;
    for seed in 0..5 {
        match replay_sequence(seed) {
            Ok((r, n)) => {
                replays += r;
                recorded += n;
            }
            Err(e) => return Outcome::Fail(format!("sequence {seed}: {e}")),
        }
    }
    let mut complete = Vec::new();
    for seed in 0..3 {
        match concurrent_round(seed) {
            Ok(c) => complete.push(c),
            Err(e) => return Outcome::Fail(format!("concurrent round {seed}: {e}")),
        }
    }
    Outcome::Pass(format!(
        "5 x 2000 ops, {replays} replays identical, {recorded} judgments recorded; 3 rounds of 16 clients within cap, tuples complete {complete:?}"
    ))
}

fn public_corpus() -> Outcome {
    let Some(dir) = std::env::var_os("BWS_PUBLIC_CORPUS") else {
        return Outcome::Skip("BWS_PUBLIC_CORPUS not set".into());
    };
    let dir = Path::new(&dir);
    let posts: Vec<Post> = match io::read_jsonl_file(dir.join("corpus.jsonl")) {
        Ok(p) => p,
        Err(e) => return Outcome::Skip(format!("corpus unavailable: {e}")),
    };
    let scores = match std::fs::File::open(dir.join("scores.csv"))
        .map_err(io::IoError::from)
        .and_then(io::read_scores_csv)
    {
        Ok(s) => s,
        Err(e) => return Outcome::Skip(format!("scores unavailable: {e}")),
    };
    let modal = distribution_report(&posts, &scores).modal_bin();
    let by_id: BTreeMap<usize, f64> = scores.iter().map(|s| (s.post_id, s.score)).collect();
    let examples: Vec<Example> = posts
        .into_iter()
        .filter_map(|p| {
            by_id.get(&p.id).map(|&target| Example {
                text: p.text,
                hashtag: p.hashtag,
                target,
            })
        })
        .collect();
    match evaluate(
        &examples,
        &EvalProtocol::mix(0),
        &FeatureConfig::default(),
        &Hyperparameters::default(),
    ) {
        Ok(report) => verdict(
            modal == 3 && (0.25..=0.50).contains(&report.mean_pearson),
            format!(
                "modal bin {modal}, mix pearson {:.4} over {} posts",
                report.mean_pearson,
                examples.len()
            ),
        ),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}
