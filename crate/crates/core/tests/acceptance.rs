//! Acceptance suite. One line per criterion; exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::{abc, gp, random_block, submission};
use crowdreport::atree::ATree;
use crowdreport::model::{
    ClassId, ClassRegistry, ConstraintKind, ConstraintLayerSpec, Decision, KeypointDescriptorSet,
    LayerInput, RepresentativePolicy, TaskMode, TaskSpec, Verdict,
};
use crowdreport::oracle::{build_graph, score_tree};
use crowdreport::ptp::resolve_offline;
use crowdreport::service::{Platform, TaskState};
use crowdreport::similarity::{
    haversine_km, match_keypoints, similar_visual, DEFAULT_MATCH_RATIO, DEFAULT_MIN_MATCHES,
    EARTH_RADIUS_KM,
};
use crowdreport::simulator::{
    adversarial_stream, chain_stream, generate, random_margin_spec, separated_spec, Scenario,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn build(layers: Vec<ConstraintLayerSpec>, subs: &[crowdreport::Submission]) -> ATree {
    let task = subs.first().map_or("t", |s| s.task_id.as_str());
    let mut tree = ATree::new(task, layers);
    for s in subs {
        tree.insert(s.clone()).expect("fresh ids");
    }
    tree
}

fn stream_order_example() -> Outcome {
    let start = Instant::now();
    let [a, b, c] = abc("t");
    let layer = vec![ConstraintLayerSpec::visual(DEFAULT_MIN_MATCHES)];
    let sim = |x: &crowdreport::Submission, y: &crowdreport::Submission| {
        similar_visual(
            &x.keypoints,
            &y.keypoints,
            DEFAULT_MIN_MATCHES,
            DEFAULT_MATCH_RATIO,
        )
        .unwrap()
    };
    check(
        sim(&a, &b) && sim(&b, &c) && !sim(&a, &c) && !sim(&c, &a),
        || "fixture relations wrong".into(),
    )?;

    let abc_tree = build(layer.clone(), &[a.clone(), b.clone(), c.clone()]);
    let bac_tree = build(layer, &[b, a, c]);
    let abc_groups = abc_tree.groups().len();
    let bac = bac_tree.handover(RepresentativePolicy::First);
    let elapsed = start.elapsed();
    check(abc_groups == 2, || {
        format!("A-B-C gave {abc_groups} groups")
    })?;
    check(bac.representatives == ["B"], || {
        format!("B-A-C gave {:?}", bac.representatives)
    })?;
    check(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "A-B-C -> {abc_groups} groups, B-A-C -> 1 group, FIRST representative B ({:.2} ms)",
        elapsed.as_secs_f64() * 1e3
    ))
}

/// Central angle from unit-vector cross and dot products.
fn vector_great_circle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let unit = |(lat, lon): (f64, f64)| {
        let (lat, lon) = (f64::to_radians(lat), f64::to_radians(lon));
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (u, v) = (unit(a), unit(b));
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = cross.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    EARTH_RADIUS_KM * sin.atan2(cos)
}

fn haversine_correctness() -> Outcome {
    for (lat, lon) in [
        (0.0, 0.0),
        (36.8065, 10.1815),
        (-89.9, 179.9),
        (51.5, -0.12),
    ] {
        let d = haversine_km(gp(lat, lon), gp(lat, lon));
        check(d == 0.0, || format!("identical ({lat}, {lon}) gave {d}"))?;
    }
    let anti = haversine_km(gp(0.0, 0.0), gp(0.0, 180.0));
    let want = std::f64::consts::PI * EARTH_RADIUS_KM;
    let anti_err = (anti - want).abs() / want;
    check(anti_err < 1e-6, || format!("antipode {anti} vs {want}"))?;
    let pairs = [
        ("Tunis-New York", (36.8065, 10.1815), (40.7128, -74.0060)),
        ("London-Paris", (51.5074, -0.1278), (48.8566, 2.3522)),
        ("Tokyo-Sydney", (35.6762, 139.6503), (-33.8688, 151.2093)),
    ];
    let mut worst: f64 = 0.0;
    let mut shown = Vec::new();
    for (name, a, b) in pairs {
        let got = haversine_km(gp(a.0, a.1), gp(b.0, b.1));
        let oracle = vector_great_circle(a, b);
        let rel = (got - oracle).abs() / oracle;
        check(rel < 1e-3, || format!("{name}: {got} vs {oracle}"))?;
        worst = worst.max(rel);
        shown.push(format!("{name} {got:.1} km"));
    }
    Ok(format!(
        "antipode rel err {anti_err:.1e}; {}; worst rel err {worst:.1e}",
        shown.join(", ")
    ))
}

fn brute_match(a: &[Vec<f64>], b: &[Vec<f64>], ratio: f64) -> usize {
    if b.len() < 2 {
        return 0;
    }
    a.iter()
        .filter(|q| {
            let mut d: Vec<f64> = b
                .iter()
                .map(|c| {
                    q.iter()
                        .zip(c)
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            d.sort_by(f64::total_cmp);
            d[0] <= ratio * d[1]
        })
        .count()
}

fn matcher_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut total = 0;
    for case in 0..200 {
        let dim = rng.random_range(1..=4);
        let set = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            let n = rng.random_range(0..=8);
            (0..n)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            if case % 2 == 0 {
                                f64::from(rng.random_range(-3i32..=3))
                            } else {
                                rng.random()
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let (a, b) = (set(&mut rng), set(&mut rng));
        let (sa, sb) = (
            KeypointDescriptorSet::new(a.clone()).unwrap(),
            KeypointDescriptorSet::new(b.clone()).unwrap(),
        );
        let got = match_keypoints(&sa, &sb, DEFAULT_MATCH_RATIO).unwrap();
        let want = brute_match(&a, &b, DEFAULT_MATCH_RATIO);
        check(got == want, || {
            format!("case {case}: {got} vs brute force {want}")
        })?;
        total += got;
    }
    for n in 2..=8 {
        let set: Vec<Vec<f64>> = random_block(n as u64, n, 4);
        let s = KeypointDescriptorSet::new(set).unwrap();
        let got = match_keypoints(&s, &s, DEFAULT_MATCH_RATIO).unwrap();
        check(got == n, || format!("identical set of {n} matched {got}"))?;
    }
    Ok(format!(
        "200 random pairs equal brute force ({total} matches total); identical sets match fully"
    ))
}

fn k_min_flip() -> Outcome {
    let dim = crowdreport::model::DEFAULT_DESCRIPTOR_DIM;
    let mut flips = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared = random_block(1_000 + seed, 10, dim);
        let pair = |k: usize, rng: &mut ChaCha8Rng| {
            let near: Vec<Vec<f64>> = shared[..k]
                .iter()
                .map(|d| {
                    d.iter()
                        .map(|x| x + rng.random_range(-1e-3..1e-3))
                        .collect()
                })
                .collect();
            let mut a = shared[..k].to_vec();
            a.extend(random_block(rng.random(), 20 - k, dim));
            let mut b = near;
            b.extend(random_block(rng.random(), 20 - k, dim));
            (
                KeypointDescriptorSet::new(a).unwrap(),
                KeypointDescriptorSet::new(b).unwrap(),
            )
        };
        for (k, expect) in [(9, false), (10, true)] {
            let (a, b) = pair(k, &mut rng);
            let count = match_keypoints(&a, &b, DEFAULT_MATCH_RATIO).unwrap();
            let similar = similar_visual(&a, &b, DEFAULT_MIN_MATCHES, DEFAULT_MATCH_RATIO).unwrap();
            check(count == k && similar == expect, || {
                format!("seed {seed}: {k} shared gave {count} matches, similar={similar}")
            })?;
        }
        flips += 1;
    }
    Ok(format!("9 shared -> dissimilar, 10 shared -> similar at k_min = {DEFAULT_MIN_MATCHES} on {flips} seeds"))
}

fn online_elimination() -> Outcome {
    let reg = ClassRegistry::default();
    let mut parts = Vec::new();
    for rate in [0.1, 0.3, 0.5] {
        let (mut injected, mut caught) = (0, 0);
        for seed in 0..20u64 {
            let spec = separated_spec(seed, &[5, 4, 4, 3, 3, 3, 2], rate);
            let m = generate(&spec, &reg)
                .map_err(|e| e.to_string())?
                .evaluate()
                .map_err(|e| e.to_string())?
                .metrics;
            check(m.false_rejection_accuracy == 1.0, || {
                format!("rate {rate} seed {seed}: {m:?}")
            })?;
            check(m.true_rejected == 0, || {
                format!("rate {rate} seed {seed}: true rejected {}", m.true_rejected)
            })?;
            injected += m.injected_false;
            caught += m.rejected_false;
        }
        parts.push(format!(
            "rate {rate}: {caught}/{injected} false rejected, 0 true rejected"
        ));
    }
    Ok(parts.join("; "))
}

fn plurality_oracle(votes: &[(ClassId, f64)], normal: ClassId) -> ClassId {
    let mut tally: BTreeMap<ClassId, (usize, Vec<f64>)> = BTreeMap::new();
    for &(c, conf) in votes {
        let e = tally.entry(c).or_default();
        e.0 += 1;
        e.1.push(conf);
    }
    let mut best: Option<(ClassId, usize, f64)> = None;
    for (c, (n, mut confs)) in tally {
        confs.sort_by(f64::total_cmp);
        let sum: f64 = confs.iter().sum();
        best = match best {
            Some((bc, bn, bs)) if bn > n || (bn == n && bs >= sum) => Some((bc, bn, bs)),
            _ => Some((c, n, sum)),
        };
    }
    best.map_or(normal, |b| b.0)
}

fn offline_vote() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut count_ties, mut no_event) = (0, 0);
    for case in 0..1000 {
        let n = rng.random_range(0..=30);
        let discrete = case % 2 == 0;
        let votes: Vec<(ClassId, f64)> = (0..n)
            .map(|_| {
                let conf = if discrete {
                    f64::from(rng.random_range(0..=4u32)) / 4.0
                } else {
                    rng.random()
                };
                (rng.random_range(0..4u32), conf)
            })
            .collect();
        let verdicts = |v: &[(ClassId, f64)]| -> Vec<Verdict> {
            v.iter()
                .enumerate()
                .map(|(i, &(c, conf))| Verdict {
                    submission_id: format!("v{i}"),
                    predicted_class: c,
                    confidence: conf,
                    decision: Decision::Deferred,
                    reason: None,
                })
                .collect()
        };
        let got = resolve_offline(&verdicts(&votes), 3);
        let want = plurality_oracle(&votes, 3);
        check(got.determined_class == want, || {
            format!("case {case}: {} vs oracle {want}", got.determined_class)
        })?;
        let mut shuffled = votes.clone();
        shuffled.shuffle(&mut rng);
        let again = resolve_offline(&verdicts(&shuffled), 3);
        check(again.determined_class == want, || {
            format!("case {case}: permutation changed the class")
        })?;
        let mut counts = [0usize; 4];
        votes.iter().for_each(|(c, _)| counts[*c as usize] += 1);
        let top = counts.iter().max().copied().unwrap_or(0);
        if top > 0 && counts.iter().filter(|&&x| x == top).count() > 1 {
            count_ties += 1;
        }
        no_event += usize::from(got.no_event);
    }
    Ok(format!("1000 multisets match oracle and permutations; {count_ties} count ties, {no_event} no-event"))
}

fn margin_scenarios() -> Result<Vec<Scenario>, String> {
    let reg = ClassRegistry::default();
    (0..100u64)
        .map(|seed| {
            generate(&random_margin_spec(seed, 24), &reg).map_err(|e| format!("seed {seed}: {e}"))
        })
        .collect()
}

fn redundancy_and_coverage(scenarios: &[Scenario]) -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut runs = 0;
    let mut coverage_runs = 0;
    let mut failure = None;
    let mut cov_failure = None;
    'outer: for sc in scenarios {
        let n = sc.submissions.len();
        let mut orders = vec![(0..n).collect::<Vec<_>>()];
        for _ in 0..5 {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            orders.push(o);
        }
        for order in orders {
            let ev = match sc.evaluate_with(&order, &sc.spec.layers) {
                Ok(ev) => ev,
                Err(e) => {
                    failure = Some(e.to_string());
                    break 'outer;
                }
            };
            let m = &ev.metrics;
            let clusters = sc.cluster_count();
            let closed_form = (m.n_accepted - clusters) as f64 / m.n_accepted as f64;
            if m.groups_found != clusters
                || m.redundancy_ratio != closed_form
                || ev.partition != sc.ground_truth_partition()
            {
                failure = Some(format!(
                    "seed {}: groups {} vs planned {clusters}, redundancy {} vs {closed_form}",
                    sc.spec.seed, m.groups_found, m.redundancy_ratio
                ));
                break 'outer;
            }
            runs += 1;
            match m.coverage_ratio {
                Some(1.0) => coverage_runs += 1,
                other => {
                    cov_failure.get_or_insert(format!("seed {}: coverage {other:?}", sc.spec.seed));
                }
            }
        }
    }
    let redundancy = match failure {
        Some(f) => Err(f),
        None => Ok(format!("{} scenarios x 6 orders: groups = planned clusters, closed-form redundancy ({runs} runs)", scenarios.len())),
    };
    let coverage = match cov_failure {
        Some(f) => Err(f),
        None if coverage_runs == runs && runs > 0 => {
            Ok(format!("coverage 1.0 on all {runs} margin runs"))
        }
        None => Err("redundancy check aborted before coverage finished".into()),
    };
    (redundancy, coverage)
}

fn chain_coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ratios = Vec::new();
    for kind in [
        ConstraintKind::Time,
        ConstraintKind::Position,
        ConstraintKind::Visual,
    ] {
        for len in 1..=10 {
            let (subs, layer) = chain_stream(len, kind, "t");
            for trial in 0..10 {
                let mut order = subs.clone();
                if trial > 0 {
                    order.shuffle(&mut rng);
                }
                let tree = build(vec![layer], &order);
                let anchors: Vec<usize> = tree
                    .anchors_at(1)
                    .iter()
                    .map(|a| {
                        order
                            .iter()
                            .position(|s| s.submission_id == a.submission_id)
                            .unwrap()
                    })
                    .collect();
                let graph = build_graph(&order, &[layer], DEFAULT_MATCH_RATIO);
                check(graph.is_independent(&anchors), || {
                    format!("{kind} chain {len}: anchors not independent")
                })?;
                let c = score_tree(&tree)
                    .map_err(|e| e.to_string())?
                    .coverage_ratio
                    .unwrap();
                check(c >= 0.5, || format!("{kind} chain {len}: coverage {c}"))?;
                ratios.push(c);
            }
        }
    }
    ratios.sort_by(f64::total_cmp);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let below_one = ratios.iter().filter(|&&c| c < 1.0).count();
    Ok(format!(
        "{} chain runs: anchors independent; coverage min {:.3} median {:.3} mean {:.3}, {below_one} below 1.0",
        ratios.len(),
        ratios[0],
        ratios[ratios.len() / 2],
        mean
    ))
}

fn permutations(layers: &[ConstraintLayerSpec]) -> Vec<Vec<ConstraintLayerSpec>> {
    let idx = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    idx.iter()
        .map(|p| p.iter().map(|&i| layers[i]).collect())
        .collect()
}

fn layer_order(scenarios: &[Scenario]) -> Outcome {
    for sc in scenarios {
        let order: Vec<usize> = (0..sc.submissions.len()).collect();
        let mut seen = BTreeSet::new();
        for perm in permutations(&sc.spec.layers) {
            let ev = sc.evaluate_with(&order, &perm).map_err(|e| e.to_string())?;
            seen.insert(ev.partition);
        }
        check(seen.len() == 1, || {
            format!("seed {}: {} distinct partitions", sc.spec.seed, seen.len())
        })?;
    }
    let layers = [
        ConstraintLayerSpec::time(300.0),
        ConstraintLayerSpec::position(0.5),
        ConstraintLayerSpec::visual(10),
    ];
    let mut diverging = 0;
    let mut worst = 0;
    for seed in 0..50u64 {
        let subs = adversarial_stream(seed, 14);
        let partitions: BTreeSet<_> = permutations(&layers)
            .into_iter()
            .map(|p| build(p, &subs).partition())
            .collect();
        if partitions.len() > 1 {
            diverging += 1;
        }
        worst = worst.max(partitions.len());
    }
    Ok(format!(
        "{} margin scenarios identical under all 6 orders; adversarial: {diverging}/50 streams diverge (up to {worst} distinct partitions)",
        scenarios.len()
    ))
}

fn snapshot_bytes(p: &Platform) -> Vec<u8> {
    let state: BTreeMap<String, TaskState> = p.state_snapshot();
    serde_json::to_vec(&state).unwrap()
}

fn crash_recovery() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let open = |d: &std::path::Path| {
        Platform::open(
            d,
            common::settings(),
            Arc::new(common::reference_model()),
            common::fixed_clock(100),
        )
        .map_err(|e| e.to_string())
    };
    let (p, _) = open(dir.path())?;
    let mut snapshots = vec![snapshot_bytes(&p)];
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let blocks: Vec<Vec<Vec<f64>>> = (0..5)
        .map(|i| random_block(300 + i, 10, common::DESCRIPTOR_DIM))
        .collect();
    let task = |id: &str, mode: TaskMode| TaskSpec {
        task_id: Some(id.into()),
        name: id.into(),
        mode,
        expected_class: (mode == TaskMode::Online).then_some(0),
        layers: vec![
            LayerInput {
                kind: ConstraintKind::Time,
                threshold: Some(120.0),
            },
            LayerInput {
                kind: ConstraintKind::Visual,
                threshold: None,
            },
        ],
        opened_at: Some(0),
        deadline: 10_000,
        representative_policy: None,
    };
    let ids = ["on-a", "off-b", "on-c"];
    for (i, id) in ids.iter().enumerate() {
        p.create_task(task(
            id,
            if i == 1 {
                TaskMode::Offline
            } else {
                TaskMode::Online
            },
        ))
        .map_err(|e| e.to_string())?;
        snapshots.push(snapshot_bytes(&p));
    }
    for i in 0..47 {
        if i == 30 || i == 44 {
            p.close_task(ids[if i == 30 { 1 } else { 0 }])
                .map_err(|e| e.to_string())?;
        } else {
            let target = match i {
                _ if i < 30 => ids[i % 3],
                _ if i < 44 => [ids[0], ids[2]][i % 2],
                _ => ids[2],
            };
            let (x, y) = (rng.random_range(0..5), rng.random_range(0..5));
            let mut s = submission(
                &format!("s{i}"),
                target,
                rng.random_range(0..600),
                gp(0.0, 0.0),
                KeypointDescriptorSet::new([blocks[x].clone(), blocks[y].clone()].concat())
                    .unwrap(),
            );
            s.global_feature = common::feature([0, 0, 0, 1, 3][rng.random_range(0..5)]);
            p.submit(target, s).map_err(|e| e.to_string())?;
        }
        snapshots.push(snapshot_bytes(&p));
    }
    drop(p);
    let log = std::fs::read(dir.path().join("events.log")).map_err(|e| e.to_string())?;
    let line_ends: Vec<usize> = log
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == b'\n')
        .map(|(i, _)| i + 1)
        .collect();
    check(line_ends.len() == 50, || {
        format!("expected 50 records, log has {}", line_ends.len())
    })?;

    let mut torn = 0;
    for trial in 0..20 {
        let k = rng.random_range(0..=50);
        let mut bytes = log[..if k == 0 { 0 } else { line_ends[k - 1] }].to_vec();
        if k < 50 && trial % 2 == 0 {
            // killed halfway through writing record k
            let start = bytes.len();
            bytes.extend_from_slice(&log[start..start + (line_ends[k] - start) / 2]);
            torn += 1;
        }
        let copy = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(copy.path().join("events.log"), &bytes).map_err(|e| e.to_string())?;
        let (recovered, report) = open(copy.path())?;
        check(report.records_applied == k, || {
            format!("prefix {k}: applied {}", report.records_applied)
        })?;
        check(snapshot_bytes(&recovered) == snapshots[k], || {
            format!("prefix {k}: state differs from snapshot")
        })?;
    }
    Ok(format!("50-record log, 20 random prefixes ({torn} with a torn tail) replay byte-identical to live snapshots"))
}

fn main() -> ExitCode {
    let scenarios = margin_scenarios();
    let (redundancy, coverage) = match &scenarios {
        Ok(s) => redundancy_and_coverage(s),
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    let chains = chain_coverage();
    let coverage = match (coverage, chains) {
        (Ok(a), Ok(b)) => Ok(format!("{a}; {b}")),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("stream-order example", stream_order_example()),
        ("haversine correctness", haversine_correctness()),
        ("keypoint matcher equivalence", matcher_equivalence()),
        ("k_min default flip", k_min_flip()),
        ("online false-submission elimination", online_elimination()),
        ("offline plurality vote", offline_vote()),
        ("redundancy recovery", redundancy),
        ("oracle coverage", coverage),
        (
            "layer order",
            scenarios
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|s| layer_order(s)),
        ),
        ("crash recovery", crash_recovery()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
