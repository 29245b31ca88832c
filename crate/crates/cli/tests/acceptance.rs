//! Gate checks for the whole workspace. Each test covers one release
//! criterion and prints a single summary line (visible with --nocapture).

use std::fs;
use std::time::Instant;

use bonescan::scan::doubling_program;
use bonescan::{
    bit_identical, compose, compressed_scan, doubling_scan, exec, gateau_scan, leaf_scan,
    max_rel_error, oracle_scan, rel_frobenius_error, run_algorithm, Algorithm, BlockLayout,
    ExecMode, LiftTable, Pose, Skeleton, Tables, Transform,
};
use bonescan_cli::corpus::{self, CorpusSpec, Generator, Precision};
use bonescan_cli::report::BarrierWeights;
use bonescan_cli::{
    cmd_bench, cmd_generate, cmd_skin, BenchOpts, GenerateOpts, Outcome, ReportFormat, SkinOpts,
};

fn chain(n: usize) -> Skeleton {
    Skeleton::new((0..n).map(|i| i.checked_sub(1)).collect()).unwrap()
}

/// Every parallel algorithm must agree with the sequential oracle on random
/// 300-joint forests across the full depth range, within 1e-9 relative
/// Frobenius error per joint in double precision; the two chain-collecting
/// algorithms must agree bit for bit. Whole sweep under 60 seconds.
#[test]
fn criterion_1_oracle_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut forests = 0usize;
    for &depth in &[15usize, 30, 60, 120] {
        for k in 0..100u64 {
            let mut rng = corpus::item_rng(1001, (depth as u64) << 32 | k);
            // Alternate single trees with two-tree forests; both shapes have
            // exactly 300 joints and exact maximum depth.
            let forest = if k % 2 == 0 {
                Skeleton::new(
                    corpus::generate_parents(Generator::RandomTree, 300, depth, &mut rng).unwrap(),
                )
                .unwrap()
            } else {
                let a = Skeleton::new(
                    corpus::generate_parents(Generator::RandomTree, 150, depth, &mut rng).unwrap(),
                )
                .unwrap();
                let b = Skeleton::new(
                    corpus::generate_parents(Generator::RandomTree, 150, depth, &mut rng).unwrap(),
                )
                .unwrap();
                Skeleton::concat(&[a, b]).unwrap()
            };
            let local = corpus::random_local_pose::<f64>(300, &mut rng);
            let lift = LiftTable::new(&forest);
            let layout = BlockLayout::new(&forest, 64).unwrap();
            let oracle = oracle_scan(&forest, &local).unwrap();
            for algorithm in Algorithm::PARALLEL {
                let r = run_algorithm(
                    algorithm,
                    &forest,
                    &lift,
                    &layout,
                    &local,
                    ExecMode::Sequential,
                )
                .unwrap();
                let err = max_rel_error(&r.model_pose, &oracle.model_pose).unwrap();
                assert!(
                    err <= 1e-9,
                    "{algorithm} at depth {depth}, forest {k}: rel err {err:e}"
                );
                if algorithm.bit_exact() {
                    assert!(
                        bit_identical(&r.model_pose, &oracle.model_pose),
                        "{algorithm} at depth {depth}, forest {k}: not bit-identical"
                    );
                }
                worst = worst.max(err);
            }
            forests += 1;
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "equivalence sweep took {elapsed:.1}s");
    println!(
        "ACCEPTANCE 1 (oracle equivalence): PASS; {forests} forests x 5 algorithms, \
         worst rel err {worst:.2e} <= 1e-9, gateau/leaf bit-identical, {elapsed:.1}s"
    );
}

/// Exact counter values on a 300-joint chain: 9 global barriers for the
/// doubling scan, a critical path of at most 11 compositions for the blocked
/// scan and at most 19 for the compressed scan, which needs exactly two
/// group barriers.
#[test]
fn criterion_2_chain_counter_reproduction() {
    let n = 300;
    let skeleton = chain(n);
    let mut rng = corpus::item_rng(1002, 0);
    let local = corpus::random_local_pose::<f64>(n, &mut rng);
    let lift = LiftTable::new(&skeleton);
    let layout = BlockLayout::new(&skeleton, 64).unwrap();

    let doubling = doubling_scan(&skeleton, &lift, &local).unwrap();
    assert_eq!(doubling.stats.global_barriers, 9, "ceil(log2(300)) rounds");

    let blocked = blocked_scan_stats(&skeleton, &layout, &local);
    assert!(blocked <= 11, "blocked critical path {blocked} > 11");

    let compressed = compressed_scan(&skeleton, &layout, &local).unwrap();
    assert!(
        compressed.stats.max_mults <= 19,
        "compressed critical path {} > 19",
        compressed.stats.max_mults
    );
    assert_eq!(compressed.stats.group_barriers, 2);

    println!(
        "ACCEPTANCE 2 (chain counters): PASS; doubling global barriers 9, \
         blocked max {blocked} <= 11, compressed max {} <= 19 with 2 group barriers",
        compressed.stats.max_mults
    );
}

fn blocked_scan_stats(skeleton: &Skeleton, layout: &BlockLayout, local: &Pose<f64>) -> u64 {
    bonescan::blocked_scan(skeleton, layout, local)
        .unwrap()
        .stats
        .max_mults
}

/// On chains the compressed scan's critical path beats the per-joint chain
/// walk as soon as the hierarchy is deeper than the block budget: for every
/// depth in [30, 300] its max_mults stays below the chain walk's (which
/// equals the depth exactly), never decreases, and respects the in-block
/// plus cross-block bound.
#[test]
fn criterion_3_crossover_on_deep_chains() {
    let mut prev = 0u64;
    let mut at_30 = 0u64;
    let mut at_300 = 0u64;
    for depth in 30..=300usize {
        let n = depth + 1;
        let skeleton = chain(n);
        let mut rng = corpus::item_rng(1003, depth as u64);
        let local = corpus::random_local_pose::<f64>(n, &mut rng);
        let layout = BlockLayout::new(&skeleton, 64).unwrap();

        let gateau = gateau_scan(&skeleton, &local).unwrap();
        assert_eq!(gateau.stats.max_mults, depth as u64, "chain walk is linear");
        let leaf = leaf_scan(&skeleton, &local).unwrap();
        assert_eq!(leaf.stats.max_mults, depth as u64);

        let compressed = compressed_scan(&skeleton, &layout, &local).unwrap();
        let cm = compressed.stats.max_mults;
        assert!(cm < depth as u64, "no crossover at depth {depth}: {cm}");
        assert!(cm >= prev, "compressed curve dipped at depth {depth}");
        assert!(
            cm <= 14 + n.div_ceil(64) as u64,
            "depth {depth}: {cm} above in-block + cross-block budget"
        );
        prev = cm;
        if depth == 30 {
            at_30 = cm;
        }
        if depth == 300 {
            at_300 = cm;
        }
    }
    println!(
        "ACCEPTANCE 3 (crossover): PASS; depths 30..=300, chain walk max = depth, \
         compressed max {at_30}..{at_300} stays below depth and monotone flat"
    );
}

/// Identical seeds must reproduce reports byte for byte (wall-clock fields
/// aside), and the executor must produce bit-identical poses and counters
/// no matter the simulated schedule.
#[test]
fn criterion_4_deterministic_reports_and_execution() {
    let dir = tempfile::tempdir().unwrap();
    let opts = |format, out, exec| BenchOpts {
        corpus: None,
        depths: vec![15, 30],
        joints: 60,
        characters: 10,
        generator: Generator::RandomTree,
        algorithms: Algorithm::PARALLEL.to_vec(),
        seed: 5,
        block_size: 64,
        weights: BarrierWeights::default(),
        format,
        out: Some(out),
        allow_unverified: false,
        precision: None,
        exec,
    };

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let par = dir.path().join("par.csv");
    for (path, exec) in [
        (&a, ExecMode::Sequential),
        (&b, ExecMode::Sequential),
        (&par, ExecMode::Parallel),
    ] {
        let outcome = cmd_bench(&opts(ReportFormat::Csv, path.clone(), exec)).unwrap();
        assert_eq!(outcome, Outcome::Success);
    }
    let a_bytes = fs::read(&a).unwrap();
    assert_eq!(a_bytes, fs::read(&b).unwrap(), "same seed, same bytes");
    assert_eq!(
        a_bytes,
        fs::read(&par).unwrap(),
        "parallel executor changed the report"
    );

    let ja = dir.path().join("a.json");
    let jb = dir.path().join("b.json");
    cmd_bench(&opts(ReportFormat::Json, ja.clone(), ExecMode::Sequential)).unwrap();
    cmd_bench(&opts(ReportFormat::Json, jb.clone(), ExecMode::Sequential)).unwrap();
    let strip = |path: &std::path::Path| -> serde_json::Value {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        for row in v["rows"].as_array_mut().unwrap() {
            row["wall_clock_ms"] = serde_json::Value::Null;
        }
        v
    };
    assert_eq!(
        strip(&ja),
        strip(&jb),
        "JSON reports differ beyond wall clock"
    );

    // Executor schedules: same poses, same counters, bit for bit.
    let mut rng = corpus::item_rng(1004, 0);
    let forest =
        Skeleton::new(corpus::generate_parents(Generator::RandomTree, 200, 40, &mut rng).unwrap())
            .unwrap();
    let local = corpus::random_local_pose::<f64>(200, &mut rng);
    let lift = LiftTable::new(&forest);
    let layout = BlockLayout::new(&forest, 64).unwrap();
    for algorithm in Algorithm::PARALLEL {
        let seq = run_algorithm(
            algorithm,
            &forest,
            &lift,
            &layout,
            &local,
            ExecMode::Sequential,
        )
        .unwrap();
        for mode in [ExecMode::ReverseSequential, ExecMode::Parallel] {
            let other = run_algorithm(algorithm, &forest, &lift, &layout, &local, mode).unwrap();
            assert!(
                bit_identical(&seq.model_pose, &other.model_pose),
                "{algorithm} {mode:?}: poses diverged"
            );
            assert_eq!(
                seq.stats, other.stats,
                "{algorithm} {mode:?}: stats diverged"
            );
        }
    }
    println!(
        "ACCEPTANCE 4 (determinism): PASS; same-seed reports byte-identical \
         (JSON modulo wall clock), all executor schedules bit-identical"
    );
}

/// Truncated-window induction for the doubling scan on a 64-joint chain:
/// after d rounds, every joint holds the product of its nearest min(2^d,
/// chain length) locals. Verified against an independently computed window
/// product for d = 1..=6.
#[test]
fn criterion_5_doubling_phase_coverage() {
    let n = 64;
    let skeleton = chain(n);
    let mut rng = corpus::item_rng(1005, 0);
    let local = corpus::random_local_pose::<f64>(n, &mut rng);
    let lift = LiftTable::new(&skeleton);
    let tables = Tables {
        skeleton: &skeleton,
        lift: Some(&lift),
        layout: None,
    };
    for d in 1..=6usize {
        let program = doubling_program::<f64>(d);
        let (values, stats) =
            exec::run(&program, local.transforms(), &tables, ExecMode::Sequential).unwrap();
        assert_eq!(stats.global_barriers, d as u64);
        for i in 0..n {
            let window = (1usize << d).min(i + 1);
            let start = i + 1 - window;
            let mut expected: Transform<f64> = *local.get(start);
            for j in start + 1..=i {
                expected = compose(&expected, local.get(j));
            }
            let err = rel_frobenius_error(&values[i], &expected);
            assert!(
                err <= 1e-9,
                "after {d} rounds, joint {i} differs from its {window}-node window: {err:e}"
            );
        }
    }
    println!(
        "ACCEPTANCE 5 (doubling phase coverage): PASS; rounds 1..=6 on a 64-chain \
         match truncated window products"
    );
}

/// The full pipeline closes: skinning at t = 0 against the default bind pose
/// (the clip at t = 0) gives identity matrices for every algorithm.
#[test]
fn criterion_6_skin_identity_at_bind_time() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    cmd_generate(&GenerateOpts {
        out: corpus_dir.clone(),
        spec: CorpusSpec {
            generator: Generator::CharacterLike,
            joints_per_skeleton: 60,
            target_depth: 8,
            skeleton_count: 8,
            seed: 7,
            precision: Precision::Double,
        },
    })
    .unwrap();

    let mut worst = 0.0f64;
    for algorithm in Algorithm::ALL {
        let out = dir.path().join(format!("skin_{algorithm}.json"));
        cmd_skin(&SkinOpts {
            corpus: corpus_dir.clone(),
            algorithm,
            time: 0.0,
            out: Some(out.clone()),
            block_size: 64,
            precision: None,
        })
        .unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        let skeletons = v["skeletons"].as_array().unwrap();
        assert_eq!(skeletons.len(), 8);
        for sk in skeletons {
            for m in sk["skin"].as_array().unwrap() {
                for row in 0..4 {
                    for col in 0..4 {
                        let want = if row == col { 1.0 } else { 0.0 };
                        let got = m[4 * row + col].as_f64().unwrap();
                        worst = worst.max((got - want).abs());
                    }
                }
            }
        }
    }
    assert!(worst < 1e-12, "max identity deviation {worst:e}");
    println!(
        "ACCEPTANCE 6 (skin bind identity): PASS; max |entry - identity| {worst:.2e} < 1e-12 \
         across all 6 algorithms"
    );
}

/// Full-scale run: 10,000 skeletons x 300 joints in one forest, compressed
/// scan plus oracle verification, under ten minutes.
#[test]
fn criterion_7_full_scale_compressed_scan() {
    let t0 = Instant::now();
    let characters = 10_000usize;
    let joints = 300usize;
    let depth = 120usize;
    let mut parts = Vec::with_capacity(characters);
    let mut transforms = Vec::with_capacity(characters * joints);
    for k in 0..characters {
        let mut rng = corpus::item_rng(1007, k as u64);
        parts.push(
            Skeleton::new(
                corpus::generate_parents(Generator::RandomTree, joints, depth, &mut rng).unwrap(),
            )
            .unwrap(),
        );
        transforms
            .extend_from_slice(corpus::random_local_pose::<f64>(joints, &mut rng).transforms());
    }
    let forest = Skeleton::concat(&parts).unwrap();
    drop(parts);
    let local = Pose::local(transforms);
    assert_eq!(forest.len(), 3_000_000);

    let layout = BlockLayout::new(&forest, 64).unwrap();
    let compressed = compressed_scan(&forest, &layout, &local).unwrap();
    let oracle = oracle_scan(&forest, &local).unwrap();
    let err = max_rel_error(&compressed.model_pose, &oracle.model_pose).unwrap();
    assert!(err <= 1e-9, "rel err {err:e}");

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "full-scale run took {elapsed:.0}s");
    println!(
        "ACCEPTANCE 7 (full scale): PASS; 3,000,000 joints, compressed total_mults {}, \
         max critical path {}, rel err {err:.2e}, {elapsed:.1}s including verification",
        compressed.stats.total_mults, compressed.stats.max_mults
    );
}
