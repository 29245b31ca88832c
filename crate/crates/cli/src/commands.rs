//! Implementations behind the CLI subcommands, callable as a library.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use bonescan::scan::run_algorithm;
use bonescan::{
    bind_skin, bit_identical, inverse_bind_from, max_rel_error, oracle_scan, Algorithm,
    BlockLayout, DepthMap, ExecMode, LiftTable, Pose, Real, Skeleton, TrsPose, Wrap,
};

use crate::corpus::{self, CorpusSpec, Generator, Precision};
use crate::report::{modeled_cost, BarrierWeights, BenchConfig, BenchReport, BenchRow};
use crate::CliError;

/// Distinguishes "ran fine" from "ran fine but the numbers failed
/// verification"; the latter maps to exit code 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

pub fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>, CliError> {
    if s == "all" {
        return Ok(Algorithm::PARALLEL.to_vec());
    }
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<Algorithm>()
                .map_err(|e| CliError::Spec(e.to_string()))
        })
        .collect()
}

pub struct GenerateOpts {
    pub out: PathBuf,
    pub spec: CorpusSpec,
}

pub fn cmd_generate(opts: &GenerateOpts) -> Result<Outcome, CliError> {
    let manifest = corpus::write_corpus(&opts.spec, &opts.out)?;
    println!(
        "generated {} skeletons ({} joints each, target depth {}, {} precision) in {}",
        manifest.entries.len(),
        opts.spec.joints_per_skeleton,
        opts.spec.target_depth,
        opts.spec.precision.name(),
        opts.out.display()
    );
    Ok(Outcome::Success)
}

pub struct VerifyOpts {
    pub corpus: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub block_size: usize,
    pub times: usize,
    pub precision: Option<Precision>,
}

pub fn cmd_verify(opts: &VerifyOpts) -> Result<Outcome, CliError> {
    let manifest = corpus::read_manifest(&opts.corpus)?;
    match opts.precision.unwrap_or(manifest.spec.precision) {
        Precision::Double => verify_impl::<f64>(opts),
        Precision::Single => verify_impl::<f32>(opts),
    }
}

fn verify_impl<T: Real>(opts: &VerifyOpts) -> Result<Outcome, CliError> {
    if opts.times == 0 {
        return Err(CliError::Spec("--times must be at least 1".into()));
    }
    let (_, items) = corpus::load_corpus::<T>(&opts.corpus)?;
    if items.is_empty() {
        return Err(CliError::Spec("corpus has no skeletons".into()));
    }
    let denom = (opts.times - 1).max(1) as f64;
    let per_item: Vec<Result<Vec<(f64, bool)>, CliError>> = items
        .par_iter()
        .map(|item| {
            let lift = LiftTable::new(&item.skeleton);
            let layout = BlockLayout::new(&item.skeleton, opts.block_size)?;
            let mut maxima = vec![(0.0f64, true); opts.algorithms.len()];
            for k in 0..opts.times {
                let t = item.clip.duration() * T::lit(k as f64 / denom);
                let local = item
                    .clip
                    .sample(&item.skeleton, t, Wrap::Clamp)?
                    .to_local_pose()?;
                let oracle = oracle_scan(&item.skeleton, &local)?;
                for (slot, &algo) in opts.algorithms.iter().enumerate() {
                    let r = run_algorithm(
                        algo,
                        &item.skeleton,
                        &lift,
                        &layout,
                        &local,
                        ExecMode::Sequential,
                    )?;
                    let err = max_rel_error(&r.model_pose, &oracle.model_pose)?
                        .to_f64()
                        .unwrap_or(f64::INFINITY);
                    maxima[slot].0 = maxima[slot].0.max(err);
                    if algo.bit_exact() && !bit_identical(&r.model_pose, &oracle.model_pose) {
                        maxima[slot].1 = false;
                    }
                }
            }
            Ok(maxima)
        })
        .collect();

    let mut agg = vec![(0.0f64, true); opts.algorithms.len()];
    for item in per_item {
        for (slot, (err, bit_ok)) in item?.into_iter().enumerate() {
            agg[slot].0 = agg[slot].0.max(err);
            agg[slot].1 &= bit_ok;
        }
    }

    let tol = T::SCAN_REL_TOL.to_f64().unwrap_or(f64::NAN);
    let mut outcome = Outcome::Success;
    for (&algo, &(err, bit_ok)) in opts.algorithms.iter().zip(agg.iter()) {
        let (ok, requirement) = if algo.bit_exact() {
            (bit_ok, "bit-identical to oracle".to_string())
        } else {
            (err <= tol, format!("tolerance {tol:.1e}"))
        };
        println!(
            "verify {:<11} max_rel_err {:10.3e}  {}  [{}]",
            algo.name(),
            err,
            requirement,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            outcome = Outcome::VerificationFailed;
        }
    }
    Ok(outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub struct BenchOpts {
    pub corpus: Option<PathBuf>,
    pub depths: Vec<usize>,
    pub joints: usize,
    pub characters: usize,
    pub generator: Generator,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub block_size: usize,
    pub weights: BarrierWeights,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    pub allow_unverified: bool,
    pub precision: Option<Precision>,
    pub exec: ExecMode,
}

pub fn cmd_bench(opts: &BenchOpts) -> Result<Outcome, CliError> {
    let precision = match &opts.corpus {
        Some(dir) => opts
            .precision
            .unwrap_or(corpus::read_manifest(dir)?.spec.precision),
        None => opts.precision.unwrap_or(Precision::Double),
    };
    let (report, outcome) = match precision {
        Precision::Double => bench_impl::<f64>(opts, precision)?,
        Precision::Single => bench_impl::<f32>(opts, precision)?,
    };
    let rendered = match opts.format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report.to_json())?;
            s.push('\n');
            s
        }
    };
    match &opts.out {
        Some(path) => {
            fs::write(path, rendered)?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(outcome)
}

/// One scan input: a forest of `characters` skeletons at a single depth.
struct BenchJob<T: Real> {
    depth: usize,
    forest: Skeleton,
    local: Pose<T>,
}

fn sweep_jobs<T: Real>(opts: &BenchOpts) -> Result<Vec<BenchJob<T>>, CliError> {
    let mut jobs = Vec::new();
    for &depth in &opts.depths {
        // A chain's joint count is pinned by its depth.
        let joints = match opts.generator {
            Generator::Chain => depth + 1,
            _ => opts.joints,
        };
        let mut parts = Vec::with_capacity(opts.characters);
        let mut transforms = Vec::with_capacity(opts.characters * joints);
        for k in 0..opts.characters {
            let index = (depth as u64) << 32 | k as u64;
            let mut rng = corpus::item_rng(opts.seed, index);
            let parents = corpus::generate_parents(opts.generator, joints, depth, &mut rng)?;
            parts.push(Skeleton::new(parents)?);
            transforms
                .extend_from_slice(corpus::random_local_pose::<T>(joints, &mut rng).transforms());
        }
        let forest = Skeleton::concat(&parts)?;
        let local = Pose::local(transforms);
        jobs.push(BenchJob {
            depth,
            forest,
            local,
        });
    }
    Ok(jobs)
}

fn corpus_jobs<T: Real>(dir: &PathBuf) -> Result<(CorpusSpec, Vec<BenchJob<T>>), CliError> {
    let (manifest, items) = corpus::load_corpus::<T>(dir)?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups
            .entry(DepthMap::new(&item.skeleton).max_depth())
            .or_default()
            .push(i);
    }
    let mut jobs = Vec::new();
    for (depth, indices) in groups {
        let parts: Vec<Skeleton> = indices.iter().map(|&i| items[i].skeleton.clone()).collect();
        let forest = Skeleton::concat(&parts)?;
        let mut channels = Vec::new();
        for &i in &indices {
            let item = &items[i];
            let t = item.clip.duration() * T::lit(0.5);
            channels.extend(item.clip.sample(&item.skeleton, t, Wrap::Clamp)?.joints);
        }
        let local = TrsPose { joints: channels }.to_local_pose()?;
        jobs.push(BenchJob {
            depth,
            forest,
            local,
        });
    }
    Ok((manifest.spec, jobs))
}

fn bench_impl<T: Real>(
    opts: &BenchOpts,
    precision: Precision,
) -> Result<(BenchReport, Outcome), CliError> {
    let (jobs, generator_name, joints, characters) = match &opts.corpus {
        Some(dir) => {
            let (spec, jobs) = corpus_jobs::<T>(dir)?;
            (
                jobs,
                spec.generator.name().to_string(),
                spec.joints_per_skeleton,
                spec.skeleton_count,
            )
        }
        None => (
            sweep_jobs::<T>(opts)?,
            opts.generator.name().to_string(),
            opts.joints,
            opts.characters,
        ),
    };

    let mut rows = Vec::new();
    let mut forest_joints = Vec::new();
    let mut first_failure: Option<(usize, Algorithm)> = None;
    for job in &jobs {
        let n = job.forest.len();
        forest_joints.push((job.depth, n));
        let lift = LiftTable::new(&job.forest);
        let layout = BlockLayout::new(&job.forest, opts.block_size)?;
        let oracle = if opts.allow_unverified {
            None
        } else {
            Some(oracle_scan(&job.forest, &job.local)?)
        };
        for &algo in &opts.algorithms {
            let t0 = Instant::now();
            let r = run_algorithm(algo, &job.forest, &lift, &layout, &job.local, opts.exec)?;
            let wall_clock_ms = t0.elapsed().as_secs_f64() * 1e3;
            let verified = match &oracle {
                None => false,
                Some(o) => {
                    let ok = if algo.bit_exact() {
                        bit_identical(&r.model_pose, &o.model_pose)
                    } else {
                        max_rel_error(&r.model_pose, &o.model_pose)? <= T::SCAN_REL_TOL
                    };
                    if !ok {
                        // A row that fails verification is withheld from the
                        // report; the run exits nonzero instead.
                        if first_failure.is_none() {
                            first_failure = Some((job.depth, algo));
                        }
                        continue;
                    }
                    ok
                }
            };
            rows.push(BenchRow {
                depth: job.depth,
                algorithm: algo,
                max_mults: r.stats.max_mults,
                total_mults: r.stats.total_mults,
                global_barriers: r.stats.global_barriers,
                group_barriers: r.stats.group_barriers,
                modeled_cost: modeled_cost(&r.stats, n, opts.weights),
                verified,
                wall_clock_ms,
                per_phase_max_mults: r.stats.per_phase_max_mults.clone(),
            });
        }
    }

    let mut report = BenchReport {
        config: BenchConfig {
            seed: opts.seed,
            generator: generator_name,
            joints_per_skeleton: joints,
            characters,
            block_size: opts.block_size,
            precision,
            weights: opts.weights,
            forest_joints,
        },
        rows,
    };
    report.sort_rows();
    let outcome = match first_failure {
        Some((depth, algo)) => {
            eprintln!(
                "bench: {algo} failed verification against the oracle at depth {depth}; \
                 its rows were withheld"
            );
            Outcome::VerificationFailed
        }
        None => Outcome::Success,
    };
    Ok((report, outcome))
}

pub struct SkinOpts {
    pub corpus: PathBuf,
    pub algorithm: Algorithm,
    pub time: f64,
    pub out: Option<PathBuf>,
    pub block_size: usize,
    pub precision: Option<Precision>,
}

pub fn cmd_skin(opts: &SkinOpts) -> Result<Outcome, CliError> {
    let manifest = corpus::read_manifest(&opts.corpus)?;
    let value = match opts.precision.unwrap_or(manifest.spec.precision) {
        Precision::Double => skin_impl::<f64>(opts)?,
        Precision::Single => skin_impl::<f32>(opts)?,
    };
    let mut rendered = serde_json::to_string_pretty(&value)?;
    rendered.push('\n');
    match &opts.out {
        Some(path) => {
            fs::write(path, rendered)?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(Outcome::Success)
}

/// Skin matrices for every skeleton at one sample time. The bind pose is the
/// clip at t = 0, converted to model space by the same algorithm as the
/// animated pose, so sampling at t = 0 yields identity matrices up to
/// inversion round-off.
fn skin_impl<T: Real>(opts: &SkinOpts) -> Result<serde_json::Value, CliError> {
    let (manifest, items) = corpus::load_corpus::<T>(&opts.corpus)?;
    let mut skeletons = Vec::with_capacity(items.len());
    for (entry, item) in manifest.entries.iter().zip(items.iter()) {
        let lift = LiftTable::new(&item.skeleton);
        let layout = BlockLayout::new(&item.skeleton, opts.block_size)?;
        let scan = |t: T| -> Result<Pose<T>, CliError> {
            let local = item
                .clip
                .sample(&item.skeleton, t, Wrap::Clamp)?
                .to_local_pose()?;
            Ok(run_algorithm(
                opts.algorithm,
                &item.skeleton,
                &lift,
                &layout,
                &local,
                ExecMode::Sequential,
            )?
            .model_pose)
        };
        let bind = scan(T::zero())?;
        let inverse_bind = inverse_bind_from(&bind)?;
        let model = scan(T::lit(opts.time))?;
        let skin = bind_skin(&model, &inverse_bind)?;
        let matrices: Vec<serde_json::Value> = skin
            .transforms()
            .iter()
            .map(|t| serde_json::to_value(t.as_array()))
            .collect::<Result<_, _>>()?;
        skeletons.push(json!({
            "skeleton": entry.skeleton,
            "joints": item.skeleton.len(),
            "skin": matrices,
        }));
    }
    Ok(json!({
        "algorithm": opts.algorithm.name(),
        "time": opts.time,
        "skeletons": skeletons,
    }))
}
