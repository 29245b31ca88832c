//! Local-to-model pose conversion.
//!
//! Converting a local pose to model space is a prefix product of transforms
//! along every root-to-joint chain, with composition order fixed (parent on
//! the left). [`oracle_scan`] is the sequential reference: one pass in index
//! order, one composition per non-root joint. The other five algorithms are
//! [`Program`]s for the simulated machine that trade extra compositions for
//! fewer or cheaper barriers:
//!
//! * `gateau`: one global phase, every joint walks its full chain.
//! * `leaf`: one global phase, one thread per leaf writes the whole path.
//! * `doubling`: pointer jumping over the lift table, `ceil(log2(depth+1))`
//!   global phases.
//! * `blocked`: pointer jumping confined to fixed blocks, then one walk
//!   phase across block summaries.
//! * `compressed`: serial run + strided pass inside each block under cheap
//!   group barriers, then one global cross-block walk phase.
//!
//! `gateau` and `leaf` associate their folds exactly like the oracle (from
//! the root downward), so their outputs are bit-identical to it. The
//! re-associating algorithms agree within [`Real::SCAN_REL_TOL`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::exec::{
    self, ExecMode, ExecStats, Phase, PhaseKind, Program, Tables, ThreadCtx, ThreadDomain,
};
use crate::num::Real;
use crate::pose::{Pose, PoseSpace};
use crate::skeleton::{BlockLayout, DepthMap, LiftTable, Skeleton};
use crate::transform::{compose, Transform};

#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("local pose has {pose} transforms, skeleton has {joints} joints")]
    LengthMismatch { pose: usize, joints: usize },
    #[error("scan input must be a local-space pose, found {found:?}")]
    WrongSpace { found: PoseSpace },
    #[error(transparent)]
    Exec(#[from] exec::ExecError),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error(
    "unknown algorithm {0:?} (expected oracle, gateau, leaf, doubling, blocked, or compressed)"
)]
pub struct UnknownAlgorithm(pub String);

/// The six scan strategies by their stable names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Oracle,
    Gateau,
    Leaf,
    Doubling,
    Blocked,
    Compressed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Oracle,
        Algorithm::Gateau,
        Algorithm::Leaf,
        Algorithm::Doubling,
        Algorithm::Blocked,
        Algorithm::Compressed,
    ];

    /// The data-parallel variants, i.e. everything but the sequential
    /// reference.
    pub const PARALLEL: [Algorithm; 5] = [
        Algorithm::Gateau,
        Algorithm::Leaf,
        Algorithm::Doubling,
        Algorithm::Blocked,
        Algorithm::Compressed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oracle => "oracle",
            Algorithm::Gateau => "gateau",
            Algorithm::Leaf => "leaf",
            Algorithm::Doubling => "doubling",
            Algorithm::Blocked => "blocked",
            Algorithm::Compressed => "compressed",
        }
    }

    /// True for the two algorithms whose output is bit-identical to the
    /// oracle rather than tolerance-equal.
    pub fn bit_exact(self) -> bool {
        matches!(
            self,
            Algorithm::Oracle | Algorithm::Gateau | Algorithm::Leaf
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct ScanResult<T: Real> {
    pub model_pose: Pose<T>,
    pub stats: ExecStats,
}

fn check_input<T: Real>(skeleton: &Skeleton, local: &Pose<T>) -> Result<(), ScanError> {
    if local.space() != PoseSpace::Local {
        return Err(ScanError::WrongSpace {
            found: local.space(),
        });
    }
    if local.len() != skeleton.len() {
        return Err(ScanError::LengthMismatch {
            pose: local.len(),
            joints: skeleton.len(),
        });
    }
    Ok(())
}

/// Sequential reference: parents are finished before children because of the
/// index order, so each joint costs exactly one composition.
pub fn oracle_scan<T: Real>(
    skeleton: &Skeleton,
    local: &Pose<T>,
) -> Result<ScanResult<T>, ScanError> {
    check_input(skeleton, local)?;
    let n = skeleton.len();
    let mut model: Vec<Transform<T>> = Vec::with_capacity(n);
    let mut stats = ExecStats::zeroed(n);
    for i in 0..n {
        match skeleton.parent(i) {
            None => model.push(*local.get(i)),
            Some(p) => {
                let v = compose(&model[p], local.get(i));
                model.push(v);
                stats.per_thread_mults[i] = 1;
            }
        }
    }
    stats.finish();
    Ok(ScanResult {
        model_pose: Pose::model(model),
        stats,
    })
}

/// Collects the chain from `joint` to its root, joint first.
fn chain_to_root(skeleton: &Skeleton, joint: usize) -> Vec<usize> {
    let mut chain = vec![joint];
    let mut cur = joint;
    while let Some(p) = skeleton.parent(cur) {
        chain.push(p);
        cur = p;
    }
    chain
}

/// One thread per joint; each walks its whole chain and folds from the root
/// downward, reproducing the oracle's association exactly.
fn full_chain_body<T: Real>(
    t: usize,
    _param: usize,
    ctx: &mut ThreadCtx<'_, T>,
    tables: &Tables<'_>,
) {
    if tables.skeleton.is_root(t) {
        return;
    }
    let chain = chain_to_root(tables.skeleton, t);
    let mut acc = ctx.read(*chain.last().unwrap());
    for &j in chain.iter().rev().skip(1) {
        let local = ctx.read(j);
        acc = ctx.compose(&acc, &local);
    }
    ctx.write(t, acc);
}

/// One thread per leaf; folds from the root downward and writes every prefix
/// on the way. Shared ancestors receive the same bits from every leaf below
/// them, so the duplicate writes commit cleanly.
fn leaf_path_body<T: Real>(
    t: usize,
    _param: usize,
    ctx: &mut ThreadCtx<'_, T>,
    tables: &Tables<'_>,
) {
    let chain = chain_to_root(tables.skeleton, t);
    let root = *chain.last().unwrap();
    let mut acc = ctx.read(root);
    ctx.write(root, acc);
    for &j in chain.iter().rev().skip(1) {
        let local = ctx.read(j);
        acc = ctx.compose(&acc, &local);
        ctx.write(j, acc);
    }
}

/// Pointer-jumping step: prepend the value of the `2^level`-th ancestor.
/// After the phase for level `k`, every value covers its nearest
/// `2^(k+1)` chain nodes (or the whole chain if shorter).
fn lift_hop_body<T: Real>(t: usize, level: usize, ctx: &mut ThreadCtx<'_, T>, tables: &Tables<'_>) {
    let lift = tables.lift.expect("scan program needs a lift table");
    if let Some(a) = lift.ancestor(t, level) {
        let upper = ctx.read(a);
        let own = ctx.read(t);
        let v = ctx.compose(&upper, &own);
        ctx.write(t, v);
    }
}

/// Same step against the block-clamped table.
fn in_block_hop_body<T: Real>(
    t: usize,
    level: usize,
    ctx: &mut ThreadCtx<'_, T>,
    tables: &Tables<'_>,
) {
    let layout = tables.layout.expect("scan program needs a block layout");
    if let Some(a) = layout.in_block().ancestor(t, level) {
        let upper = ctx.read(a);
        let own = ctx.read(t);
        let v = ctx.compose(&upper, &own);
        ctx.write(t, v);
    }
}

/// Walks nearest-out-of-block ancestors, prepending each one's block-local
/// summary. Runs after every value covers its full in-block segment, so the
/// concatenation reaches the root.
fn cross_block_walk_body<T: Real>(
    t: usize,
    _param: usize,
    ctx: &mut ThreadCtx<'_, T>,
    tables: &Tables<'_>,
) {
    let layout = tables.layout.expect("scan program needs a block layout");
    let mut cur = layout.max_parent_out_block(t);
    if cur.is_none() {
        return;
    }
    let mut acc = ctx.read(t);
    while let Some(a) = cur {
        let upper = ctx.read(a);
        acc = ctx.compose(&upper, &acc);
        cur = layout.max_parent_out_block(a);
    }
    ctx.write(t, acc);
}

/// Prepends up to `run_len - 1` successive in-block parents one at a time.
/// Afterwards every value covers its nearest `run_len` in-block nodes.
fn serial_run_body<T: Real>(
    t: usize,
    run_len: usize,
    ctx: &mut ThreadCtx<'_, T>,
    tables: &Tables<'_>,
) {
    let layout = tables.layout.expect("scan program needs a block layout");
    let table = layout.in_block();
    let mut cur = table.ancestor(t, 0);
    if cur.is_none() {
        return;
    }
    let mut acc = ctx.read(t);
    let mut steps = 0;
    while let Some(p) = cur {
        if steps == run_len - 1 {
            break;
        }
        let upper = ctx.read(p);
        acc = ctx.compose(&upper, &acc);
        steps += 1;
        cur = table.ancestor(p, 0);
    }
    ctx.write(t, acc);
}

/// Walks in strides of `run_len = 2^run_exp`, prepending the run summaries
/// produced by [`serial_run_body`]. The hop count is bounded by
/// `ceil(block_size / run_len) - 1`; a block-local chain always runs out of
/// ancestors before the bound binds.
fn strided_run_body<T: Real>(
    t: usize,
    run_exp: usize,
    ctx: &mut ThreadCtx<'_, T>,
    tables: &Tables<'_>,
) {
    let layout = tables.layout.expect("scan program needs a block layout");
    let table = layout.in_block();
    let run_len = 1usize << run_exp;
    let hop_limit = layout.block_size().div_ceil(run_len) - 1;
    let mut cur = table.ancestor(t, run_exp);
    if cur.is_none() || hop_limit == 0 {
        return;
    }
    let mut acc = ctx.read(t);
    let mut hops = 0;
    while let Some(a) = cur {
        if hops == hop_limit {
            break;
        }
        let upper = ctx.read(a);
        acc = ctx.compose(&upper, &acc);
        hops += 1;
        cur = table.ancestor(a, run_exp);
    }
    ctx.write(t, acc);
}

fn global_phase<T: Real>(
    domain: ThreadDomain,
    param: usize,
    body: fn(usize, usize, &mut ThreadCtx<'_, T>, &Tables<'_>),
) -> Phase<T> {
    Phase {
        kind: PhaseKind::Global,
        domain,
        param,
        body,
    }
}

pub fn gateau_program<T: Real>() -> Program<T> {
    Program {
        phases: vec![global_phase(ThreadDomain::AllJoints, 0, full_chain_body)],
    }
}

pub fn leaf_program<T: Real>() -> Program<T> {
    Program {
        phases: vec![global_phase(ThreadDomain::LeavesOnly, 0, leaf_path_body)],
    }
}

/// `rounds` pointer-jumping phases with hop distances 1, 2, 4, ...
pub fn doubling_program<T: Real>(rounds: usize) -> Program<T> {
    Program {
        phases: (0..rounds)
            .map(|level| global_phase(ThreadDomain::AllJoints, level, lift_hop_body))
            .collect(),
    }
}

/// In-block pointer jumping (`in_block_levels` phases) followed by one
/// cross-block walk phase, all under global barriers.
pub fn blocked_program<T: Real>(in_block_levels: usize) -> Program<T> {
    let mut phases: Vec<Phase<T>> = (0..in_block_levels)
        .map(|level| global_phase(ThreadDomain::AllJoints, level, in_block_hop_body))
        .collect();
    phases.push(global_phase(
        ThreadDomain::AllJoints,
        0,
        cross_block_walk_body,
    ));
    Program { phases }
}

/// Serial run phase and strided phase inside each block (group barriers,
/// group = block), then the global cross-block walk.
pub fn compressed_program<T: Real>(block_size: usize, run_exp: usize) -> Program<T> {
    let group = PhaseKind::Group {
        group_size: block_size,
    };
    Program {
        phases: vec![
            Phase {
                kind: group,
                domain: ThreadDomain::AllJoints,
                param: 1 << run_exp,
                body: serial_run_body,
            },
            Phase {
                kind: group,
                domain: ThreadDomain::AllJoints,
                param: run_exp,
                body: strided_run_body,
            },
            global_phase(ThreadDomain::AllJoints, 0, cross_block_walk_body),
        ],
    }
}

/// Number of pointer-jumping rounds that cover chains of `max_depth`:
/// `ceil(log2(max_depth + 1))`.
pub fn doubling_rounds(max_depth: usize) -> usize {
    (usize::BITS - max_depth.leading_zeros()) as usize
}

/// Stride exponent for the compressed scan: runs of `2^ceil(levels/2)`
/// joints split in-block work evenly between the serial and strided phases
/// (8 for the default block size of 64).
pub fn run_exponent(block_size: usize) -> usize {
    let levels = block_size.next_power_of_two().trailing_zeros() as usize;
    levels.div_ceil(2)
}

fn run_scan<T: Real>(
    program: &Program<T>,
    skeleton: &Skeleton,
    lift: Option<&LiftTable>,
    layout: Option<&BlockLayout>,
    local: &Pose<T>,
    mode: ExecMode,
) -> Result<ScanResult<T>, ScanError> {
    check_input(skeleton, local)?;
    let tables = Tables {
        skeleton,
        lift,
        layout,
    };
    let (values, stats) = exec::run(program, local.transforms(), &tables, mode)?;
    Ok(ScanResult {
        model_pose: Pose::model(values),
        stats,
    })
}

pub fn gateau_scan<T: Real>(
    skeleton: &Skeleton,
    local: &Pose<T>,
) -> Result<ScanResult<T>, ScanError> {
    run_scan(
        &gateau_program(),
        skeleton,
        None,
        None,
        local,
        ExecMode::Sequential,
    )
}

pub fn leaf_scan<T: Real>(
    skeleton: &Skeleton,
    local: &Pose<T>,
) -> Result<ScanResult<T>, ScanError> {
    run_scan(
        &leaf_program(),
        skeleton,
        None,
        None,
        local,
        ExecMode::Sequential,
    )
}

pub fn doubling_scan<T: Real>(
    skeleton: &Skeleton,
    lift: &LiftTable,
    local: &Pose<T>,
) -> Result<ScanResult<T>, ScanError> {
    let rounds = doubling_rounds(DepthMap::new(skeleton).max_depth());
    run_scan(
        &doubling_program(rounds),
        skeleton,
        Some(lift),
        None,
        local,
        ExecMode::Sequential,
    )
}

pub fn blocked_scan<T: Real>(
    skeleton: &Skeleton,
    layout: &BlockLayout,
    local: &Pose<T>,
) -> Result<ScanResult<T>, ScanError> {
    run_scan(
        &blocked_program(layout.in_block().levels()),
        skeleton,
        None,
        Some(layout),
        local,
        ExecMode::Sequential,
    )
}

pub fn compressed_scan<T: Real>(
    skeleton: &Skeleton,
    layout: &BlockLayout,
    local: &Pose<T>,
) -> Result<ScanResult<T>, ScanError> {
    run_scan(
        &compressed_program(layout.block_size(), run_exponent(layout.block_size())),
        skeleton,
        None,
        Some(layout),
        local,
        ExecMode::Sequential,
    )
}

/// Runs any algorithm with the caller's choice of executor mode. The tables
/// are taken by reference so one set serves all six.
pub fn run_algorithm<T: Real>(
    algorithm: Algorithm,
    skeleton: &Skeleton,
    lift: &LiftTable,
    layout: &BlockLayout,
    local: &Pose<T>,
    mode: ExecMode,
) -> Result<ScanResult<T>, ScanError> {
    match algorithm {
        Algorithm::Oracle => oracle_scan(skeleton, local),
        Algorithm::Gateau => run_scan(&gateau_program(), skeleton, None, None, local, mode),
        Algorithm::Leaf => run_scan(&leaf_program(), skeleton, None, None, local, mode),
        Algorithm::Doubling => {
            let rounds = doubling_rounds(DepthMap::new(skeleton).max_depth());
            run_scan(
                &doubling_program(rounds),
                skeleton,
                Some(lift),
                None,
                local,
                mode,
            )
        }
        Algorithm::Blocked => run_scan(
            &blocked_program(layout.in_block().levels()),
            skeleton,
            None,
            Some(layout),
            local,
            mode,
        ),
        Algorithm::Compressed => run_scan(
            &compressed_program(layout.block_size(), run_exponent(layout.block_size())),
            skeleton,
            None,
            Some(layout),
            local,
            mode,
        ),
    }
}
