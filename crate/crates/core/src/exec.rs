//! Deterministic simulated data-parallel machine.
//!
//! A [`Program`] is a list of barrier-separated phases. Within a phase every
//! thread reads a snapshot of the value array taken at the phase start (plus
//! its own earlier writes) and buffers its writes; writes commit at the
//! phase-ending barrier. Two threads may write the same cell only if the
//! values agree bit for bit, so the committed state never depends on thread
//! scheduling: running threads forward, backward, or actually in parallel
//! must produce identical bytes, and [`ExecMode`] exists to prove that.
//!
//! The machine also meters work: every composition a thread performs through
//! [`ThreadCtx::compose`] is counted per thread, and every phase commit is
//! counted as a barrier of the phase's kind. Those counters are the cost
//! model the scan algorithms are compared on.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::num::Real;
use crate::skeleton::{BlockLayout, LiftTable, Skeleton};
use crate::transform::{compose, Transform};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("initial values have length {found}, skeleton has {expected} joints")]
    LengthMismatch { expected: usize, found: usize },
    #[error("phase {phase}: conflicting writes to joint {joint}")]
    WriteConflict { phase: usize, joint: usize },
    #[error("phase {phase}: thread {thread} touched joint {joint} outside its group")]
    GroupViolation {
        phase: usize,
        thread: usize,
        joint: usize,
    },
}

/// What the barrier at the end of a phase synchronizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseKind {
    /// All threads; the expensive barrier.
    Global,
    /// Only threads within each aligned group of `group_size` joints. Sound
    /// only if no thread touches a cell outside its own group, which the
    /// executor checks.
    Group { group_size: usize },
}

/// Which joints get a thread in a phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThreadDomain {
    AllJoints,
    LeavesOnly,
}

/// Per-thread phase body. `param` is the phase's [`Phase::param`]; reads,
/// writes, and counted compositions go through `ctx`.
pub type ThreadBody<T> =
    fn(thread: usize, param: usize, ctx: &mut ThreadCtx<'_, T>, tables: &Tables<'_>);

pub struct Phase<T: Real> {
    pub kind: PhaseKind,
    pub domain: ThreadDomain,
    /// Free scalar the body can interpret (table level, run length, ...).
    pub param: usize,
    pub body: ThreadBody<T>,
}

pub struct Program<T: Real> {
    pub phases: Vec<Phase<T>>,
}

/// Read-only lookup structures a program may use. Builders that do not need
/// a table leave it `None`.
#[derive(Clone, Copy)]
pub struct Tables<'a> {
    pub skeleton: &'a Skeleton,
    pub lift: Option<&'a LiftTable>,
    pub layout: Option<&'a BlockLayout>,
}

/// Thread-local view of one phase: snapshot reads, buffered writes, counted
/// compositions.
pub struct ThreadCtx<'a, T: Real> {
    thread: usize,
    snapshot: &'a [Transform<T>],
    /// (joint, value) in write order; later writes to the same joint win.
    writes: Vec<(usize, Transform<T>)>,
    mults: u64,
    /// (group index, group size) under a group barrier; `None` under global.
    group: Option<(usize, usize)>,
    violation: Option<usize>,
}

impl<T: Real> ThreadCtx<'_, T> {
    pub fn thread(&self) -> usize {
        self.thread
    }

    /// Value of `joint` as of the phase start, or this thread's own latest
    /// write to it.
    pub fn read(&mut self, joint: usize) -> Transform<T> {
        self.check_group(joint);
        for &(j, v) in self.writes.iter().rev() {
            if j == joint {
                return v;
            }
        }
        self.snapshot[joint]
    }

    /// Buffers a write; visible to other threads only after the barrier.
    pub fn write(&mut self, joint: usize, value: Transform<T>) {
        self.check_group(joint);
        self.writes.push((joint, value));
    }

    /// The counted work unit: one transform composition.
    pub fn compose(&mut self, parent: &Transform<T>, child: &Transform<T>) -> Transform<T> {
        self.mults += 1;
        compose(parent, child)
    }

    pub fn mults(&self) -> u64 {
        self.mults
    }

    fn check_group(&mut self, joint: usize) {
        if let Some((group, size)) = self.group {
            if joint / size != group && self.violation.is_none() {
                self.violation = Some(joint);
            }
        }
    }
}

/// How the simulated threads of each phase are actually driven. All modes
/// must produce bit-identical values and stats; differing results mean a
/// program has a scheduling dependence the conflict check failed to express.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    /// Threads run one after another in ascending id order.
    Sequential,
    /// Descending id order; flushes out order dependence cheaply.
    ReverseSequential,
    /// Real worker threads via rayon.
    Parallel,
}

/// Exact work and synchronization counters for one program run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecStats {
    /// Compositions summed over all phases, indexed by thread id (joint id).
    pub per_thread_mults: Vec<u64>,
    pub max_mults: u64,
    pub total_mults: u64,
    pub global_barriers: u64,
    pub group_barriers: u64,
    pub phases: u64,
    /// Critical-path compositions of each phase, in program order.
    pub per_phase_max_mults: Vec<u64>,
}

impl ExecStats {
    pub fn zeroed(threads: usize) -> Self {
        ExecStats {
            per_thread_mults: vec![0; threads],
            max_mults: 0,
            total_mults: 0,
            global_barriers: 0,
            group_barriers: 0,
            phases: 0,
            per_phase_max_mults: Vec::new(),
        }
    }

    /// Recomputes the scalar aggregates from `per_thread_mults`.
    pub fn finish(&mut self) {
        self.max_mults = self.per_thread_mults.iter().copied().max().unwrap_or(0);
        self.total_mults = self.per_thread_mults.iter().sum();
    }

    /// Report form: scalar counters plus a histogram of per-thread work
    /// (`count of threads` keyed by `mult count`).
    pub fn to_json(&self) -> serde_json::Value {
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        for &m in &self.per_thread_mults {
            *hist.entry(m).or_insert(0) += 1;
        }
        let hist: BTreeMap<String, u64> =
            hist.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        json!({
            "max_mults": self.max_mults,
            "total_mults": self.total_mults,
            "global_barriers": self.global_barriers,
            "group_barriers": self.group_barriers,
            "phases": self.phases,
            "per_thread_hist": hist,
        })
    }
}

struct ThreadOutcome<T: Real> {
    thread: usize,
    writes: Vec<(usize, Transform<T>)>,
    mults: u64,
    violation: Option<usize>,
}

fn run_thread<T: Real>(
    phase: &Phase<T>,
    thread: usize,
    snapshot: &[Transform<T>],
    tables: &Tables<'_>,
) -> ThreadOutcome<T> {
    let mut ctx = ThreadCtx {
        thread,
        snapshot,
        writes: Vec::new(),
        mults: 0,
        group: match phase.kind {
            PhaseKind::Global => None,
            PhaseKind::Group { group_size } => Some((thread / group_size, group_size)),
        },
        violation: None,
    };
    (phase.body)(thread, phase.param, &mut ctx, tables);
    ThreadOutcome {
        thread,
        writes: ctx.writes,
        mults: ctx.mults,
        violation: ctx.violation,
    }
}

/// Runs `program` over `initial` (one transform per joint) and returns the
/// final value array with its counters.
pub fn run<T: Real>(
    program: &Program<T>,
    initial: &[Transform<T>],
    tables: &Tables<'_>,
    mode: ExecMode,
) -> Result<(Vec<Transform<T>>, ExecStats), ExecError> {
    let n = tables.skeleton.len();
    if initial.len() != n {
        return Err(ExecError::LengthMismatch {
            expected: n,
            found: initial.len(),
        });
    }
    let mut values = initial.to_vec();
    let mut stats = ExecStats::zeroed(n);
    // stamp[j] == phase index + 1 marks "already written this phase".
    let mut stamp = vec![0u64; n];
    let leaves: Vec<usize> = if program
        .phases
        .iter()
        .any(|p| p.domain == ThreadDomain::LeavesOnly)
    {
        tables.skeleton.leaves()
    } else {
        Vec::new()
    };

    for (phase_index, phase) in program.phases.iter().enumerate() {
        let snapshot = values.clone();
        let threads: Vec<usize> = match phase.domain {
            ThreadDomain::AllJoints => (0..n).collect(),
            ThreadDomain::LeavesOnly => leaves.clone(),
        };
        let tag = phase_index as u64 + 1;

        let mut commit = |outcome: ThreadOutcome<T>,
                          values: &mut Vec<Transform<T>>,
                          stats: &mut ExecStats,
                          phase_max: &mut u64|
         -> Result<(), ExecError> {
            if let Some(joint) = outcome.violation {
                return Err(ExecError::GroupViolation {
                    phase: phase_index,
                    thread: outcome.thread,
                    joint,
                });
            }
            stats.per_thread_mults[outcome.thread] += outcome.mults;
            *phase_max = (*phase_max).max(outcome.mults);
            for (joint, value) in outcome.writes {
                if stamp[joint] == tag {
                    if !values[joint].bit_eq(&value) {
                        return Err(ExecError::WriteConflict {
                            phase: phase_index,
                            joint,
                        });
                    }
                } else {
                    stamp[joint] = tag;
                    values[joint] = value;
                }
            }
            Ok(())
        };

        let mut phase_max = 0u64;
        match mode {
            ExecMode::Sequential => {
                for &t in &threads {
                    let outcome = run_thread(phase, t, &snapshot, tables);
                    commit(outcome, &mut values, &mut stats, &mut phase_max)?;
                }
            }
            ExecMode::ReverseSequential => {
                for &t in threads.iter().rev() {
                    let outcome = run_thread(phase, t, &snapshot, tables);
                    commit(outcome, &mut values, &mut stats, &mut phase_max)?;
                }
            }
            ExecMode::Parallel => {
                let outcomes: Vec<ThreadOutcome<T>> = threads
                    .par_iter()
                    .map(|&t| run_thread(phase, t, &snapshot, tables))
                    .collect();
                for outcome in outcomes {
                    commit(outcome, &mut values, &mut stats, &mut phase_max)?;
                }
            }
        }

        stats.phases += 1;
        stats.per_phase_max_mults.push(phase_max);
        match phase.kind {
            PhaseKind::Global => stats.global_barriers += 1,
            PhaseKind::Group { .. } => stats.group_barriers += 1,
        }
    }

    stats.finish();
    Ok((values, stats))
}
