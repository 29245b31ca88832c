//! Benchmark report assembly and rendering.
//!
//! CSV is the stable machine-readable format: fixed column order, no
//! wall-clock column, so identical seeds yield identical bytes. JSON carries
//! the same rows plus wall-clock timings, per-phase critical paths, and the
//! configuration block.

use std::fmt::Write as _;

use serde_json::json;

use bonescan::{Algorithm, ExecStats};

use crate::corpus::Precision;

/// Cost weights for the synchronization model, `(global, group)`. A global
/// barrier is modeled as `global * n` units of work, a group barrier as
/// `group * n`; the default 4:1 reflects how much cheaper intra-group
/// synchronization is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierWeights {
    pub global: f64,
    pub group: f64,
}

impl Default for BarrierWeights {
    fn default() -> Self {
        BarrierWeights {
            global: 4.0,
            group: 1.0,
        }
    }
}

impl BarrierWeights {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("expected two comma-separated weights, got {s:?}"));
        }
        let global: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|e| format!("global weight: {e}"))?;
        let group: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|e| format!("group weight: {e}"))?;
        if !(global >= 0.0 && group >= 0.0) {
            return Err("barrier weights must be non-negative".into());
        }
        Ok(BarrierWeights { global, group })
    }
}

/// `total_mults + w_global * global_barriers * n + w_group * group_barriers * n`
/// where `n` is the joint count of the scanned forest.
pub fn modeled_cost(stats: &ExecStats, n: usize, weights: BarrierWeights) -> f64 {
    stats.total_mults as f64
        + weights.global * stats.global_barriers as f64 * n as f64
        + weights.group * stats.group_barriers as f64 * n as f64
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub depth: usize,
    pub algorithm: Algorithm,
    pub max_mults: u64,
    pub total_mults: u64,
    pub global_barriers: u64,
    pub group_barriers: u64,
    pub modeled_cost: f64,
    pub verified: bool,
    pub wall_clock_ms: f64,
    pub per_phase_max_mults: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub seed: u64,
    pub generator: String,
    pub joints_per_skeleton: usize,
    pub characters: usize,
    pub block_size: usize,
    pub precision: Precision,
    pub weights: BarrierWeights,
    pub forest_joints: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

fn algorithm_rank(a: Algorithm) -> usize {
    Algorithm::ALL.iter().position(|&x| x == a).unwrap()
}

impl BenchReport {
    /// Canonical row order: depth ascending, then algorithm in declaration
    /// order.
    pub fn sort_rows(&mut self) {
        self.rows
            .sort_by_key(|r| (r.depth, algorithm_rank(r.algorithm)));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "depth,algorithm,max_mults,total_mults,global_barriers,group_barriers,modeled_cost,verified\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.depth,
                r.algorithm,
                r.max_mults,
                r.total_mults,
                r.global_barriers,
                r.group_barriers,
                r.modeled_cost,
                r.verified
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let c = &self.config;
        // Two ways to count the compressed scan's in-block work: slots
        // reserved by the two fixed-size passes versus compositions actually
        // performed (each pass does one fewer than its slot count).
        let run_length = 1usize << bonescan::scan::run_exponent(c.block_size);
        let runs_per_block = c.block_size.div_ceil(run_length);
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "depth": r.depth,
                    "algorithm": r.algorithm.name(),
                    "max_mults": r.max_mults,
                    "total_mults": r.total_mults,
                    "global_barriers": r.global_barriers,
                    "group_barriers": r.group_barriers,
                    "modeled_cost": r.modeled_cost,
                    "verified": r.verified,
                    "wall_clock_ms": r.wall_clock_ms,
                    "per_phase_max_mults": r.per_phase_max_mults,
                })
            })
            .collect();
        json!({
            "config": {
                "seed": c.seed,
                "generator": c.generator,
                "joints_per_skeleton": c.joints_per_skeleton,
                "characters": c.characters,
                "block_size": c.block_size,
                "precision": c.precision,
                "barrier_weights": {"global": c.weights.global, "group": c.weights.group},
                "forest_joints": c.forest_joints.iter().map(|(d, n)| json!({"depth": d, "joints": n})).collect::<Vec<_>>(),
                "compressed_in_block": {
                    "run_length": run_length,
                    "runs_per_block": runs_per_block,
                    "slot_budget": run_length + runs_per_block,
                    "max_compositions": (run_length - 1) + (runs_per_block - 1),
                },
            },
            "rows": rows,
        })
    }
}
