//! Skeletal pose propagation on a deterministic simulated data-parallel
//! machine.
//!
//! The crate converts joint-local poses to model space (a prefix product of
//! affine transforms along every root-to-joint chain) and meters what that
//! costs a barrier-synchronized parallel machine: compositions per thread,
//! plus global and group barriers. Six interchangeable algorithms cover the
//! span from the sequential reference to a block-compressed scan that needs
//! a constant number of barriers regardless of hierarchy depth.
//!
//! Everything is generic over the scalar (`f32` or `f64`) through
//! [`num::Real`]; the `*32`/`*64` aliases below pin the two concrete
//! instantiations.

pub mod clip;
pub mod exec;
pub mod io;
pub mod num;
pub mod pose;
pub mod scan;
pub mod skeleton;
pub mod transform;

pub use clip::{AnimationClip, Keyframe, Wrap};
pub use exec::{
    ExecError, ExecMode, ExecStats, Phase, PhaseKind, Program, Tables, ThreadCtx, ThreadDomain,
};
pub use num::Real;
pub use pose::{
    bind_skin, bit_identical, blend, inverse_bind_from, max_rel_error, Pose, PoseError, PoseSpace,
    Trs, TrsPose,
};
pub use scan::{
    blocked_scan, compressed_scan, doubling_scan, gateau_scan, leaf_scan, oracle_scan,
    run_algorithm, Algorithm, ScanError, ScanResult, UnknownAlgorithm,
};
pub use skeleton::{
    reindex_topological, BlockLayout, DepthMap, LiftTable, Skeleton, SkeletonError,
};
pub use transform::{compose, rel_frobenius_error, Quat, Transform};

pub type Transform32 = Transform<f32>;
pub type Transform64 = Transform<f64>;
pub type Quat32 = Quat<f32>;
pub type Quat64 = Quat<f64>;
pub type Trs32 = Trs<f32>;
pub type Trs64 = Trs<f64>;
pub type Pose32 = Pose<f32>;
pub type Pose64 = Pose<f64>;
pub type TrsPose32 = TrsPose<f32>;
pub type TrsPose64 = TrsPose<f64>;
pub type AnimationClip32 = AnimationClip<f32>;
pub type AnimationClip64 = AnimationClip<f64>;
