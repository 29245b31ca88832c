//! Seeded corpus generation and loading.
//!
//! A corpus directory holds `skeleton_NNNN.json` / `clip_NNNN.json` pairs
//! plus a `manifest.json` recording the generation parameters. Every byte is
//! a pure function of those parameters: skeleton `k` draws from its own
//! ChaCha stream derived from `(seed, k)`, so regenerating any subset
//! reproduces identical files.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use bonescan::io::{load_clip, load_skeleton, save_clip, save_skeleton};
use bonescan::{AnimationClip, Keyframe, Pose, Quat, Real, Skeleton, Trs, TrsPose};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Generator {
    /// Single path: joint i hangs off joint i-1.
    Chain,
    /// A backbone path of the target depth plus uniform random attachment.
    RandomTree,
    /// A spine of the target depth with short limb chains hanging off it.
    CharacterLike,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Chain => "chain",
            Generator::RandomTree => "random_tree",
            Generator::CharacterLike => "character_like",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

/// Everything that determines a corpus, bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub generator: Generator,
    pub joints_per_skeleton: usize,
    pub target_depth: usize,
    pub skeleton_count: usize,
    pub seed: u64,
    pub precision: Precision,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub skeleton: String,
    pub clip: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: CorpusSpec,
    pub entries: Vec<ManifestEntry>,
}

/// One loaded skeleton/clip pair, tracks already permuted if the skeleton
/// file needed reindexing.
pub struct CorpusItem<T> {
    pub skeleton: Skeleton,
    pub clip: AnimationClip<T>,
}

/// Independent random stream for item `index` of a corpus.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn validate(generator: Generator, joints: usize, target_depth: usize) -> Result<(), CliError> {
    if joints == 0 {
        return Err(CliError::Spec(
            "joints_per_skeleton must be at least 1".into(),
        ));
    }
    if target_depth >= joints {
        return Err(CliError::Spec(format!(
            "target depth {target_depth} needs more than {joints} joints"
        )));
    }
    match generator {
        Generator::Chain => {
            if target_depth != joints - 1 {
                return Err(CliError::Spec(format!(
                    "a chain of {joints} joints has depth {}, not {target_depth}",
                    joints - 1
                )));
            }
        }
        Generator::RandomTree | Generator::CharacterLike => {
            if joints > 1 && target_depth == 0 {
                return Err(CliError::Spec(
                    "tree generators need target depth >= 1 to place extra joints".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Generates a parent list whose maximum depth is exactly `target_depth`.
/// Output is already in topological order.
pub fn generate_parents(
    generator: Generator,
    joints: usize,
    target_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Option<usize>>, CliError> {
    validate(generator, joints, target_depth)?;
    // Backbone path guarantees the exact target depth for every generator.
    let mut parents: Vec<Option<usize>> = (0..=target_depth).map(|i| i.checked_sub(1)).collect();
    let mut depths: Vec<usize> = (0..=target_depth).collect();
    // Joints that can still take children without exceeding the target.
    let mut eligible: Vec<usize> = (0..target_depth).collect();
    match generator {
        Generator::Chain => {}
        Generator::RandomTree => {
            for j in parents.len()..joints {
                let attach = eligible[rng.random_range(0..eligible.len())];
                parents.push(Some(attach));
                let d = depths[attach] + 1;
                depths.push(d);
                if d < target_depth {
                    eligible.push(j);
                }
            }
        }
        Generator::CharacterLike => {
            while parents.len() < joints {
                let attach = eligible[rng.random_range(0..eligible.len())];
                let room = target_depth - depths[attach];
                let len = rng
                    .random_range(1..=5usize)
                    .min(room)
                    .min(joints - parents.len());
                let mut prev = attach;
                for _ in 0..len {
                    let j = parents.len();
                    parents.push(Some(prev));
                    let d = depths[prev] + 1;
                    depths.push(d);
                    if d < target_depth {
                        eligible.push(j);
                    }
                    prev = j;
                }
            }
        }
    }
    Ok(parents)
}

/// Uniformly distributed unit quaternion (subgroup algorithm).
pub fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quat<f64> {
    let u1: f64 = rng.random::<f64>();
    let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    Quat::new(b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin())
}

/// Well-conditioned random channels: translations within [-5, 5], scales in
/// [0.5, 2], rotation uniform on the unit sphere.
pub fn random_trs(rng: &mut ChaCha8Rng) -> Trs<f64> {
    Trs {
        translation: [
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ],
        rotation: random_unit_quat(rng),
        scale: [
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
        ],
    }
}

fn convert_trs<T: Real>(t: &Trs<f64>) -> Trs<T> {
    Trs {
        translation: [
            T::lit(t.translation[0]),
            T::lit(t.translation[1]),
            T::lit(t.translation[2]),
        ],
        rotation: Quat::new(
            T::lit(t.rotation.w),
            T::lit(t.rotation.x),
            T::lit(t.rotation.y),
            T::lit(t.rotation.z),
        ),
        scale: [T::lit(t.scale[0]), T::lit(t.scale[1]), T::lit(t.scale[2])],
    }
}

/// Four keys per track at 0, 1/3, 2/3, and 1 of a one-second clip.
pub fn generate_clip(joints: usize, rng: &mut ChaCha8Rng) -> AnimationClip<f64> {
    let duration = 1.0;
    let tracks = (0..joints)
        .map(|_| {
            (0..4)
                .map(|k| Keyframe {
                    time: k as f64 * duration / 3.0,
                    value: random_trs(rng),
                })
                .collect()
        })
        .collect();
    AnimationClip::new(duration, tracks).expect("generated keys are valid by construction")
}

/// Random local matrix pose, the clip-free input used by depth sweeps.
pub fn random_local_pose<T: Real>(joints: usize, rng: &mut ChaCha8Rng) -> Pose<T> {
    let pose = TrsPose {
        joints: (0..joints)
            .map(|_| convert_trs::<T>(&random_trs(rng)))
            .collect(),
    };
    pose.to_local_pose()
        .expect("generated rotations are unit quaternions")
}

pub fn write_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Manifest, CliError> {
    validate(spec.generator, spec.joints_per_skeleton, spec.target_depth)?;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(spec.skeleton_count);
    for k in 0..spec.skeleton_count {
        let mut rng = item_rng(spec.seed, k as u64);
        let parents = generate_parents(
            spec.generator,
            spec.joints_per_skeleton,
            spec.target_depth,
            &mut rng,
        )?;
        let names = (0..parents.len())
            .map(|i| format!("joint_{i:03}"))
            .collect();
        let skeleton = Skeleton::with_names(parents, names)?;
        let clip = generate_clip(spec.joints_per_skeleton, &mut rng);
        let skeleton_file = format!("skeleton_{k:04}.json");
        let clip_file = format!("clip_{k:04}.json");
        save_skeleton(&dir.join(&skeleton_file), &skeleton)?;
        save_clip(&dir.join(&clip_file), &clip)?;
        entries.push(ManifestEntry {
            skeleton: skeleton_file,
            clip: clip_file,
        });
    }
    let manifest = Manifest {
        spec: *spec,
        entries,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads every pair in the manifest; clip tracks follow any reindexing the
/// skeleton loader applied.
pub fn load_corpus<T: Real>(dir: &Path) -> Result<(Manifest, Vec<CorpusItem<T>>), CliError> {
    let manifest = read_manifest(dir)?;
    let mut items = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let loaded = load_skeleton(&dir.join(&entry.skeleton))?;
        let mut clip: AnimationClip<T> = load_clip(&dir.join(&entry.clip))?;
        if let Some(perm) = &loaded.permutation {
            clip = clip.permuted(perm)?;
        }
        items.push(CorpusItem {
            skeleton: loaded.skeleton,
            clip,
        });
    }
    Ok((manifest, items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bonescan::DepthMap;

    #[test]
    fn generators_hit_the_target_depth_exactly() {
        let mut rng = item_rng(7, 0);
        for generator in [Generator::RandomTree, Generator::CharacterLike] {
            for depth in [1, 5, 30, 119] {
                let parents = generate_parents(generator, 300, depth, &mut rng).unwrap();
                assert_eq!(parents.len(), 300);
                let skel = Skeleton::new(parents).unwrap();
                assert_eq!(DepthMap::new(&skel).max_depth(), depth, "{generator:?}");
            }
        }
        let parents = generate_parents(Generator::Chain, 10, 9, &mut rng).unwrap();
        let skel = Skeleton::new(parents).unwrap();
        assert_eq!(DepthMap::new(&skel).max_depth(), 9);
    }

    #[test]
    fn generation_is_deterministic_per_item() {
        let a = generate_parents(Generator::RandomTree, 50, 10, &mut item_rng(9, 3)).unwrap();
        let b = generate_parents(Generator::RandomTree, 50, 10, &mut item_rng(9, 3)).unwrap();
        assert_eq!(a, b);
        let c = generate_parents(Generator::RandomTree, 50, 10, &mut item_rng(9, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut rng = item_rng(0, 0);
        assert!(generate_parents(Generator::RandomTree, 10, 10, &mut rng).is_err());
        assert!(generate_parents(Generator::RandomTree, 10, 0, &mut rng).is_err());
        assert!(generate_parents(Generator::Chain, 10, 5, &mut rng).is_err());
        assert!(generate_parents(Generator::RandomTree, 0, 0, &mut rng).is_err());
    }

    #[test]
    fn single_joint_corpus_is_valid() {
        let mut rng = item_rng(0, 0);
        for generator in [
            Generator::Chain,
            Generator::RandomTree,
            Generator::CharacterLike,
        ] {
            let parents = generate_parents(generator, 1, 0, &mut rng).unwrap();
            assert_eq!(parents, vec![None]);
        }
    }

    #[test]
    fn random_quaternions_are_unit_length() {
        let mut rng = item_rng(42, 0);
        for _ in 0..100 {
            let q = random_unit_quat(&mut rng);
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_clips_validate_and_cover_the_duration() {
        let mut rng = item_rng(1, 2);
        let clip = generate_clip(5, &mut rng);
        assert_eq!(clip.track_count(), 5);
        assert_eq!(clip.duration(), 1.0);
        for track in clip.tracks() {
            assert_eq!(track.len(), 4);
            assert_eq!(track[0].time, 0.0);
            assert_eq!(track[3].time, 1.0);
        }
    }
}
