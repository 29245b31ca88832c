//! JSON file formats.
//!
//! Skeletons: `{"joints": [{"name": "...", "parent": null|index}, ...]}`.
//! Clips: `{"duration": s, "tracks": [[{"t", "pos", "rot", "scale"}, ...], ...]}`
//! with `rot` in `[w, x, y, z]` order.
//!
//! A skeleton file whose joints are not stored parents-first is repaired on
//! load via [`reindex_topological`]; the applied permutation is returned so
//! the caller can reorder clip tracks to match.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clip::{AnimationClip, Keyframe};
use crate::num::Real;
use crate::pose::{PoseError, Trs};
use crate::skeleton::{reindex_topological, Skeleton, SkeletonError};
use crate::transform::Quat;

#[derive(Debug, Error)]
pub enum FileErrorKind {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Clip(#[from] PoseError),
}

/// Any load/save failure, carrying the file it happened on.
#[derive(Debug, Error)]
#[error("{}: {kind}", path.display())]
pub struct FileError {
    pub path: PathBuf,
    pub kind: FileErrorKind,
}

impl FileError {
    fn new(path: &Path, kind: impl Into<FileErrorKind>) -> Self {
        FileError {
            path: path.to_path_buf(),
            kind: kind.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SkeletonFile {
    joints: Vec<JointEntry>,
}

#[derive(Serialize, Deserialize)]
struct JointEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    parent: Option<usize>,
}

/// A skeleton fresh from disk. `permutation` is `Some(perm)` (old index to
/// new index) when the file's joint order violated the parents-first
/// invariant and had to be repaired.
#[derive(Debug)]
pub struct LoadedSkeleton {
    pub skeleton: Skeleton,
    pub permutation: Option<Vec<usize>>,
}

pub fn save_skeleton(path: &Path, skeleton: &Skeleton) -> Result<(), FileError> {
    let joints = (0..skeleton.len())
        .map(|i| JointEntry {
            name: skeleton.names().map(|n| n[i].clone()),
            parent: skeleton.parent(i),
        })
        .collect();
    let text = serde_json::to_string_pretty(&SkeletonFile { joints })
        .map_err(|e| FileError::new(path, e))?;
    fs::write(path, text).map_err(|e| FileError::new(path, e))
}

pub fn load_skeleton(path: &Path) -> Result<LoadedSkeleton, FileError> {
    let text = fs::read_to_string(path).map_err(|e| FileError::new(path, e))?;
    let file: SkeletonFile = serde_json::from_str(&text).map_err(|e| FileError::new(path, e))?;
    let parents: Vec<Option<usize>> = file.joints.iter().map(|j| j.parent).collect();
    let names: Vec<String> = file
        .joints
        .iter()
        .enumerate()
        .map(|(i, j)| j.name.clone().unwrap_or_else(|| format!("joint_{i}")))
        .collect();
    match Skeleton::with_names(parents.clone(), names.clone()) {
        Ok(skeleton) => Ok(LoadedSkeleton {
            skeleton,
            permutation: None,
        }),
        Err(SkeletonError::ForwardParent { .. }) => {
            let (reordered, perm) =
                reindex_topological(&parents).map_err(|e| FileError::new(path, e))?;
            let mut new_names = vec![String::new(); names.len()];
            for (old, name) in names.into_iter().enumerate() {
                new_names[perm[old]] = name;
            }
            let skeleton = Skeleton::with_names(reordered.parents().to_vec(), new_names)
                .map_err(|e| FileError::new(path, e))?;
            Ok(LoadedSkeleton {
                skeleton,
                permutation: Some(perm),
            })
        }
        Err(e) => Err(FileError::new(path, e)),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
struct ClipFile<T> {
    duration: T,
    tracks: Vec<Vec<KeyEntry<T>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
struct KeyEntry<T> {
    t: T,
    pos: [T; 3],
    rot: [T; 4],
    scale: [T; 3],
}

pub fn save_clip<T: Real>(path: &Path, clip: &AnimationClip<T>) -> Result<(), FileError> {
    let tracks = clip
        .tracks()
        .iter()
        .map(|keys| {
            keys.iter()
                .map(|k| KeyEntry {
                    t: k.time,
                    pos: k.value.translation,
                    rot: [
                        k.value.rotation.w,
                        k.value.rotation.x,
                        k.value.rotation.y,
                        k.value.rotation.z,
                    ],
                    scale: k.value.scale,
                })
                .collect()
        })
        .collect();
    let file = ClipFile {
        duration: clip.duration(),
        tracks,
    };
    let text = serde_json::to_string(&file).map_err(|e| FileError::new(path, e))?;
    fs::write(path, text).map_err(|e| FileError::new(path, e))
}

pub fn load_clip<T: Real>(path: &Path) -> Result<AnimationClip<T>, FileError> {
    let text = fs::read_to_string(path).map_err(|e| FileError::new(path, e))?;
    let file: ClipFile<T> = serde_json::from_str(&text).map_err(|e| FileError::new(path, e))?;
    let tracks = file
        .tracks
        .into_iter()
        .map(|keys| {
            keys.into_iter()
                .map(|k| Keyframe {
                    time: k.t,
                    value: Trs {
                        translation: k.pos,
                        rotation: Quat::new(k.rot[0], k.rot[1], k.rot[2], k.rot[3]),
                        scale: k.scale,
                    },
                })
                .collect()
        })
        .collect();
    AnimationClip::new(file.duration, tracks).map_err(|e| FileError::new(path, e))
}
