//! Keyframed animation clips.
//!
//! One track per joint, each a time-sorted run of TRS keys. Sampling at an
//! exact key time returns that key's channels bit for bit; between keys,
//! translation and scale interpolate linearly and rotation uses hemisphere-
//! aligned nlerp.

use crate::num::Real;
use crate::pose::{PoseError, Trs, TrsPose};
use crate::skeleton::Skeleton;
use crate::transform::Quat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrap {
    /// Sample times clamp to `[0, duration]`.
    Clamp,
    /// Sample times wrap modulo `duration`.
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe<T> {
    pub time: T,
    pub value: Trs<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnimationClip<T> {
    duration: T,
    tracks: Vec<Vec<Keyframe<T>>>,
}

impl<T: Real> AnimationClip<T> {
    /// Requires positive finite duration, at least one key per track, and
    /// strictly increasing key times within `[0, duration]`.
    pub fn new(duration: T, tracks: Vec<Vec<Keyframe<T>>>) -> Result<Self, PoseError> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(PoseError::InvalidClip(format!(
                "duration {duration} is not a positive finite number"
            )));
        }
        for (track, keys) in tracks.iter().enumerate() {
            if keys.is_empty() {
                return Err(PoseError::InvalidClip(format!("track {track} has no keys")));
            }
            let mut prev: Option<T> = None;
            for key in keys {
                if !key.time.is_finite() || key.time < T::zero() || key.time > duration {
                    return Err(PoseError::InvalidClip(format!(
                        "track {track}: key time {} outside [0, {duration}]",
                        key.time
                    )));
                }
                if let Some(prev) = prev {
                    if key.time <= prev {
                        return Err(PoseError::InvalidClip(format!(
                            "track {track}: key times not strictly increasing at {}",
                            key.time
                        )));
                    }
                }
                prev = Some(key.time);
            }
        }
        Ok(AnimationClip { duration, tracks })
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn tracks(&self) -> &[Vec<Keyframe<T>>] {
        &self.tracks
    }

    /// Samples every track at time `t`, producing a local channel pose for
    /// `skeleton` (whose joint count must match the track count).
    pub fn sample(&self, skeleton: &Skeleton, t: T, wrap: Wrap) -> Result<TrsPose<T>, PoseError> {
        if self.tracks.len() != skeleton.len() {
            return Err(PoseError::TrackCountMismatch {
                tracks: self.tracks.len(),
                joints: skeleton.len(),
            });
        }
        let t = self.wrap_time(t, wrap);
        let joints = self
            .tracks
            .iter()
            .map(|keys| sample_track(keys, t))
            .collect();
        Ok(TrsPose { joints })
    }

    fn wrap_time(&self, t: T, wrap: Wrap) -> T {
        match wrap {
            Wrap::Clamp => t.max(T::zero()).min(self.duration),
            Wrap::Loop => {
                let r = ((t % self.duration) + self.duration) % self.duration;
                // The fold above keeps r in [0, duration).
                r
            }
        }
    }

    /// Reorders tracks to follow a joint permutation (`perm[old] == new`),
    /// matching a skeleton that was reindexed after load.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, PoseError> {
        if perm.len() != self.tracks.len() {
            return Err(PoseError::LengthMismatch {
                left: perm.len(),
                right: self.tracks.len(),
            });
        }
        let mut tracks = vec![Vec::new(); self.tracks.len()];
        for (old, keys) in self.tracks.iter().enumerate() {
            tracks[perm[old]] = keys.clone();
        }
        Ok(AnimationClip {
            duration: self.duration,
            tracks,
        })
    }
}

fn sample_track<T: Real>(keys: &[Keyframe<T>], t: T) -> Trs<T> {
    // Index of the first key with time > t; the key before it (if any) is the
    // segment start.
    let upper = keys.partition_point(|k| k.time <= t);
    if upper == 0 {
        return keys[0].value;
    }
    let k0 = &keys[upper - 1];
    if k0.time == t || upper == keys.len() {
        return k0.value;
    }
    let k1 = &keys[upper];
    let s = (t - k0.time) / (k1.time - k0.time);
    let u = T::one() - s;
    let lerp3 = |a: [T; 3], b: [T; 3]| {
        [
            a[0] * u + b[0] * s,
            a[1] * u + b[1] * s,
            a[2] * u + b[2] * s,
        ]
    };
    Trs {
        translation: lerp3(k0.value.translation, k1.value.translation),
        rotation: Quat::nlerp(&k0.value.rotation, &k1.value.rotation, s),
        scale: lerp3(k0.value.scale, k1.value.scale),
    }
}
