//! Poses: per-joint transform arrays tagged with the space they live in.
//!
//! A local pose is relative to each joint's parent, a model pose is relative
//! to the skeleton origin, and a skin pose carries model transforms
//! pre-multiplied against inverse bind matrices. The tags exist so a pose
//! cannot silently flow into an operation expecting a different space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;
use crate::transform::{compose, rel_frobenius_error, Quat, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoseSpace {
    Local,
    Model,
    Skin,
}

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("quaternion norm {norm} deviates from 1 beyond 1e-3")]
    NonUnitQuaternion { norm: f64 },
    #[error("clip has {tracks} tracks but the skeleton has {joints} joints")]
    TrackCountMismatch { tracks: usize, joints: usize },
    #[error("blend weights sum to zero")]
    WeightSumZero,
    #[error("negative blend weight at index {index}")]
    NegativeWeight { index: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("expected a {expected:?}-space pose, found {found:?}")]
    WrongSpaceTag {
        expected: PoseSpace,
        found: PoseSpace,
    },
    #[error("joint {joint}: transform is singular")]
    SingularTransform { joint: usize },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
}

/// Translation, rotation, scale channels; composes as `T * R * S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trs<T> {
    pub translation: [T; 3],
    pub rotation: Quat<T>,
    pub scale: [T; 3],
}

impl<T: Real> Trs<T> {
    pub fn identity() -> Self {
        Trs {
            translation: [T::zero(); 3],
            rotation: Quat::identity(),
            scale: [T::one(); 3],
        }
    }

    /// Rejects rotations whose norm deviates from 1 by more than 1e-3, then
    /// normalizes the survivor before building the matrix.
    pub fn to_matrix(&self) -> Result<Transform<T>, PoseError> {
        let norm = self.rotation.norm();
        let dev = (norm - T::one()).abs();
        if !(dev <= T::lit(1e-3)) {
            return Err(PoseError::NonUnitQuaternion {
                norm: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
        let r = self.rotation.rotation3();
        let mut linear = [[T::zero(); 3]; 3];
        for row in 0..3 {
            for col in 0..3 {
                linear[row][col] = r[row][col] * self.scale[col];
            }
        }
        Ok(Transform::from_parts(linear, self.translation))
    }
}

/// Matrix-form pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose<T: Real> {
    transforms: Vec<Transform<T>>,
    space: PoseSpace,
}

impl<T: Real> Pose<T> {
    pub fn new(space: PoseSpace, transforms: Vec<Transform<T>>) -> Self {
        Pose { transforms, space }
    }

    pub fn local(transforms: Vec<Transform<T>>) -> Self {
        Self::new(PoseSpace::Local, transforms)
    }

    pub fn model(transforms: Vec<Transform<T>>) -> Self {
        Self::new(PoseSpace::Model, transforms)
    }

    pub fn space(&self) -> PoseSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn transforms(&self) -> &[Transform<T>] {
        &self.transforms
    }

    pub fn get(&self, joint: usize) -> &Transform<T> {
        &self.transforms[joint]
    }

    pub fn expect_space(&self, expected: PoseSpace) -> Result<(), PoseError> {
        if self.space != expected {
            return Err(PoseError::WrongSpaceTag {
                expected,
                found: self.space,
            });
        }
        Ok(())
    }
}

/// Channel-form pose; always joint-local.
#[derive(Clone, Debug, PartialEq)]
pub struct TrsPose<T> {
    pub joints: Vec<Trs<T>>,
}

impl<T: Real> TrsPose<T> {
    pub fn identity(len: usize) -> Self {
        TrsPose {
            joints: vec![Trs::identity(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn to_local_pose(&self) -> Result<Pose<T>, PoseError> {
        let transforms = self
            .joints
            .iter()
            .map(Trs::to_matrix)
            .collect::<Result<_, _>>()?;
        Ok(Pose::local(transforms))
    }
}

/// Weighted average of channel poses. Weights are normalized to sum 1;
/// rotations are hemisphere-aligned to the first pose's rotation before the
/// component-wise average, then renormalized.
pub fn blend<T: Real>(poses: &[TrsPose<T>], weights: &[T]) -> Result<TrsPose<T>, PoseError> {
    if poses.len() != weights.len() {
        return Err(PoseError::LengthMismatch {
            left: poses.len(),
            right: weights.len(),
        });
    }
    if poses.is_empty() {
        return Err(PoseError::WeightSumZero);
    }
    let joints = poses[0].len();
    for p in poses {
        if p.len() != joints {
            return Err(PoseError::LengthMismatch {
                left: joints,
                right: p.len(),
            });
        }
    }
    for (index, &w) in weights.iter().enumerate() {
        if w < T::zero() {
            return Err(PoseError::NegativeWeight { index });
        }
    }
    let total: T = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    if !(total > T::zero()) {
        return Err(PoseError::WeightSumZero);
    }

    let mut out = Vec::with_capacity(joints);
    for j in 0..joints {
        let mut translation = [T::zero(); 3];
        let mut scale = [T::zero(); 3];
        let mut rot = Quat::new(T::zero(), T::zero(), T::zero(), T::zero());
        let anchor = poses[0].joints[j].rotation;
        for (pose, &w) in poses.iter().zip(weights.iter()) {
            let w = w / total;
            let trs = &pose.joints[j];
            for a in 0..3 {
                translation[a] += trs.translation[a] * w;
                scale[a] += trs.scale[a] * w;
            }
            let q = if anchor.dot(&trs.rotation) < T::zero() {
                trs.rotation.neg()
            } else {
                trs.rotation
            };
            rot.w += q.w * w;
            rot.x += q.x * w;
            rot.y += q.y * w;
            rot.z += q.z * w;
        }
        out.push(Trs {
            translation,
            rotation: rot.normalized(),
            scale,
        });
    }
    Ok(TrsPose { joints: out })
}

/// `skin[i] = model[i] * inverse_bind[i]`. At the bind pose itself this is
/// the identity for every joint.
pub fn bind_skin<T: Real>(
    model: &Pose<T>,
    inverse_bind: &[Transform<T>],
) -> Result<Pose<T>, PoseError> {
    model.expect_space(PoseSpace::Model)?;
    if model.len() != inverse_bind.len() {
        return Err(PoseError::LengthMismatch {
            left: model.len(),
            right: inverse_bind.len(),
        });
    }
    let transforms = model
        .transforms()
        .iter()
        .zip(inverse_bind.iter())
        .map(|(m, ib)| compose(m, ib))
        .collect();
    Ok(Pose::new(PoseSpace::Skin, transforms))
}

/// Per-joint inverses of a model-space bind pose.
pub fn inverse_bind_from<T: Real>(bind: &Pose<T>) -> Result<Vec<Transform<T>>, PoseError> {
    bind.expect_space(PoseSpace::Model)?;
    bind.transforms()
        .iter()
        .enumerate()
        .map(|(joint, t)| {
            t.affine_inverse()
                .ok_or(PoseError::SingularTransform { joint })
        })
        .collect()
}

/// Largest per-joint relative Frobenius error between two equal-length poses.
pub fn max_rel_error<T: Real>(value: &Pose<T>, reference: &Pose<T>) -> Result<T, PoseError> {
    if value.len() != reference.len() {
        return Err(PoseError::LengthMismatch {
            left: value.len(),
            right: reference.len(),
        });
    }
    Ok(value
        .transforms()
        .iter()
        .zip(reference.transforms())
        .fold(T::zero(), |acc, (v, r)| acc.max(rel_frobenius_error(v, r))))
}

/// True when every joint matches bit for bit.
pub fn bit_identical<T: Real>(a: &Pose<T>, b: &Pose<T>) -> bool {
    a.len() == b.len()
        && a.transforms()
            .iter()
            .zip(b.transforms())
            .all(|(x, y)| x.bit_eq(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trs_translate(x: f64) -> Trs<f64> {
        Trs {
            translation: [x, 0.0, 0.0],
            ..Trs::identity()
        }
    }

    #[test]
    fn trs_composes_translate_rotate_scale_in_order() {
        let trs = Trs {
            translation: [1.0, 2.0, 3.0],
            rotation: Quat::from_axis_angle([0.0, 0.0, 1.0], std::f64::consts::PI),
            scale: [2.0, 2.0, 2.0],
        };
        let m = trs.to_matrix().unwrap();
        // 180-degree Z rotation scaled by 2: upper-left is diag(-2, -2, 2).
        assert!((m.entry(0, 0) + 2.0).abs() < 1e-12);
        assert!((m.entry(1, 1) + 2.0).abs() < 1e-12);
        assert!((m.entry(2, 2) - 2.0).abs() < 1e-12);
        assert!(m.entry(0, 1).abs() < 1e-12);
        assert_eq!(m.translation(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn trs_rejects_denormalized_rotation() {
        let trs = Trs {
            rotation: Quat::new(1.1, 0.0, 0.0, 0.0),
            ..Trs::identity()
        };
        assert!(matches!(
            trs.to_matrix(),
            Err(PoseError::NonUnitQuaternion { .. })
        ));
        // Mild drift is normalized away instead.
        let trs: Trs<f64> = Trs {
            rotation: Quat::new(1.0 + 5e-4, 0.0, 0.0, 0.0),
            ..Trs::identity()
        };
        let m = trs.to_matrix().unwrap();
        assert!((m.entry(0, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn blend_of_one_pose_is_that_pose() {
        let pose = TrsPose {
            joints: vec![trs_translate(1.0), trs_translate(-2.0)],
        };
        let out = blend(&[pose.clone()], &[0.7]).unwrap();
        assert_eq!(out, pose);
    }

    #[test]
    fn blend_weights_average_translations() {
        let a = TrsPose {
            joints: vec![trs_translate(0.0)],
        };
        let b = TrsPose {
            joints: vec![trs_translate(4.0)],
        };
        let out = blend(&[a, b], &[1.0, 3.0]).unwrap();
        assert!((out.joints[0].translation[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn blend_is_invariant_under_power_of_two_weight_scaling() {
        let a: TrsPose<f64> = TrsPose {
            joints: vec![Trs {
                translation: [0.3, -1.0, 2.0],
                rotation: Quat::from_axis_angle([1.0, 0.0, 0.5], 0.4),
                scale: [1.0, 2.0, 0.5],
            }],
        };
        let b = TrsPose {
            joints: vec![Trs {
                translation: [-0.7, 0.1, 0.9],
                rotation: Quat::from_axis_angle([0.0, 1.0, -0.5], 1.1),
                scale: [0.9, 1.1, 1.3],
            }],
        };
        let w = [0.25, 0.5];
        let base = blend(&[a.clone(), b.clone()], &w).unwrap();
        for c in [2.0, 0.5, 4.0] {
            let scaled = blend(&[a.clone(), b.clone()], &[w[0] * c, w[1] * c]).unwrap();
            assert_eq!(base, scaled);
        }
        // Non-binary scaling may differ by rounding but stays within 1e-12.
        let scaled = blend(&[a.clone(), b.clone()], &[w[0] * 3.0, w[1] * 3.0]).unwrap();
        for (x, y) in base.joints[0]
            .translation
            .iter()
            .zip(scaled.joints[0].translation.iter())
        {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn blend_aligns_rotation_hemispheres() {
        let q = Quat::<f64>::from_axis_angle([0.0, 0.0, 1.0], 0.6);
        let a = TrsPose {
            joints: vec![Trs {
                rotation: q,
                ..Trs::identity()
            }],
        };
        let b = TrsPose {
            joints: vec![Trs {
                rotation: q.neg(),
                ..Trs::identity()
            }],
        };
        let out = blend(&[a, b], &[0.5, 0.5]).unwrap();
        // Same rotation either way; without alignment this would collapse
        // toward zero and normalization would blow up the error.
        assert!((out.joints[0].rotation.dot(&q).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blend_rejects_bad_weights() {
        let p = TrsPose::<f64>::identity(1);
        assert_eq!(blend(&[p.clone()], &[0.0]), Err(PoseError::WeightSumZero));
        assert_eq!(
            blend(&[p.clone(), p.clone()], &[0.5, -0.1]),
            Err(PoseError::NegativeWeight { index: 1 })
        );
        assert_eq!(
            blend(&[p], &[0.5, 0.5]),
            Err(PoseError::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn skin_at_bind_pose_is_identity() {
        let model = Pose::model(vec![
            Transform::from_translation([1.0, 2.0, 3.0]),
            Transform::from_parts(
                Quat::from_axis_angle([0.3, 1.0, 0.0], 0.8).rotation3(),
                [0.0, 1.0, 0.0],
            ),
        ]);
        let inv = inverse_bind_from(&model).unwrap();
        let skin = bind_skin(&model, &inv).unwrap();
        assert_eq!(skin.space(), PoseSpace::Skin);
        for t in skin.transforms() {
            assert!(rel_frobenius_error(t, &Transform::identity()) < 1e-12);
        }
    }

    #[test]
    fn skin_with_identity_inverse_bind_is_the_model_pose() {
        let model = Pose::model(vec![Transform::from_translation([5.0, 0.0, 0.0])]);
        let inv = vec![Transform::identity()];
        let skin = bind_skin(&model, &inv).unwrap();
        assert!(model.get(0).bit_eq(skin.get(0)));
    }

    #[test]
    fn skin_rejects_wrong_space() {
        let local = Pose::local(vec![Transform::<f64>::identity()]);
        assert_eq!(
            bind_skin(&local, &[Transform::identity()]),
            Err(PoseError::WrongSpaceTag {
                expected: PoseSpace::Model,
                found: PoseSpace::Local,
            })
        );
    }

    #[test]
    fn root_motion_passes_through_skinning() {
        // Moving the whole model pose by T after binding shows up as T on
        // every skin transform.
        let bind = Pose::model(vec![
            Transform::from_translation([0.0, 1.0, 0.0]),
            Transform::from_translation([0.0, 2.0, 0.0]),
        ]);
        let inv = inverse_bind_from(&bind).unwrap();
        let shift = Transform::from_translation([3.0, 0.0, 0.0]);
        let moved = Pose::model(
            bind.transforms()
                .iter()
                .map(|m| compose(&shift, m))
                .collect(),
        );
        let skin = bind_skin(&moved, &inv).unwrap();
        for t in skin.transforms() {
            assert!(rel_frobenius_error(t, &shift) < 1e-12);
        }
    }
}
