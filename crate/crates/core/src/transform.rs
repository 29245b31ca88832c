//! Affine transforms and quaternions.
//!
//! `Transform` is a row-major 4x4 matrix whose bottom row is exactly
//! `(0, 0, 0, 1)`. `compose` is the single multiply primitive every scan
//! counts; it evaluates each entry with a fixed left-to-right summation so
//! identical operand bits always produce identical result bits.

use serde::{Deserialize, Serialize};

use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Real")]
pub struct Transform<T: Real> {
    m: [T; 16],
}

impl<T: Real> Transform<T> {
    pub fn identity() -> Self {
        let mut m = [T::zero(); 16];
        m[0] = T::one();
        m[5] = T::one();
        m[10] = T::one();
        m[15] = T::one();
        Transform { m }
    }

    /// Builds from a 3x3 linear block and a translation column.
    pub fn from_parts(linear: [[T; 3]; 3], translation: [T; 3]) -> Self {
        let mut t = Self::identity();
        for (r, row) in linear.iter().enumerate() {
            t.m[r * 4] = row[0];
            t.m[r * 4 + 1] = row[1];
            t.m[r * 4 + 2] = row[2];
            t.m[r * 4 + 3] = translation[r];
        }
        t
    }

    pub fn from_translation(translation: [T; 3]) -> Self {
        Self::from_parts(
            [
                [T::one(), T::zero(), T::zero()],
                [T::zero(), T::one(), T::zero()],
                [T::zero(), T::zero(), T::one()],
            ],
            translation,
        )
    }

    /// Accepts raw row-major entries; `None` if the bottom row is not exactly
    /// `(0, 0, 0, 1)`.
    pub fn from_array(m: [T; 16]) -> Option<Self> {
        let t = Transform { m };
        t.is_affine().then_some(t)
    }

    pub fn is_affine(&self) -> bool {
        self.m[12] == T::zero()
            && self.m[13] == T::zero()
            && self.m[14] == T::zero()
            && self.m[15] == T::one()
    }

    pub fn as_array(&self) -> &[T; 16] {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.m[row * 4 + col]
    }

    pub fn translation(&self) -> [T; 3] {
        [self.m[3], self.m[7], self.m[11]]
    }

    pub fn apply_point(&self, p: [T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (r, o) in out.iter_mut().enumerate() {
            let m = &self.m[r * 4..r * 4 + 4];
            *o = m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3];
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.m.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    /// Inverse via the adjugate of the linear block; `None` when the linear
    /// block is singular.
    pub fn affine_inverse(&self) -> Option<Self> {
        let a = |r: usize, c: usize| self.m[r * 4 + c];
        let cof = [
            [
                a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1),
                a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2),
                a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1),
            ],
            [
                a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2),
                a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0),
                a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2),
            ],
            [
                a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0),
                a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1),
                a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            ],
        ];
        let det = a(0, 0) * cof[0][0] + a(0, 1) * cof[1][0] + a(0, 2) * cof[2][0];
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let inv_det = T::one() / det;
        let mut linear = [[T::zero(); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                linear[r][c] = cof[r][c] * inv_det;
            }
        }
        let t = self.translation();
        let translation = [
            -(linear[0][0] * t[0] + linear[0][1] * t[1] + linear[0][2] * t[2]),
            -(linear[1][0] * t[0] + linear[1][1] * t[1] + linear[1][2] * t[2]),
            -(linear[2][0] * t[0] + linear[2][1] * t[1] + linear[2][2] * t[2]),
        ];
        Some(Self::from_parts(linear, translation))
    }

    /// Raw bit pattern of all sixteen entries.
    pub fn bits(&self) -> [u64; 16] {
        let mut out = [0u64; 16];
        for (o, &x) in out.iter_mut().zip(self.m.iter()) {
            *o = x.bits();
        }
        out
    }

    /// Exact bitwise equality, the strictest comparison in the crate.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.bits() == other.bits()
    }
}

/// `parent * child`: the result maps child-local coordinates through `child`
/// and then through `parent`. Non-commutative. The bottom row of the result
/// is written as exact constants, never computed.
pub fn compose<T: Real>(parent: &Transform<T>, child: &Transform<T>) -> Transform<T> {
    let p = &parent.m;
    let c = &child.m;
    let mut m = [T::zero(); 16];
    for r in 0..3 {
        let (p0, p1, p2, p3) = (p[r * 4], p[r * 4 + 1], p[r * 4 + 2], p[r * 4 + 3]);
        for col in 0..4 {
            let mut v = p0 * c[col] + p1 * c[4 + col] + p2 * c[8 + col];
            if col == 3 {
                v = v + p3;
            }
            m[r * 4 + col] = v;
        }
    }
    m[15] = T::one();
    Transform { m }
}

/// `|value - reference|_F / max(|reference|_F, 1)`.
///
/// The reference norm of an affine matrix is at least 1 (bottom-row 1), so
/// the denominator guard only matters for non-affine test inputs.
pub fn rel_frobenius_error<T: Real>(value: &Transform<T>, reference: &Transform<T>) -> T {
    let mut diff = T::zero();
    for (a, b) in value.m.iter().zip(reference.m.iter()) {
        let d = *a - *b;
        diff += d * d;
    }
    diff.sqrt() / reference.frobenius_norm().max(T::one())
}

/// Unit quaternion, scalar part first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    pub fn identity() -> Self {
        Quat {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_axis_angle(axis: [T; 3], angle: T) -> Self {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let half = angle * T::lit(0.5);
        let (s, c) = (half.sin(), half.cos());
        let k = s / len;
        Quat {
            w: c,
            x: axis[0] * k,
            y: axis[1] * k,
            z: axis[2] * k,
        }
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn normalized(&self) -> Self {
        let inv = T::one() / self.norm();
        Quat {
            w: self.w * inv,
            x: self.x * inv,
            y: self.y * inv,
            z: self.z * inv,
        }
    }

    pub fn neg(&self) -> Self {
        Quat {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Normalized linear interpolation with hemisphere alignment: `b` is
    /// negated first when `dot(a, b) < 0` so the blend takes the shorter arc.
    pub fn nlerp(a: &Self, b: &Self, s: T) -> Self {
        let b = if a.dot(b) < T::zero() { b.neg() } else { *b };
        let u = T::one() - s;
        Quat {
            w: a.w * u + b.w * s,
            x: a.x * u + b.x * s,
            y: a.y * u + b.y * s,
            z: a.z * u + b.z * s,
        }
        .normalized()
    }

    /// Rotation matrix of the normalized quaternion.
    pub fn rotation3(&self) -> [[T; 3]; 3] {
        let q = self.normalized();
        let two = T::lit(2.0);
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        [
            [T::one() - two * (yy + zz), two * (xy - wz), two * (xz + wy)],
            [two * (xy + wz), T::one() - two * (xx + zz), two * (yz - wx)],
            [two * (xz - wy), two * (yz + wx), T::one() - two * (xx + yy)],
        ]
    }
}
