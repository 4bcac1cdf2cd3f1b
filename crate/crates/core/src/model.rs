//! Geometric and signal primitives shared by the plant, controller and
//! detectors.
//!
//! The board frame is the world frame: the board surface is the x-y plane at
//! `z = 0`, the tool approaches along `-z` and pushes components along `-y`.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("rotation quaternion has zero or non-finite norm")]
    DegenerateRotation,
    #[error("signal window is empty")]
    EmptyWindow,
    #[error("sample timestamp {t} does not follow previous timestamp {prev}")]
    NonMonotonicTimestamp { prev: f64, t: f64 },
    #[error("window capacity must be at least 1")]
    ZeroCapacity,
}

/// Cartesian axis of the board frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// A 3-vector. Units depend on context (m, m/s or N).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn get(self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn set(&mut self, axis: Axis, value: f64) {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
        }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl From<Vector3<f64>> for Vec3 {
    fn from(v: Vector3<f64>) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

impl From<Vec3> for Vector3<f64> {
    fn from(v: Vec3) -> Self {
        Vector3::new(v.x, v.y, v.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Force and torque at the tool tip, expressed in the board frame.
///
/// `force.z` is the board-contact channel used for contact detection and
/// `force.y` the extraction-axis channel used for force regulation and melt
/// detection. Torque is carried for completeness; the controller is purely
/// translational.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ToolWrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl ToolWrench {
    pub const ZERO: ToolWrench = ToolWrench {
        force: Vec3::ZERO,
        torque: Vec3::ZERO,
    };

    pub fn from_force(force: Vec3) -> Self {
        Self {
            force,
            torque: Vec3::ZERO,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.force.is_finite() && self.torque.is_finite()
    }
}

impl Neg for ToolWrench {
    type Output = ToolWrench;
    fn neg(self) -> ToolWrench {
        ToolWrench {
            force: -self.force,
            torque: -self.torque,
        }
    }
}

/// Rigid transform: position plus unit-quaternion rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vec3::ZERO,
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self {
            position,
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Builds a pose from a position and a `[w, x, y, z]` quaternion, which is
    /// normalized.
    pub fn new(position: Vec3, quaternion: [f64; 4]) -> Result<Self, ModelError> {
        if !position.is_finite() {
            return Err(ModelError::NonFinite("pose position"));
        }
        let [w, x, y, z] = quaternion;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(ModelError::DegenerateRotation);
        }
        Ok(Self {
            position,
            rotation: Unit::new_normalize(q),
        })
    }

    /// Rotation of `angle` radians about `axis`, no translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, ModelError> {
        let axis = Unit::try_new(Vector3::from(axis), 1e-12).ok_or(ModelError::DegenerateRotation)?;
        Ok(Self {
            position: Vec3::ZERO,
            rotation: UnitQuaternion::from_axis_angle(&axis, angle),
        })
    }

    pub fn with_position(mut self, position: Vec3) -> Self {
        self.position = position;
        self
    }

    /// `[w, x, y, z]` components of the rotation.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.quaternion().iter().all(|c| c.is_finite())
            && (self.rotation.quaternion().norm() - 1.0).abs() <= 1e-9
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        (self.rotation * Vector3::from(v)).into()
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &Pose) -> Pose {
        Pose {
            position: self.rotate(inner.position) + self.position,
            rotation: self.rotation * inner.rotation,
        }
    }
}

/// Re-expresses a wrench through `pose`: the force is rotated and the torque
/// picks up the moment of the rotated force about the new origin.
pub fn transform_wrench(pose: &Pose, w: &ToolWrench) -> Result<ToolWrench, ModelError> {
    if !pose.is_valid() {
        return Err(ModelError::NonFinite("pose"));
    }
    if !w.is_finite() {
        return Err(ModelError::NonFinite("wrench"));
    }
    let force = pose.rotate(w.force);
    let torque = pose.rotate(w.torque) + pose.position.cross(force);
    Ok(ToolWrench { force, torque })
}

/// Fixed-capacity ring of timestamped scalar samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    capacity: usize,
    samples: VecDeque<(f64, f64)>,
}

impl SignalWindow {
    pub fn new(capacity: usize) -> Result<Self, ModelError> {
        if capacity == 0 {
            return Err(ModelError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            samples: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Appends a sample, evicting the oldest one when full.
    pub fn push(&mut self, t: f64, value: f64) -> Result<(), ModelError> {
        if !t.is_finite() || !value.is_finite() {
            return Err(ModelError::NonFinite("window sample"));
        }
        if let Some(&(prev, _)) = self.samples.back() {
            if t <= prev {
                return Err(ModelError::NonMonotonicTimestamp { prev, t });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, value));
        Ok(())
    }

    pub fn latest(&self) -> Option<(f64, f64)> {
        self.samples.back().copied()
    }

    /// Samples oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (f64, f64)> + ExactSizeIterator + '_ {
        self.samples.iter().copied()
    }

    /// The trailing `n` samples, oldest first.
    pub fn recent(&self, n: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let skip = self.samples.len().saturating_sub(n);
        self.samples.iter().copied().skip(skip)
    }

    /// Arithmetic mean of the samples whose timestamp lies within `horizon`
    /// seconds of the latest sample.
    pub fn window_mean(&self, horizon: f64) -> Result<f64, ModelError> {
        let (latest, _) = self.latest().ok_or(ModelError::EmptyWindow)?;
        let cutoff = latest - horizon;
        mean_about_first(self.iter().filter(|&(t, _)| t >= cutoff).map(|(_, v)| v))
            .ok_or(ModelError::EmptyWindow)
    }
}

/// Mean computed as offsets from the first value, so a constant sequence
/// returns that constant bit-for-bit.
pub(crate) fn mean_about_first(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut values = values.peekable();
    let first = *values.peek()?;
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - first), n + 1));
    Some(first + sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_pose_leaves_wrench_unchanged() {
        let w = ToolWrench {
            force: Vec3::new(1.0, -20.0, 3.5),
            torque: Vec3::new(0.1, 0.2, -0.3),
        };
        assert_eq!(transform_wrench(&Pose::identity(), &w).unwrap(), w);
    }

    #[test]
    fn pure_translation_adds_moment() {
        let pose = Pose::from_translation(Vec3::new(0.0, 0.0, 0.1));
        let w = ToolWrench::from_force(Vec3::new(0.0, -20.0, 0.0));
        let out = transform_wrench(&pose, &w).unwrap();
        assert_eq!(out.force, w.force);
        assert_relative_eq!(out.torque.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(out.torque.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.torque.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_about_z_rotates_force() {
        let pose = Pose::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2).unwrap();
        let out = transform_wrench(&pose, &ToolWrench::from_force(Vec3::new(0.0, -20.0, 0.0))).unwrap();
        assert_relative_eq!(out.force.x, 20.0, epsilon = 1e-12);
        assert_relative_eq!(out.force.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.force.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_wrench_is_rejected() {
        let w = ToolWrench::from_force(Vec3::new(f64::NAN, 0.0, 0.0));
        assert_eq!(
            transform_wrench(&Pose::identity(), &w),
            Err(ModelError::NonFinite("wrench"))
        );
    }

    #[test]
    fn degenerate_quaternion_is_rejected() {
        assert_eq!(
            Pose::new(Vec3::ZERO, [0.0; 4]),
            Err(ModelError::DegenerateRotation)
        );
    }

    #[test]
    fn window_mean_constant_and_two_point() {
        let mut w = SignalWindow::new(8).unwrap();
        for i in 0..8 {
            w.push(i as f64 * 0.001, 5.0).unwrap();
        }
        assert_eq!(w.window_mean(1.0).unwrap(), 5.0);

        let mut w = SignalWindow::new(4).unwrap();
        w.push(0.0, 0.0).unwrap();
        w.push(0.001, 10.0).unwrap();
        assert_eq!(w.window_mean(1.0).unwrap(), 5.0);
    }

    #[test]
    fn window_mean_short_horizon_matches_direct_filter() {
        let mut w = SignalWindow::new(16).unwrap();
        let samples: Vec<(f64, f64)> = (0..16)
            .map(|i| (i as f64 * 0.01, (i as f64 * 0.7).sin() * 3.0 + 1.0))
            .collect();
        for &(t, v) in &samples {
            w.push(t, v).unwrap();
        }
        let horizon = 0.045;
        // oracle: filter by timestamp and sum directly
        let latest = samples.last().unwrap().0;
        let kept: Vec<f64> = samples
            .iter()
            .filter(|(t, _)| *t >= latest - horizon)
            .map(|(_, v)| *v)
            .collect();
        let expected = kept.iter().sum::<f64>() / kept.len() as f64;
        assert_eq!(kept.len(), 5);
        assert_relative_eq!(w.window_mean(horizon).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn window_errors() {
        let w = SignalWindow::new(3).unwrap();
        assert_eq!(w.window_mean(1.0), Err(ModelError::EmptyWindow));
        assert_eq!(SignalWindow::new(0), Err(ModelError::ZeroCapacity));
        let mut w = SignalWindow::new(3).unwrap();
        w.push(1.0, 0.0).unwrap();
        assert!(matches!(
            w.push(1.0, 0.0),
            Err(ModelError::NonMonotonicTimestamp { .. })
        ));
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = SignalWindow::new(3).unwrap();
        for i in 0..5 {
            w.push(i as f64, i as f64).unwrap();
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.iter().map(|s| s.1).collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
        assert_eq!(w.recent(2).map(|s| s.1).collect::<Vec<_>>(), vec![3.0, 4.0]);
    }

    fn finite() -> impl Strategy<Value = f64> {
        -100.0..100.0f64
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (finite(), finite(), finite()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn pose() -> impl Strategy<Value = Pose> {
        (vec3(), -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(_, w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(p, w, x, y, z)| Pose::new(p * 0.01, [w, x, y, z]).unwrap())
    }

    proptest! {
        #[test]
        fn rotation_preserves_force_magnitude(p in pose(), f in vec3(), tq in vec3()) {
            let w = ToolWrench { force: f, torque: tq };
            let out = transform_wrench(&p, &w).unwrap();
            prop_assert!((out.force.norm() - f.norm()).abs() <= 1e-12 * f.norm().max(1.0));
        }

        #[test]
        fn transform_composes(a in pose(), b in pose(), f in vec3(), tq in vec3()) {
            let w = ToolWrench { force: f, torque: tq };
            let seq = transform_wrench(&b, &transform_wrench(&a, &w).unwrap()).unwrap();
            let direct = transform_wrench(&b.compose(&a), &w).unwrap();
            for axis in Axis::ALL {
                prop_assert!((seq.force.get(axis) - direct.force.get(axis)).abs() <= 1e-9);
                prop_assert!((seq.torque.get(axis) - direct.torque.get(axis)).abs() <= 1e-9);
            }
        }

        #[test]
        fn constant_window_mean_is_exact(c in -1e6..1e6f64, n in 1usize..64, horizon in 0.0..1.0f64) {
            let mut w = SignalWindow::new(64).unwrap();
            for i in 0..n {
                w.push(i as f64 * 1e-3, c).unwrap();
            }
            prop_assert_eq!(w.window_mean(horizon).unwrap(), c);
        }
    }
}
