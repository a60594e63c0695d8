use std::collections::VecDeque;

use nalgebra::UnitQuaternion;

use crate::camera::Pose;
use crate::error::{Error, Result};

/// Most recent pose samples, keyed by frame index.
#[derive(Debug, Clone)]
pub struct PoseHistory {
    samples: VecDeque<(u32, Pose)>,
    capacity: usize,
}

impl PoseHistory {
    pub fn new(capacity: usize) -> Self {
        PoseHistory {
            samples: VecDeque::with_capacity(capacity.max(2)),
            capacity: capacity.max(2),
        }
    }

    /// Appends a sample; samples that do not advance the frame are ignored.
    pub fn push(&mut self, frame: u32, pose: Pose) {
        if self.samples.back().is_some_and(|(f, _)| *f >= frame) {
            return;
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((frame, pose));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<(u32, Pose)> {
        self.samples.back().copied()
    }
}

/// Extrapolates the pose `ahead` frames past the latest sample, assuming
/// constant linear and angular velocity over the last two samples.
pub fn predict_pose(hist: &PoseHistory, ahead: f32) -> Result<Pose> {
    let n = hist.samples.len();
    if n < 2 {
        return Err(Error::NotReady(n));
    }
    let (f0, p0) = hist.samples[n - 2];
    let (f1, p1) = hist.samples[n - 1];
    let k = ahead / (f1 - f0) as f32;
    let position = p1.position + (p1.position - p0.position) * k;
    let rel = p1.orientation * p0.orientation.inverse();
    let step = match rel.axis_angle() {
        Some((axis, angle)) => UnitQuaternion::from_axis_angle(&axis, angle * k),
        None => UnitQuaternion::identity(),
    };
    Ok(Pose::new(position, step * p1.orientation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn needs_two_samples() {
        let mut h = PoseHistory::new(4);
        assert!(matches!(predict_pose(&h, 1.0), Err(Error::NotReady(0))));
        h.push(0, Pose::new(Vector3::zeros(), UnitQuaternion::identity()));
        assert!(matches!(predict_pose(&h, 1.0), Err(Error::NotReady(1))));
    }

    #[test]
    fn static_history_predicts_last_pose() {
        let mut h = PoseHistory::new(4);
        let p = Pose::new(Vector3::new(1.0, 2.0, 3.0), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        h.push(0, p);
        h.push(1, p);
        let q = predict_pose(&h, 32.0).unwrap();
        assert_eq!(q.position, p.position);
        assert!(q.orientation.angle_to(&p.orientation) < 1e-6);
    }

    #[test]
    fn linear_position() {
        let mut h = PoseHistory::new(4);
        h.push(0, Pose::new(Vector3::zeros(), UnitQuaternion::identity()));
        h.push(1, Pose::new(Vector3::new(0.0, 0.0, 1.0), UnitQuaternion::identity()));
        let q = predict_pose(&h, 32.0).unwrap();
        assert_eq!(q.position, Vector3::new(0.0, 0.0, 33.0));
    }

    #[test]
    fn constant_yaw_rate() {
        let mut h = PoseHistory::new(4);
        let yaw = |deg: f32| UnitQuaternion::from_axis_angle(&Vector3::y_axis(), deg.to_radians());
        h.push(9, Pose::new(Vector3::zeros(), yaw(9.0)));
        h.push(10, Pose::new(Vector3::zeros(), yaw(10.0)));
        let q = predict_pose(&h, 32.0).unwrap();
        let (_, angle) = q.orientation.axis_angle().unwrap();
        assert!((angle.to_degrees() - 42.0).abs() < 1e-3);
    }

    #[test]
    fn frame_gaps_are_normalized() {
        let mut h = PoseHistory::new(4);
        h.push(0, Pose::new(Vector3::zeros(), UnitQuaternion::identity()));
        h.push(4, Pose::new(Vector3::new(4.0, 0.0, 0.0), UnitQuaternion::identity()));
        let q = predict_pose(&h, 2.0).unwrap();
        assert_eq!(q.position.x, 6.0);
    }
}
