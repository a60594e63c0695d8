use nalgebra::{Point3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Pinhole camera. `orientation` maps camera axes to world axes; the camera
/// looks down its local +z with +x right and +y down (image convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vector3<f32>,
    pub orientation: UnitQuaternion<f32>,
    /// Focal length in pixels.
    pub focal: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
    pub far: f32,
}

/// Position and orientation only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f32>,
    pub orientation: UnitQuaternion<f32>,
}

impl Pose {
    pub fn new(position: Vector3<f32>, orientation: UnitQuaternion<f32>) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    /// Pose at `eye` looking toward `target`, with `up` as world up.
    pub fn look_at(eye: Vector3<f32>, target: Vector3<f32>, up: Vector3<f32>) -> Self {
        let fwd = (target - eye).normalize();
        let mut right = fwd.cross(&up);
        if right.norm() < 1e-6 {
            right = fwd.cross(&Vector3::new(1.0, 0.0, 0.0));
            if right.norm() < 1e-6 {
                right = fwd.cross(&Vector3::new(0.0, 1.0, 0.0));
            }
        }
        let right = right.normalize();
        let down = fwd.cross(&right);
        let m = nalgebra::Matrix3::from_columns(&[right, down, fwd]);
        let rot = nalgebra::Rotation3::from_matrix_unchecked(m);
        Pose {
            position: eye,
            orientation: UnitQuaternion::from_rotation_matrix(&rot),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

/// Intrinsics shared by every pose of a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
    pub far: f32,
}

impl Intrinsics {
    /// Intrinsics for a vertical field of view in degrees.
    pub fn from_fov(width: u32, height: u32, fov_y_deg: f32) -> Self {
        let focal = height as f32 * 0.5 / (fov_y_deg.to_radians() * 0.5).tan();
        Intrinsics {
            focal,
            width,
            height,
            near: 0.05,
            far: 1e4,
        }
    }

    pub fn at(&self, pose: &Pose) -> Camera {
        Camera {
            position: pose.position,
            orientation: pose.orientation,
            focal: self.focal,
            width: self.width,
            height: self.height,
            near: self.near,
            far: self.far,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) || !(self.near > 0.0 && self.near < self.far) || self.width == 0 || self.height == 0 {
            return Err(Error::Usage(format!("invalid camera {self:?}")));
        }
        Ok(())
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation)
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            focal: self.focal,
            width: self.width,
            height: self.height,
            near: self.near,
            far: self.far,
        }
    }

    pub fn with_pose(&self, pose: &Pose) -> Camera {
        self.intrinsics().at(pose)
    }

    /// World point to camera space.
    pub fn to_camera(&self, p: &Vector3<f32>) -> Vector3<f32> {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    /// Projects a camera-space point to pixel coordinates. Pixel (i, j) has
    /// its center at (i + 0.5, j + 0.5).
    pub fn to_pixel(&self, pc: &Vector3<f32>) -> [f32; 2] {
        [
            self.focal * pc.x / pc.z + self.width as f32 * 0.5,
            self.focal * pc.y / pc.z + self.height as f32 * 0.5,
        ]
    }

    pub fn forward(&self) -> Vector3<f32> {
        self.orientation * Vector3::z()
    }

    pub fn eye(&self) -> Point3<f32> {
        Point3::from(self.position)
    }
}
