//! Gaussian primitives and view-dependent color.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Zeroth-order SH basis constant.
pub const SH_C0: f32 = 0.282_094_8;
const SH_C1: f32 = 0.488_602_5;
const SH_C2: [f32; 5] = [
    1.092_548_4,
    -1.092_548_4,
    0.315_391_57,
    -1.092_548_4,
    0.546_274_2,
];
const SH_C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_33,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

/// Number of SH basis functions for `degree` (per color channel).
pub const fn sh_basis_count(degree: u8) -> usize {
    let d = degree as usize + 1;
    d * d
}

/// Number of SH scalars (three channels) for `degree`.
pub const fn sh_len(degree: u8) -> usize {
    3 * sh_basis_count(degree)
}

/// One anisotropic 3D Gaussian.
///
/// SH coefficients are stored basis-major: `sh[3 * k + c]` is channel `c` of
/// basis function `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub position: Vector3<f32>,
    pub rotation: UnitQuaternion<f32>,
    /// Per-axis standard deviations in world units.
    pub scale: Vector3<f32>,
    pub opacity: f32,
    pub log_opacity: f32,
    pub sh_degree: u8,
    pub sh: Vec<f32>,
}

impl Gaussian {
    /// Builds a Gaussian with a flat color (degree-0 SH) and precomputed log-opacity.
    pub fn with_color(
        position: Vector3<f32>,
        rotation: UnitQuaternion<f32>,
        scale: Vector3<f32>,
        opacity: f32,
        rgb: [f32; 3],
    ) -> Self {
        let sh = rgb.iter().map(|c| (c - 0.5) / SH_C0).collect();
        Gaussian {
            position,
            rotation,
            scale,
            opacity,
            log_opacity: opacity.ln(),
            sh_degree: 0,
            sh,
        }
    }

    /// Checks the primitive invariants; `index` is reported on failure.
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| Error::Data {
            index,
            reason: reason.to_string(),
        };
        let finite = self.position.iter().all(|v| v.is_finite())
            && self.scale.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
            && self.opacity.is_finite()
            && self.log_opacity.is_finite()
            && self.sh.iter().all(|v| v.is_finite());
        if !finite {
            return Err(bad("non-finite attribute"));
        }
        if (self.rotation.coords.norm() - 1.0).abs() > 1e-5 {
            return Err(bad("rotation is not a unit quaternion"));
        }
        if self.scale.iter().any(|&s| s <= 0.0) {
            return Err(bad("scale must be positive"));
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(bad("opacity outside (0, 1]"));
        }
        if (self.log_opacity - self.opacity.ln()).abs() > 1e-6 {
            return Err(bad("log_opacity does not match opacity"));
        }
        if self.sh_degree > 3 || self.sh.len() != sh_len(self.sh_degree) {
            return Err(bad("SH length does not match degree"));
        }
        Ok(())
    }

    pub fn max_scale(&self) -> f32 {
        self.scale.max()
    }

    /// World-space covariance `R diag(s^2) R^T`.
    pub fn covariance(&self) -> Matrix3<f32> {
        let r = self.rotation.to_rotation_matrix().into_inner();
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r * s2 * r.transpose()
    }

    /// Evaluates the view-dependent color for a unit direction from the
    /// camera toward the Gaussian. Channels are clamped at zero.
    pub fn color(&self, dir: &Vector3<f32>) -> [f32; 3] {
        eval_sh(self.sh_degree, &self.sh, dir)
    }
}

/// Evaluates real SH up to `degree` with the common 3DGS basis and signs,
/// adding the 0.5 offset and clamping at zero.
pub fn eval_sh(degree: u8, sh: &[f32], dir: &Vector3<f32>) -> [f32; 3] {
    let mut basis = [0.0f32; 16];
    basis[0] = SH_C0;
    if degree >= 1 {
        let (x, y, z) = (dir.x, dir.y, dir.z);
        basis[1] = -SH_C1 * y;
        basis[2] = SH_C1 * z;
        basis[3] = -SH_C1 * x;
        if degree >= 2 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            let (xy, yz, xz) = (x * y, y * z, x * z);
            basis[4] = SH_C2[0] * xy;
            basis[5] = SH_C2[1] * yz;
            basis[6] = SH_C2[2] * (2.0 * zz - xx - yy);
            basis[7] = SH_C2[3] * xz;
            basis[8] = SH_C2[4] * (xx - yy);
            if degree >= 3 {
                basis[9] = SH_C3[0] * y * (3.0 * xx - yy);
                basis[10] = SH_C3[1] * xy * z;
                basis[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
                basis[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
                basis[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
                basis[14] = SH_C3[5] * z * (xx - yy);
                basis[15] = SH_C3[6] * x * (xx - 3.0 * yy);
            }
        }
    }
    let n = sh_basis_count(degree).min(sh.len() / 3);
    let mut rgb = [0.5f32; 3];
    for (k, b) in basis.iter().enumerate().take(n) {
        for (c, out) in rgb.iter_mut().enumerate() {
            *out += b * sh[3 * k + c];
        }
    }
    rgb.map(|v| v.max(0.0))
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f32) -> f32 {
    (p / (1.0 - p)).ln()
}
