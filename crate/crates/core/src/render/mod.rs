//! Software splatting: projection, tile binning, depth sort and
//! front-to-back blending with an early log-domain skip and an optional
//! table-driven exponential.

mod image;
mod raster;

use nalgebra::{Matrix2x3, Matrix3, UnitQuaternion, Vector3};

use crate::camera::Camera;
use crate::gaussian::{sh_len, Gaussian};
use crate::NodeId;

pub use image::{compute_psnr, compute_ssim, FrameBuffer};
pub use raster::{rasterize, rasterize_naive, render, sort_tiles, TileBins, TILE_SIZE};

/// Lower end of the tabulated exponent domain.
pub const LUT_DOMAIN: f32 = 5.55;
pub const DEFAULT_LUT_SIZE: usize = 32;
pub const DEFAULT_ALPHA_MIN: f32 = 1.0 / 255.0;
pub const ALPHA_CAP: f32 = 0.99;
pub const TRANSMITTANCE_MIN: f32 = 1e-4;
/// Isotropic screen-space variance added to every splat, in px².
pub const COV_FLOOR: f32 = 0.3;

/// A Gaussian projected onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    pub id: NodeId,
    pub mean: [f32; 2],
    /// Inverse of the 2D covariance as (a, b, c) for `[[a, b], [b, c]]`.
    pub conic: [f32; 3],
    /// Half extents of the 3-sigma box in pixels.
    pub radius: [f32; 2],
    pub depth: f32,
    pub opacity: f32,
    pub log_opacity: f32,
    pub color: [f32; 3],
}

impl Splat2D {
    /// Power `-(1/2) dᵀ Σ'⁻¹ d` at pixel center `(px, py)`.
    pub fn power(&self, px: f32, py: f32) -> f32 {
        let dx = px - self.mean[0];
        let dy = py - self.mean[1];
        let [a, b, c] = self.conic;
        -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
    }

    /// Inclusive pixel index range covered by the 3-sigma box, clipped to
    /// the viewport; `None` when nothing is covered.
    pub fn pixel_range(&self, width: u32, height: u32) -> Option<[u32; 4]> {
        let lo_x = (self.mean[0] - self.radius[0] - 0.5).ceil().max(0.0);
        let hi_x = (self.mean[0] + self.radius[0] - 0.5).floor().min(width as f32 - 1.0);
        let lo_y = (self.mean[1] - self.radius[1] - 0.5).ceil().max(0.0);
        let hi_y = (self.mean[1] + self.radius[1] - 0.5).floor().min(height as f32 - 1.0);
        if lo_x > hi_x || lo_y > hi_y {
            return None;
        }
        Some([lo_x as u32, hi_x as u32, lo_y as u32, hi_y as u32])
    }
}

/// Projects `g` through `cam`; `None` when culled.
pub fn project(id: NodeId, g: &Gaussian, cam: &Camera) -> Option<Splat2D> {
    let t = cam.to_camera(&g.position);
    if t.z <= cam.near || t.z >= cam.far {
        return None;
    }
    let f = cam.focal;
    let (x, y, z) = (t.x, t.y, t.z);
    let j = Matrix2x3::new(f / z, 0.0, -f * x / (z * z), 0.0, f / z, -f * y / (z * z));
    let w: Matrix3<f32> = cam.orientation.to_rotation_matrix().into_inner().transpose();
    let m = j * w;
    let cov = m * g.covariance() * m.transpose();
    let a = cov[(0, 0)] + COV_FLOOR;
    let b = cov[(0, 1)];
    let c = cov[(1, 1)] + COV_FLOOR;
    let det = a * c - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let mean = cam.to_pixel(&t);
    let radius = [3.0 * a.sqrt(), 3.0 * c.sqrt()];
    let splat = Splat2D {
        id,
        mean,
        conic: [c / det, -b / det, a / det],
        radius,
        depth: z,
        opacity: g.opacity,
        log_opacity: g.log_opacity,
        color: g.color(&(g.position - cam.position).normalize()),
    };
    splat.pixel_range(cam.width, cam.height)?;
    Some(splat)
}

/// `min(0.99, θ e^ρ)`.
pub fn alpha_exact(opacity: f32, rho: f32) -> f32 {
    (opacity * rho.exp()).min(ALPHA_CAP)
}

/// Whether a splat contributes at power `rho`: `ln α* − ln θ < ρ`.
pub fn skip_test(log_opacity: f32, rho: f32, ln_alpha_min: f32) -> bool {
    ln_alpha_min - log_opacity < rho
}

/// Tabulated `e^ρ` on `[-5.55, 0]` with `m` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpLut {
    table: Vec<f32>,
    scale: f32,
}

impl ExpLut {
    pub fn new(m: usize) -> Self {
        let m = m.max(1);
        let table = (0..=m)
            .map(|i| (-(LUT_DOMAIN as f64) * i as f64 / m as f64).exp() as f32)
            .collect();
        ExpLut {
            table,
            scale: m as f32 / -LUT_DOMAIN,
        }
    }

    pub fn intervals(&self) -> usize {
        self.table.len() - 1
    }

    pub fn table(&self) -> &[f32] {
        &self.table
    }

    pub fn index(&self, rho: f32) -> usize {
        let i = (rho * self.scale).round();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.intervals())
        }
    }

    pub fn exp(&self, rho: f32) -> f32 {
        self.table[self.index(rho)]
    }

    /// Analytic bound on the relative error over the domain.
    pub fn error_bound(&self) -> f64 {
        (LUT_DOMAIN as f64 / (2.0 * self.intervals() as f64)).exp() - 1.0
    }
}

/// Exponential evaluation used while blending.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaMode {
    Exact,
    Lut(ExpLut),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub mode: AlphaMode,
    pub alpha_min: f32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            mode: AlphaMode::Exact,
            alpha_min: DEFAULT_ALPHA_MIN,
        }
    }
}

impl RenderOptions {
    pub fn lut(m: usize) -> Self {
        RenderOptions {
            mode: AlphaMode::Lut(ExpLut::new(m)),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub primitives: usize,
    pub culled: usize,
    pub tile_entries: usize,
    pub skipped: usize,
    pub blended: usize,
}

/// Attribute interpolation between a parent (`t = 0`) and a node (`t = 1`):
/// linear in position, log-scale, opacity and SH; normalized lerp for the
/// rotation.
pub fn lerp_gaussian(parent: &Gaussian, node: &Gaussian, t: f32) -> Gaussian {
    if t >= 1.0 {
        return node.clone();
    }
    if t <= 0.0 {
        return parent.clone();
    }
    let mix = |a: f32, b: f32| a + (b - a) * t;
    let position = parent.position.lerp(&node.position, t);
    let scale = Vector3::from_fn(|i, _| mix(parent.scale[i].ln(), node.scale[i].ln()).exp());
    let mut qn = *node.rotation.quaternion();
    let qp = *parent.rotation.quaternion();
    if qp.dot(&qn) < 0.0 {
        qn = -qn;
    }
    let rotation = UnitQuaternion::from_quaternion(qp.lerp(&qn, t));
    let opacity = mix(parent.opacity, node.opacity).clamp(f32::MIN_POSITIVE, 1.0);
    let sh_degree = parent.sh_degree.max(node.sh_degree);
    let coef = |g: &Gaussian, k: usize| g.sh.get(k).copied().unwrap_or(0.0);
    let sh = (0..sh_len(sh_degree))
        .map(|k| mix(coef(parent, k), coef(node, k)))
        .collect();
    Gaussian {
        position,
        rotation,
        scale,
        opacity,
        log_opacity: opacity.ln(),
        sh_degree,
        sh,
    }
}
