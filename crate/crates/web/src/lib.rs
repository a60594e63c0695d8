//! Browser demo: orbit a small synthetic city, change the LoD threshold and
//! the exponential table, and watch the cut and the image respond.

use wasm_bindgen::prelude::*;

use splatstream::harness::{compute_overlap, cut_primitives, gen_synthetic_scene, lut_max_relative_error, Layout, PreparedScene};
use splatstream::lod::{find_cut_streaming, find_cut_temporal, Cut};
use splatstream::render::{render, RenderOptions};
use splatstream::{Intrinsics, Pose, SceneConfig};

use nalgebra::Vector3;

#[wasm_bindgen]
pub struct Demo {
    scene: PreparedScene,
    side: f32,
    width: u32,
    height: u32,
    prev: Option<Cut>,
    stats: CutStats,
}

/// Statistics of the most recent cut.
#[wasm_bindgen]
#[derive(Clone, Copy, Default)]
pub struct CutStats {
    pub cut_size: usize,
    pub nodes: usize,
    pub streaming_visited: usize,
    pub temporal_visited: usize,
    /// Percentage of the previous cut kept.
    pub overlap: f64,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(splats: usize, seed: u64, width: u32, height: u32) -> Result<Demo, JsError> {
        let g = gen_synthetic_scene(seed, splats.max(1), Layout::CityGrid).map_err(to_js)?;
        let cfg = SceneConfig {
            partition_target_size: 128,
            ..SceneConfig::default()
        };
        let scene = PreparedScene::build(g, &cfg).map_err(to_js)?;
        Ok(Demo {
            side: splatstream::harness::scene_side(splats),
            scene,
            width,
            height,
            prev: None,
            stats: CutStats::default(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.scene.tree.len()
    }

    fn pose(&self, angle_deg: f32, distance: f32) -> Pose {
        let (center, _) = self.scene.bounds();
        let a = angle_deg.to_radians();
        let r = self.side * distance;
        let eye = center + Vector3::new(r * a.cos(), r * 0.6, r * a.sin());
        Pose::look_at(eye, center, Vector3::y())
    }

    /// Renders the cut for an orbit angle and distance (in scene widths) and
    /// returns RGBA pixels. `lut_m = 0` uses the exact exponential.
    pub fn render(&mut self, angle_deg: f32, distance: f32, tau: f32, lut_m: u32) -> Result<Vec<u8>, JsError> {
        if !(tau > 0.0) {
            return Err(JsError::new("tau must be positive"));
        }
        let cam = Intrinsics::from_fov(self.width, self.height, 60.0).at(&self.pose(angle_deg, distance));
        let tree = &self.scene.tree;
        let (cut, streamed) = find_cut_streaming(tree, &cam, tau, 0);
        let (temporal_visited, overlap) = match &self.prev {
            Some(prev) if prev.tau == tau => {
                let (_, s) = find_cut_temporal(tree, prev, &cam, tau, 0).map_err(to_js)?;
                (s.visited, compute_overlap(prev, &cut))
            }
            _ => (streamed.visited, 0.0),
        };
        let prims = cut_primitives(tree, &cut);
        let opts = if lut_m > 0 { RenderOptions::lut(lut_m as usize) } else { RenderOptions::default() };
        let (img, _) = render(prims.iter().map(|(id, g)| (*id, g)), &cam, &opts);
        self.stats = CutStats {
            cut_size: cut.len(),
            nodes: tree.len(),
            streaming_visited: streamed.visited,
            temporal_visited,
            overlap,
        };
        self.prev = Some(cut);
        Ok(img.to_rgba8())
    }

    pub fn stats(&self) -> CutStats {
        self.stats
    }
}

/// Measured relative error of the `m`-interval table over `samples` points.
#[wasm_bindgen]
pub fn lut_error(m: u32, samples: usize) -> f64 {
    lut_max_relative_error(m.max(1) as usize, samples)
}

fn to_js(e: splatstream::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_reports() {
        let mut d = Demo::new(800, 1, 64, 48).unwrap();
        let px = d.render(0.0, 1.5, 3.0, 32).unwrap();
        assert_eq!(px.len(), 64 * 48 * 4);
        let s = d.stats();
        assert!(s.cut_size > 0 && s.cut_size <= s.streaming_visited);
        d.render(1.0, 1.5, 3.0, 0).unwrap();
        assert!(d.stats().overlap > 50.0);
        assert!(lut_error(32, 10_001) < lut_error(8, 10_001));
    }
}
