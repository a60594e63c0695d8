use super::{
    alpha_exact, project, skip_test, AlphaMode, FrameBuffer, RenderOptions, RenderStats, Splat2D, ALPHA_CAP,
    TRANSMITTANCE_MIN,
};
use crate::camera::Camera;
use crate::exec;
use crate::gaussian::Gaussian;
use crate::NodeId;

pub const TILE_SIZE: u32 = 16;

/// Per-tile splat lists, each ordered front to back.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBins {
    pub tiles_x: u32,
    pub tiles_y: u32,
    /// Indices into the splat slice, row-major by tile.
    pub bins: Vec<Vec<u32>>,
}

fn depth_order(splats: &[Splat2D], a: u32, b: u32) -> std::cmp::Ordering {
    let (sa, sb) = (&splats[a as usize], &splats[b as usize]);
    sa.depth.total_cmp(&sb.depth).then(sa.id.cmp(&sb.id))
}

/// Bins every splat into each tile its 3-sigma box touches and sorts each
/// tile by (depth, node id).
pub fn sort_tiles(splats: &[Splat2D], width: u32, height: u32) -> TileBins {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let mut bins = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (i, s) in splats.iter().enumerate() {
        let Some([x0, x1, y0, y1]) = s.pixel_range(width, height) else {
            continue;
        };
        for ty in y0 / TILE_SIZE..=y1 / TILE_SIZE {
            for tx in x0 / TILE_SIZE..=x1 / TILE_SIZE {
                bins[(ty * tiles_x + tx) as usize].push(i as u32);
            }
        }
    }
    for bin in &mut bins {
        bin.sort_by(|&a, &b| depth_order(splats, a, b));
    }
    TileBins { tiles_x, tiles_y, bins }
}

struct Blend<'a> {
    opts: &'a RenderOptions,
    ln_alpha_min: f32,
    ranges: Vec<Option<[u32; 4]>>,
}

impl<'a> Blend<'a> {
    fn new(splats: &[Splat2D], width: u32, height: u32, opts: &'a RenderOptions) -> Self {
        Blend {
            opts,
            ln_alpha_min: opts.alpha_min.ln(),
            ranges: splats.iter().map(|s| s.pixel_range(width, height)).collect(),
        }
    }
}

impl Blend<'_> {
    /// Composites `order` front to back at pixel (x, y). Returns color,
    /// transmittance and (skipped, blended) counts.
    fn pixel(&self, splats: &[Splat2D], order: impl Iterator<Item = u32>, x: u32, y: u32) -> ([f32; 3], f32, usize, usize) {
        let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
        let mut rgb = [0.0f32; 3];
        let mut t = 1.0f32;
        let (mut skipped, mut blended) = (0, 0);
        for i in order {
            let s = &splats[i as usize];
            let Some([x0, x1, y0, y1]) = self.ranges[i as usize] else {
                continue;
            };
            if x < x0 || x > x1 || y < y0 || y > y1 {
                continue;
            }
            let rho = s.power(px, py);
            if rho > 0.0 {
                continue;
            }
            if !skip_test(s.log_opacity, rho, self.ln_alpha_min) {
                skipped += 1;
                continue;
            }
            let alpha = match &self.opts.mode {
                AlphaMode::Exact => alpha_exact(s.opacity, rho),
                AlphaMode::Lut(lut) => (s.opacity * lut.exp(rho)).min(ALPHA_CAP),
            };
            for c in 0..3 {
                rgb[c] += t * alpha * s.color[c];
            }
            t *= 1.0 - alpha;
            blended += 1;
            if t < TRANSMITTANCE_MIN {
                break;
            }
        }
        (rgb, t, skipped, blended)
    }
}

/// Rasterizes pre-sorted tiles. Tiles are independent and may run on any
/// number of workers; the result does not depend on the worker count.
pub fn rasterize(splats: &[Splat2D], bins: &TileBins, width: u32, height: u32, opts: &RenderOptions) -> (FrameBuffer, RenderStats) {
    let blend = Blend::new(splats, width, height, opts);
    let tiles: Vec<u32> = (0..bins.tiles_x * bins.tiles_y).collect();
    let outs = exec::map(&tiles, |&tile| {
        let (tx, ty) = (tile % bins.tiles_x, tile / bins.tiles_x);
        let bin = &bins.bins[tile as usize];
        let x_end = ((tx + 1) * TILE_SIZE).min(width);
        let y_end = ((ty + 1) * TILE_SIZE).min(height);
        let mut px = Vec::new();
        let (mut skipped, mut blended) = (0, 0);
        for y in ty * TILE_SIZE..y_end {
            for x in tx * TILE_SIZE..x_end {
                let (rgb, t, s, b) = blend.pixel(splats, bin.iter().copied(), x, y);
                skipped += s;
                blended += b;
                px.push((x, y, rgb, t));
            }
        }
        (px, skipped, blended)
    });
    let mut fb = FrameBuffer::new(width, height);
    let mut stats = RenderStats {
        tile_entries: bins.bins.iter().map(Vec::len).sum(),
        ..RenderStats::default()
    };
    for (px, skipped, blended) in outs {
        stats.skipped += skipped;
        stats.blended += blended;
        for (x, y, rgb, t) in px {
            fb.set(x, y, rgb, t);
        }
    }
    (fb, stats)
}

/// Reference renderer: one global depth sort, every splat tested at every
/// pixel, no tiling.
pub fn rasterize_naive(splats: &[Splat2D], width: u32, height: u32, opts: &RenderOptions) -> FrameBuffer {
    let blend = Blend::new(splats, width, height, opts);
    let mut order: Vec<u32> = (0..splats.len() as u32).collect();
    order.sort_by(|&a, &b| depth_order(splats, a, b));
    let mut fb = FrameBuffer::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (rgb, t, _, _) = blend.pixel(splats, order.iter().copied(), x, y);
            fb.set(x, y, rgb, t);
        }
    }
    fb
}

/// Projects, bins and rasterizes a set of primitives.
pub fn render<'a>(
    prims: impl IntoIterator<Item = (NodeId, &'a Gaussian)>,
    cam: &Camera,
    opts: &RenderOptions,
) -> (FrameBuffer, RenderStats) {
    let prims: Vec<(NodeId, &Gaussian)> = prims.into_iter().collect();
    let projected = exec::map(&prims, |(id, g)| project(*id, g, cam));
    let splats: Vec<Splat2D> = projected.into_iter().flatten().collect();
    let bins = sort_tiles(&splats, cam.width, cam.height);
    let (fb, mut stats) = rasterize(&splats, &bins, cam.width, cam.height, opts);
    stats.primitives = prims.len();
    stats.culled = prims.len() - splats.len();
    (fb, stats)
}
