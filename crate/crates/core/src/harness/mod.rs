//! Experiment driver: scene preparation, end-to-end runs with per-frame
//! metrics, parameter sweeps and the oracle-equivalence suite.

pub mod paths;
pub mod scenes;
mod verify;

use std::collections::BTreeSet;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::camera::{Camera, Intrinsics, Pose};
use crate::codec::{publish, QuantGrid};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::lod::{find_cut_exhaustive, Cut};
use crate::render::{compute_psnr, compute_ssim, lerp_gaussian, render, ExpLut, FrameBuffer, RenderOptions};
use crate::scene::{partition_subtrees, LoDTree, SceneConfig};
use crate::transport::{
    decode_delta, raw_image_baseline_mbps, simulate_with, CloudConfig, Direction, SimConfig, Transcript, WindowTiming,
};
use crate::NodeId;

pub use paths::{generate_path, CameraPath, PathKind, PathSpec};
pub use scenes::{gen_synthetic_scene, scene_side, Layout};
pub use verify::{verify, Check, VerifyConfig, VerifyReport};

/// Percentage of `a`'s ids also in `b`. Two empty cuts overlap fully.
pub fn compute_overlap(a: &Cut, b: &Cut) -> f64 {
    let ids_a: Vec<NodeId> = a.ids().collect();
    let ids_b: Vec<NodeId> = b.ids().collect();
    overlap_sorted(&ids_a, &ids_b)
}

/// [`compute_overlap`] on sorted id lists.
pub fn overlap_sorted(a: &[NodeId], b: &[NodeId]) -> f64 {
    if a.is_empty() {
        return if b.is_empty() { 100.0 } else { 0.0 };
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    100.0 * common as f64 / a.len() as f64
}

/// Primitives of a cut with parent interpolation applied.
pub fn cut_primitives(tree: &LoDTree, cut: &Cut) -> Vec<(NodeId, Gaussian)> {
    cut.entries
        .iter()
        .map(|e| {
            let node = tree.node(e.node);
            let g = match node.parent {
                Some(p) if e.t < 1.0 => lerp_gaussian(&tree.node(p).gaussian, &node.gaussian, e.t),
                _ => node.gaussian.clone(),
            };
            (e.node, g)
        })
        .collect()
}

/// Maximum relative error of the table exponential over `samples` evenly
/// spaced exponents in `[-5.55, 0]`.
pub fn lut_max_relative_error(m: usize, samples: usize) -> f64 {
    let lut = ExpLut::new(m);
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let rho = -(crate::render::LUT_DOMAIN as f64) * i as f64 / (n - 1) as f64;
            let exact = rho.exp();
            (lut.exp(rho as f32) as f64 - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}

/// A tree ready to serve: built, partitioned and snapped to its
/// quantization grid.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub tree: LoDTree,
    pub grid: QuantGrid,
}

impl PreparedScene {
    pub fn build(gaussians: Vec<Gaussian>, cfg: &SceneConfig) -> Result<Self> {
        let tree = LoDTree::build(gaussians, cfg)?;
        Ok(Self::from_tree(partition_subtrees(tree, cfg)))
    }

    pub fn from_tree(tree: LoDTree) -> Self {
        let (tree, grid) = publish(tree);
        PreparedScene { tree, grid }
    }

    /// Center and radius of the root's bounding sphere.
    pub fn bounds(&self) -> (nalgebra::Vector3<f32>, f32) {
        let root = self.tree.node(self.tree.root());
        (root.gaussian.position, root.extent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cloud: CloudConfig,
    pub sim: SimConfig,
    /// Render and score every `quality_every`-th frame; 0 disables.
    pub quality_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cloud: CloudConfig::default(),
            sim: SimConfig::default(),
            quality_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub frame: u32,
    pub window: Option<u32>,
    /// Size of the latest cut the client holds.
    pub cut_size: usize,
    pub queue_len: usize,
    pub delta_bytes: usize,
    /// Share of the previous frame's queue kept in this one.
    pub overlap: f64,
    /// Nodes visited by the searches whose results arrived this frame.
    pub visited: usize,
    pub missing: usize,
    pub coarse_fallbacks: usize,
    pub resident: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    /// Wall-clock client render time; excluded from the CSV.
    pub render_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub windows: usize,
    pub mean_cut_size: f64,
    pub mean_overlap: f64,
    pub mean_visited: f64,
    /// All cut messages, INIT_CUT included.
    pub cut_mbps: f64,
    /// DELTA_CUT messages only.
    pub delta_mbps: f64,
    pub raw_mbps: f64,
    pub missing: usize,
    pub max_resident: usize,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub mirror_consistent: bool,
    /// Every rendered node was emitted by the cloud.
    pub no_phantoms: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<FrameRow>,
    pub windows: Vec<WindowTiming>,
    pub summary: RunSummary,
    pub transcript: Transcript,
}

const CSV_VERSION: u32 = 1;

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

impl RunReport {
    /// Per-frame CSV. Wall-clock columns are left out so identical runs give
    /// identical files.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# run-report v{CSV_VERSION}")?;
        writeln!(
            w,
            "frame,window,cut_size,queue_len,delta_bytes,overlap,visited,missing,coarse_fallbacks,resident,psnr,ssim"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{:.4},{},{},{},{},{},{}",
                r.frame,
                r.window.map(|x| x.to_string()).unwrap_or_default(),
                r.cut_size,
                r.queue_len,
                r.delta_bytes,
                r.overlap,
                r.visited,
                r.missing,
                r.coarse_fallbacks,
                r.resident,
                opt(r.psnr),
                opt(r.ssim)
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

fn client_render_options(cloud: &CloudConfig) -> RenderOptions {
    let mut opts = if cloud.lut_m > 0 {
        RenderOptions::lut(cloud.lut_m as usize)
    } else {
        RenderOptions::default()
    };
    opts.alpha_min = cloud.alpha_min;
    opts
}

/// Exact render of the oracle cut at `pose`.
pub fn reference_frame(tree: &LoDTree, cam: &Camera, tau: f32) -> FrameBuffer {
    let (cut, _) = find_cut_exhaustive(tree, cam, tau, 0);
    let prims = cut_primitives(tree, &cut);
    render(prims.iter().map(|(id, g)| (*id, g)), cam, &RenderOptions::default()).0
}

/// Full cloud/client/network session over `path`.
pub fn run_session(scene: &PreparedScene, intrinsics: Intrinsics, path: &CameraPath, cfg: &RunConfig) -> Result<RunReport> {
    let sim = SimConfig { fps: path.fps, ..cfg.sim };
    let render_opts = client_render_options(&cfg.cloud);
    let mut rows: Vec<FrameRow> = Vec::with_capacity(path.poses.len());
    let mut prev_queue: Option<Vec<NodeId>> = None;
    let mut rendered: BTreeSet<NodeId> = BTreeSet::new();
    let mut cut_sizes: Vec<usize> = Vec::new();
    let mut frame_error: Option<Error> = None;
    let out = simulate_with(
        &scene.tree,
        &scene.grid,
        intrinsics,
        cfg.cloud,
        &sim,
        &path.poses,
        |sample, pose: &Pose, queue, _| {
            let ids: Vec<NodeId> = queue.iter().map(|q| q.node).collect();
            rendered.extend(ids.iter().copied());
            let overlap = prev_queue.as_ref().map_or(100.0, |p| overlap_sorted(p, &ids));
            let (mut psnr, mut ssim, mut render_ms) = (None, None, None);
            if cfg.quality_every > 0 && sample.frame as usize % cfg.quality_every == 0 {
                let cam = intrinsics.at(pose);
                let started = Instant::now();
                let (img, _) = render(queue.iter().map(|q| (q.node, &q.gaussian)), &cam, &render_opts);
                render_ms = Some(started.elapsed().as_secs_f64() * 1e3);
                let reference = reference_frame(&scene.tree, &cam, cfg.cloud.tau);
                match (compute_psnr(&reference, &img), compute_ssim(&reference, &img)) {
                    (Ok(p), Ok(s)) => {
                        psnr = Some(p);
                        ssim = Some(s);
                    }
                    (Err(e), _) | (_, Err(e)) => frame_error = Some(e),
                }
            }
            rows.push(FrameRow {
                frame: sample.frame,
                window: sample.window,
                cut_size: 0,
                queue_len: queue.len(),
                delta_bytes: sample.bytes_received,
                overlap,
                visited: 0,
                missing: sample.missing,
                coarse_fallbacks: sample.coarse_fallbacks,
                resident: sample.resident,
                psnr,
                ssim,
                render_ms,
            });
            prev_queue = Some(ids);
        },
    )?;
    if let Some(e) = frame_error {
        return Err(e);
    }
    // Attribute each window to the frame that applied it.
    for w in &out.windows {
        cut_sizes.push(w.report.cut_size);
    }
    let mut applied = 0usize;
    for row in rows.iter_mut() {
        let upto = row.window.map_or(0, |w| w as usize + 1);
        while applied < upto {
            row.visited += out.windows[applied].report.visited;
            applied += 1;
        }
        row.cut_size = row.window.map_or(0, |w| out.windows[w as usize].report.cut_size);
    }

    let mut emitted: BTreeSet<NodeId> = BTreeSet::new();
    let mut base: Option<crate::lod::Cut> = None;
    for m in out.transcript.messages(Direction::Downlink)? {
        if m.kind != crate::transport::MsgType::Config {
            let d = decode_delta(m.index, &m.payload, &scene.grid, base.as_ref())?;
            emitted.extend(d.added.iter().map(|r| r.id));
            base = Some(d.cut);
        }
    }
    let mean = |it: &mut dyn Iterator<Item = f64>| {
        let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| s / n as f64)
    };
    let summary = RunSummary {
        frames: rows.len(),
        windows: out.windows.len(),
        mean_cut_size: mean(&mut cut_sizes.iter().map(|&c| c as f64)).unwrap_or(0.0),
        mean_overlap: mean(&mut rows.iter().skip(1).map(|r| r.overlap)).unwrap_or(100.0),
        mean_visited: mean(&mut out.windows.iter().map(|w| w.report.visited as f64)).unwrap_or(0.0),
        cut_mbps: out.cut_mbps(sim.fps),
        delta_mbps: out.delta_mbps(sim.fps),
        raw_mbps: raw_image_baseline_mbps(intrinsics.width, intrinsics.height, sim.fps),
        missing: out.missing_nodes,
        max_resident: rows.iter().map(|r| r.resident).max().unwrap_or(0),
        mean_psnr: mean(&mut rows.iter().filter_map(|r| r.psnr)),
        mean_ssim: mean(&mut rows.iter().filter_map(|r| r.ssim)),
        mirror_consistent: out.cloud_ids == out.client_ids,
        no_phantoms: rendered.is_subset(&emitted),
    };
    Ok(RunReport {
        rows,
        windows: out.windows,
        summary,
        transcript: out.transcript,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// LUT interval count.
    LutSize,
    /// Frames per window.
    Window,
    /// Reuse threshold in frames.
    ReuseThreshold,
    Tau,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" | "lut" => Ok(SweepParam::LutSize),
            "w" | "window" => Ok(SweepParam::Window),
            "wr" | "w_r" | "reuse" => Ok(SweepParam::ReuseThreshold),
            "tau" => Ok(SweepParam::Tau),
            _ => Err(Error::Usage(format!("unknown sweep parameter {s:?}"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::LutSize => "m",
            SweepParam::Window => "w",
            SweepParam::ReuseThreshold => "w_r",
            SweepParam::Tau => "tau",
        }
    }

    fn apply(self, cfg: &mut RunConfig, v: f64) -> Result<()> {
        let int = || {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as u32)
            } else {
                Err(Error::Usage(format!("{} needs a positive integer, got {v}", self.name())))
            }
        };
        match self {
            SweepParam::LutSize => cfg.cloud.lut_m = int()?,
            SweepParam::Window => cfg.cloud.management.window = int()?,
            SweepParam::ReuseThreshold => cfg.cloud.management.reuse_threshold = int()?,
            SweepParam::Tau if v > 0.0 => cfg.cloud.tau = v as f32,
            SweepParam::Tau => return Err(Error::Usage("tau must be positive".into())),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub summary: RunSummary,
    /// Cut messages sent, including INIT_CUT.
    pub messages: usize,
    /// Measured LUT error for the run's table size.
    pub lut_error: f64,
}

pub fn sweep(
    param: SweepParam,
    values: &[f64],
    scene: &PreparedScene,
    intrinsics: Intrinsics,
    path: &CameraPath,
    base: &RunConfig,
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            param.apply(&mut cfg, v)?;
            let report = run_session(scene, intrinsics, path, &cfg)?;
            Ok(SweepRow {
                value: v,
                messages: report.windows.len(),
                lut_error: if cfg.cloud.lut_m > 0 {
                    lut_max_relative_error(cfg.cloud.lut_m as usize, 100_001)
                } else {
                    0.0
                },
                summary: report.summary,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: &mut W, param: SweepParam, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "# sweep v{CSV_VERSION}")?;
    writeln!(
        w,
        "{},messages,mean_cut_size,mean_overlap,mean_visited,cut_mbps,delta_mbps,missing,max_resident,lut_error,psnr,ssim",
        param.name()
    )?;
    for r in rows {
        let s = &r.summary;
        writeln!(
            w,
            "{},{},{:.2},{:.4},{:.2},{:.4},{:.4},{},{},{:.6},{},{}",
            r.value,
            r.messages,
            s.mean_cut_size,
            s.mean_overlap,
            s.mean_visited,
            s.cut_mbps,
            s.delta_mbps,
            s.missing,
            s.max_resident,
            r.lut_error,
            opt(s.mean_psnr),
            opt(s.mean_ssim)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lod::CutEntry;

    fn cut(ids: &[NodeId]) -> Cut {
        Cut::new(0, 3.0, ids.iter().map(|&node| CutEntry { node, t: 1.0 }).collect())
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(compute_overlap(&cut(&[1, 2, 3]), &cut(&[1, 2, 3])), 100.0);
        assert_eq!(compute_overlap(&cut(&[1, 2]), &cut(&[3, 4])), 0.0);
        assert_eq!(compute_overlap(&cut(&[1, 2, 3, 4]), &cut(&[2, 4, 9])), 50.0);
        assert_eq!(compute_overlap(&cut(&[]), &cut(&[])), 100.0);
        assert_eq!(compute_overlap(&cut(&[]), &cut(&[1])), 0.0);
    }

    #[test]
    fn lut_error_within_bound_and_shrinks() {
        let errs: Vec<f64> = [8, 16, 32, 64].iter().map(|&m| lut_max_relative_error(m, 100_001)).collect();
        for (e, m) in errs.iter().zip([8, 16, 32, 64]) {
            assert!(*e <= ExpLut::new(m).error_bound() + 1e-6, "m={m} err={e}");
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
    }

    fn small_run(quality_every: usize) -> RunReport {
        let scene = PreparedScene::build(
            gen_synthetic_scene(3, 3000, Layout::CityGrid).unwrap(),
            &SceneConfig {
                partition_target_size: 64,
                ..SceneConfig::default()
            },
        )
        .unwrap();
        let (center, _) = scene.bounds();
        let spec = PathSpec::for_scene(PathKind::Orbit, center, scene_side(3000), 96, 60.0);
        let path = generate_path(&spec).unwrap();
        let cfg = RunConfig {
            quality_every,
            ..RunConfig::default()
        };
        run_session(&scene, Intrinsics::from_fov(160, 90, 60.0), &path, &cfg).unwrap()
    }

    #[test]
    fn small_session_is_consistent() {
        let report = small_run(48);
        let s = &report.summary;
        assert_eq!(s.frames, 96);
        assert!(s.mirror_consistent);
        assert!(s.no_phantoms);
        assert!(s.mean_cut_size > 0.0);
        assert!(s.mean_psnr.unwrap() > 20.0, "{s:?}");
        let csv = report.csv_string();
        assert_eq!(csv.lines().count(), 98);
        assert_eq!(csv, small_run(48).csv_string());
    }

    #[test]
    fn sweep_parameters_parse() {
        assert_eq!("m".parse::<SweepParam>().unwrap(), SweepParam::LutSize);
        assert_eq!("tau".parse::<SweepParam>().unwrap(), SweepParam::Tau);
        let mut cfg = RunConfig::default();
        assert!(SweepParam::Window.apply(&mut cfg, 2.5).is_err());
        SweepParam::Window.apply(&mut cfg, 16.0).unwrap();
        assert_eq!(cfg.cloud.management.window, 16);
    }
}
