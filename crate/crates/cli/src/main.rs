use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use splatstream::exec::with_workers;
use splatstream::harness::{
    gen_synthetic_scene, generate_path, run_session, scene_side, sweep, verify, write_sweep_csv, CameraPath,
    Layout, PathKind, PathSpec, PreparedScene, RunConfig, SweepParam, VerifyConfig,
};
use splatstream::lod::find_cut_exhaustive;
use splatstream::management::ManagementConfig;
use splatstream::render::{render, RenderOptions};
use splatstream::scene::{load_snapshot, load_splats, save_snapshot, save_splats};
use splatstream::transport::{run_client, serve_one, CloudConfig, NetworkModel, SearchMode, SimConfig};
use splatstream::{Intrinsics, LoDTree, SceneConfig};

#[derive(Parser)]
#[command(name = "splatstream", version, about = "Cloud/client Gaussian splat streaming harness")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded synthetic scene as a PLY file.
    GenScene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short, default_value_t = 10_000)]
        n: usize,
        /// city-grid, uniform or clustered.
        #[arg(long, default_value = "city-grid")]
        layout: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build and partition the LoD tree of a PLY scene.
    BuildTree {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_children: usize,
        #[arg(long, default_value_t = 512)]
        partition_size: usize,
        #[arg(long, default_value_t = 2)]
        partition_levels: usize,
    },
    /// Write a procedural camera path as CSV.
    GenPath {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        path: PathOpts,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run a simulated cloud/client session and write per-frame metrics.
    Simulate {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        path: PathOpts,
        #[command(flatten)]
        view: ViewOpts,
        #[command(flatten)]
        session: SessionOpts,
        /// Score every n-th frame against the exact oracle render (0 = off).
        #[arg(long, default_value_t = 0)]
        quality_every: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Render one frame of the oracle cut.
    Render {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        path: PathOpts,
        #[command(flatten)]
        view: ViewOpts,
        /// Frame of the path to render.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 3.0)]
        tau: f32,
        /// LUT interval count; 0 renders with the exact exponential.
        #[arg(long, default_value_t = 0)]
        lut_m: u32,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the float framebuffer.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// One simulation per parameter value.
    Sweep {
        #[arg(long)]
        tree: PathBuf,
        /// m, w, w_r or tau.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        path: PathOpts,
        #[command(flatten)]
        view: ViewOpts,
        #[command(flatten)]
        session: SessionOpts,
        #[arg(long, default_value_t = 0)]
        quality_every: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check every search against the exhaustive oracle and the mirror rule.
    Verify {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        path: PathOpts,
        #[command(flatten)]
        view: ViewOpts,
        #[arg(long, default_value_t = 3.0)]
        tau: f32,
    },
    /// Serve cloud sessions over TCP, one connection at a time.
    Serve {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        #[command(flatten)]
        view: ViewOpts,
        #[command(flatten)]
        session: SessionOpts,
        /// Stop after this many sessions (0 = forever).
        #[arg(long, default_value_t = 0)]
        sessions: usize,
    },
    /// Replay a camera path against a running server.
    Client {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        #[command(flatten)]
        path: PathOpts,
    },
}

#[derive(Args, Clone)]
struct PathOpts {
    /// Camera path CSV; overrides the procedural path.
    #[arg(long)]
    path_file: Option<PathBuf>,
    /// orbit, dolly, random-walk or static.
    #[arg(long, default_value = "orbit")]
    path_kind: String,
    #[arg(long, default_value_t = 600)]
    frames: usize,
    #[arg(long, default_value_t = 60.0)]
    fps: f64,
    #[arg(long, default_value_t = 0)]
    path_seed: u64,
    /// Frame the scene from high above instead of near street level.
    #[arg(long)]
    aerial: bool,
}

#[derive(Args, Clone)]
struct ViewOpts {
    #[arg(long, default_value_t = 960)]
    width: u32,
    #[arg(long, default_value_t = 540)]
    height: u32,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 60.0)]
    fov: f32,
}

#[derive(Args, Clone)]
struct SessionOpts {
    #[arg(long, default_value_t = 3.0)]
    tau: f32,
    #[arg(long, default_value_t = 32)]
    window: u32,
    /// Reuse threshold in frames.
    #[arg(long, default_value_t = 128)]
    reuse: u32,
    #[arg(long, default_value_t = 32)]
    lut_m: u32,
    /// Search every window from the root instead of the previous cut.
    #[arg(long)]
    streaming: bool,
    /// Simulated link bandwidth in Mbps (ignored by `serve`).
    #[arg(long, default_value_t = 100.0)]
    bandwidth: f64,
    /// Simulated one-way latency in ms (ignored by `serve`).
    #[arg(long, default_value_t = 20.0)]
    latency: f64,
    /// Simulated jitter bound in ms (ignored by `serve`).
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Simulated cloud time per window in ms (ignored by `serve`).
    #[arg(long, default_value_t = 10.0)]
    compute_ms: f64,
    /// Jitter seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ViewOpts {
    fn intrinsics(&self) -> Intrinsics {
        Intrinsics::from_fov(self.width, self.height, self.fov)
    }
}

impl SessionOpts {
    fn run_config(&self, quality_every: usize) -> RunConfig {
        let net = NetworkModel {
            bandwidth_mbps: self.bandwidth,
            latency_ms: self.latency,
            jitter_ms: self.jitter,
        };
        RunConfig {
            cloud: self.cloud_config(),
            sim: SimConfig {
                uplink: net,
                downlink: net,
                compute_ms: self.compute_ms,
                seed: self.seed,
                ..SimConfig::default()
            },
            quality_every,
        }
    }

    fn cloud_config(&self) -> CloudConfig {
        CloudConfig {
            tau: self.tau,
            management: ManagementConfig {
                window: self.window,
                reuse_threshold: self.reuse,
                ..ManagementConfig::default()
            },
            lut_m: self.lut_m,
            search: if self.streaming { SearchMode::Streaming } else { SearchMode::Temporal },
            ..CloudConfig::default()
        }
    }
}

fn load_scene(path: &Path) -> Result<PreparedScene> {
    let tree: LoDTree = load_snapshot(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(PreparedScene::from_tree(tree))
}

fn camera_path(opts: &PathOpts, scene: &PreparedScene) -> Result<CameraPath> {
    if let Some(file) = &opts.path_file {
        let f = File::open(file).with_context(|| format!("opening {}", file.display()))?;
        return Ok(CameraPath::read_csv(BufReader::new(f))?);
    }
    let kind: PathKind = opts.path_kind.parse()?;
    let (center, _) = scene.bounds();
    let side = scene_side(scene.tree.leaf_count());
    let mut spec = PathSpec::for_scene(kind, center, side, opts.frames, opts.fps);
    if opts.aerial {
        spec = spec.aerial(side);
    }
    spec.seed = opts.path_seed;
    Ok(generate_path(&spec)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::GenScene { seed, n, layout, out } => {
            let layout: Layout = layout.parse()?;
            let g = gen_synthetic_scene(seed, n, layout)?;
            save_splats(&out, &g)?;
            info!("wrote {} splats to {}", g.len(), out.display());
        }
        Cmd::BuildTree {
            input,
            out,
            max_children,
            partition_size,
            partition_levels,
        } => {
            let cfg = SceneConfig {
                max_children,
                partition_target_size: partition_size,
                partition_levels,
            };
            let scene = PreparedScene::build(load_splats(&input)?, &cfg)?;
            let tree = &scene.tree;
            if let Err(e) = tree.check_invariants() {
                bail!("tree invariant violated: {e}");
            }
            save_snapshot(&out, tree)?;
            println!(
                "nodes {} leaves {} depth {} partitions {}",
                tree.len(),
                tree.leaf_count(),
                tree.max_level(),
                tree.partitions().len()
            );
        }
        Cmd::GenPath { tree, path, out } => {
            let scene = load_scene(&tree)?;
            let p = camera_path(&path, &scene)?;
            let mut w = create(&out)?;
            p.write_csv(&mut w)?;
            w.flush()?;
        }
        Cmd::Simulate {
            tree,
            path,
            view,
            session,
            quality_every,
            csv,
            transcript,
        } => {
            let scene = load_scene(&tree)?;
            let p = camera_path(&path, &scene)?;
            let report = run_session(&scene, view.intrinsics(), &p, &session.run_config(quality_every))?;
            if let Some(csv) = csv {
                let mut w = create(&csv)?;
                report.write_csv(&mut w)?;
                w.flush()?;
            }
            if let Some(t) = transcript {
                std::fs::write(&t, report.transcript.encode())?;
            }
            let s = &report.summary;
            println!(
                "frames {} windows {} mean cut {:.1} overlap {:.2}% visited/window {:.1} cut rate {:.3} Mbps (delta only {:.3}, raw {:.2}) missing {} max resident {}",
                s.frames, s.windows, s.mean_cut_size, s.mean_overlap, s.mean_visited, s.cut_mbps, s.delta_mbps, s.raw_mbps, s.missing, s.max_resident
            );
            if let (Some(p), Some(q)) = (s.mean_psnr, s.mean_ssim) {
                println!("psnr {p:.2} dB ssim {q:.4}");
            }
            println!("mirror {} phantom-free {}", s.mirror_consistent, s.no_phantoms);
            return Ok(s.mirror_consistent && s.no_phantoms);
        }
        Cmd::Render {
            tree,
            path,
            view,
            frame,
            tau,
            lut_m,
            out,
            raw,
        } => {
            let scene = load_scene(&tree)?;
            let p = camera_path(&path, &scene)?;
            let Some(pose) = p.poses.get(frame) else {
                bail!("path has {} frames", p.poses.len());
            };
            let cam = view.intrinsics().at(pose);
            let (cut, _) = find_cut_exhaustive(&scene.tree, &cam, tau, frame as u32);
            let prims = splatstream::harness::cut_primitives(&scene.tree, &cut);
            let opts = if lut_m > 0 { RenderOptions::lut(lut_m as usize) } else { RenderOptions::default() };
            let (img, stats) = render(prims.iter().map(|(id, g)| (*id, g)), &cam, &opts);
            img.save_png(&out)?;
            if let Some(raw) = raw {
                img.save_raw(&raw)?;
            }
            println!(
                "cut {} culled {} blended {} skipped {}",
                cut.len(),
                stats.culled,
                stats.blended,
                stats.skipped
            );
        }
        Cmd::Sweep {
            tree,
            param,
            values,
            path,
            view,
            session,
            quality_every,
            csv,
        } => {
            let scene = load_scene(&tree)?;
            let p = camera_path(&path, &scene)?;
            let param: SweepParam = param.parse()?;
            let rows = sweep(param, &values, &scene, view.intrinsics(), &p, &session.run_config(quality_every))?;
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, param, &rows)?;
            match csv {
                Some(path) => std::fs::write(path, &buf)?,
                None => std::io::stdout().write_all(&buf)?,
            }
            return Ok(rows.iter().all(|r| r.summary.mirror_consistent && r.summary.no_phantoms));
        }
        Cmd::Verify { tree, path, view, tau } => {
            let scene = load_scene(&tree)?;
            let p = camera_path(&path, &scene)?;
            let cfg = VerifyConfig {
                tau,
                ..VerifyConfig::default()
            };
            let report = verify(&scene.tree, &scene.grid, view.intrinsics(), &p.poses, &cfg);
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(report.all_passed());
        }
        Cmd::Serve {
            tree,
            addr,
            view,
            session,
            sessions,
        } => {
            let scene = load_scene(&tree)?;
            let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
            println!("listening on {}", listener.local_addr()?);
            let mut served = 0;
            for stream in listener.incoming() {
                let stream = stream?;
                let peer = stream.peer_addr()?;
                match serve_one(stream, &scene.tree, &scene.grid, view.intrinsics(), session.cloud_config()) {
                    Ok(r) => println!("{peer}: {} poses, {} windows, {} bytes", r.poses, r.windows.len(), r.bytes_sent),
                    Err(e) => eprintln!("{peer}: {e}"),
                }
                served += 1;
                if sessions > 0 && served >= sessions {
                    break;
                }
            }
        }
        Cmd::Client { tree, addr, path } => {
            let scene = load_scene(&tree)?;
            let p = camera_path(&path, &scene)?;
            let r = run_client(addr.as_str(), &p.poses, Duration::from_secs_f64(1.0 / p.fps))?;
            println!(
                "frames {} windows {} bytes {} missing {} resident {}",
                r.frames,
                r.windows_applied,
                r.bytes_received,
                r.missing,
                r.subgraph_ids.len()
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = cli.workers;
    match with_workers(workers, || run(cli.cmd)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
