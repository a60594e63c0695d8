//! Virtual-time simulation of one cloud/client session.
//!
//! The client sends its starting pose at t = 0 and starts its frame clock
//! when INIT_CUT arrives; frame `f` is shown at `t_init + f / fps` and its
//! pose is sent at that instant. The cloud is a single serial worker: the
//! search for window `k` starts once a pose at or past the window's trigger
//! frame has arrived and the previous search has finished, and takes a fixed
//! `compute_ms`. The client applies every cut that has arrived by the time a
//! frame starts and never waits for one in flight.

use super::network::{measure_bandwidth, Link, NetworkModel};
use super::session::{ClientSession, CloudConfig, CloudSession, WindowReport};
use super::{Message, MsgType};
use crate::camera::{Intrinsics, Pose};
use crate::codec::{QuantGrid, Reader};
use crate::error::{Error, Result};
use crate::management::{GatherStats, QueueItem};
use crate::scene::LoDTree;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub fps: f64,
    pub uplink: NetworkModel,
    pub downlink: NetworkModel,
    /// Virtual cost of one cloud window.
    pub compute_ms: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            fps: 60.0,
            uplink: NetworkModel::default(),
            downlink: NetworkModel::default(),
            compute_ms: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Direction {
    Uplink = 0,
    Downlink = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub t_send: f64,
    pub t_arrive: f64,
    /// Encoded message.
    pub bytes: Vec<u8>,
}

/// Every message of a session in send order.
///
/// Serialized as `"VTRS" | version u8 | count u32` followed by
/// `direction u8 | t_send f64 | t_arrive f64 | length u32 | message` per
/// entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub const MAGIC: &'static [u8; 4] = b"VTRS";

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(Self::MAGIC);
        out.push(1);
        out.extend((self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.push(e.direction as u8);
            out.extend(e.t_send.to_le_bytes());
            out.extend(e.t_arrive.to_le_bytes());
            out.extend((e.bytes.len() as u32).to_le_bytes());
            out.extend(&e.bytes);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        if r.take(4)? != Self::MAGIC {
            return Err(Error::format("not a transcript"));
        }
        if r.u8()? != 1 {
            return Err(Error::format("unsupported transcript version"));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(buf.len() / 21));
        for _ in 0..count {
            let direction = match r.u8()? {
                0 => Direction::Uplink,
                1 => Direction::Downlink,
                d => return Err(Error::format(format!("bad direction {d}"))),
            };
            let t_send = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            let t_arrive = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            let len = r.u32()? as usize;
            entries.push(TranscriptEntry {
                direction,
                t_send,
                t_arrive,
                bytes: r.take(len)?.to_vec(),
            });
        }
        if r.remaining() != 0 {
            return Err(Error::format("trailing bytes after transcript"));
        }
        Ok(Transcript { entries })
    }

    /// Decoded messages travelling in one direction, in order.
    pub fn messages(&self, direction: Direction) -> Result<Vec<Message>> {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| Message::decode(&e.bytes).map(|(m, _)| m))
            .collect()
    }
}

/// Client state at the start of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub frame: u32,
    /// Latest window applied so far.
    pub window: Option<u32>,
    pub resident: usize,
    pub queue_len: usize,
    pub missing: usize,
    pub coarse_fallbacks: usize,
    /// Cut bytes received since the previous frame.
    pub bytes_received: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowTiming {
    pub report: WindowReport,
    pub t_start: f64,
    pub t_send: f64,
    pub t_arrive: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub transcript: Transcript,
    pub windows: Vec<WindowTiming>,
    pub frames: Vec<FrameSample>,
    /// Arrival time of INIT_CUT, where the client clock starts.
    pub t_init: f64,
    /// Cloud table and client subgraph after all messages were delivered.
    pub cloud_ids: Vec<NodeId>,
    pub client_ids: Vec<NodeId>,
    /// Cut-message bytes (headers included) received by the client.
    pub cut_bytes: u64,
    /// Cuts referencing nodes the client never had.
    pub missing_nodes: usize,
}

impl SimOutput {
    pub fn duration_s(&self, fps: f64) -> f64 {
        self.frames.len() as f64 / fps
    }

    /// Mean downlink cut bit rate over the session.
    pub fn cut_mbps(&self, fps: f64) -> f64 {
        measure_bandwidth(self.cut_bytes, self.duration_s(fps))
    }

    /// Bytes of the INIT_CUT message, the cold start.
    pub fn init_bytes(&self) -> u64 {
        self.windows.first().map_or(0, |w| w.report.message_bytes as u64)
    }

    /// Steady-state rate: DELTA_CUT messages only.
    pub fn delta_mbps(&self, fps: f64) -> f64 {
        measure_bandwidth(self.cut_bytes.saturating_sub(self.init_bytes()), self.duration_s(fps))
    }
}

/// Runs a session over `poses` (one per client frame).
pub fn simulate(
    tree: &LoDTree,
    grid: &QuantGrid,
    intrinsics: Intrinsics,
    cloud_cfg: CloudConfig,
    sim: &SimConfig,
    poses: &[Pose],
) -> Result<SimOutput> {
    simulate_with(tree, grid, intrinsics, cloud_cfg, sim, poses, |_, _, _, _| {})
}

/// [`simulate`] with a callback receiving each frame's render queue.
#[allow(clippy::too_many_arguments)]
pub fn simulate_with<F>(
    tree: &LoDTree,
    grid: &QuantGrid,
    intrinsics: Intrinsics,
    cloud_cfg: CloudConfig,
    sim: &SimConfig,
    poses: &[Pose],
    mut on_frame: F,
) -> Result<SimOutput>
where
    F: FnMut(&FrameSample, &Pose, &[QueueItem], &GatherStats),
{
    if poses.is_empty() {
        return Err(Error::Usage("simulation needs at least one pose".into()));
    }
    if !(sim.fps > 0.0) || !(sim.compute_ms >= 0.0) {
        return Err(Error::Usage("fps must be positive and compute time non-negative".into()));
    }
    let frame_count = poses.len() as u32;
    let compute = sim.compute_ms / 1e3;
    let mut up = Link::new(sim.uplink, sim.seed);
    let mut down = Link::new(sim.downlink, sim.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cloud = CloudSession::new(tree, grid, intrinsics, cloud_cfg);
    let mut transcript = Vec::new();
    let mut downlink: Vec<(f64, Message)> = Vec::new();

    let config = cloud.config_message();
    let t = down.deliver(config.encoded_len(), 0.0);
    transcript.push(entry(Direction::Downlink, 0.0, t, &config));
    downlink.push((t, config));

    let mut uplink: Vec<(f64, Message)> = Vec::with_capacity(poses.len());
    let pose0 = ClientSession::pose_message(0, &poses[0]);
    let a0 = up.deliver(pose0.encoded_len(), 0.0);
    transcript.push(entry(Direction::Uplink, 0.0, a0, &pose0));
    uplink.push((a0, pose0));

    let mut windows = Vec::new();
    let mut fed = 0;
    let mut cloud_free = 0.0;
    let mut run_window = |cloud: &mut CloudSession, start: f64, transcript: &mut Vec<_>, downlink: &mut Vec<_>| {
        let (msg, report) = cloud.run_window()?;
        let t_send = start + compute;
        let t_arrive = down.deliver(msg.encoded_len(), t_send);
        transcript.push(entry(Direction::Downlink, t_send, t_arrive, &msg));
        downlink.push((t_arrive, msg));
        windows.push(WindowTiming {
            report,
            t_start: start,
            t_send,
            t_arrive,
        });
        Ok::<f64, Error>(t_send)
    };

    cloud.on_pose(&uplink[0].1)?;
    fed += 1;
    cloud_free = run_window(&mut cloud, a0.max(cloud_free), &mut transcript, &mut downlink)?;
    let t_init = downlink[1].0;

    let frame_time = |f: u32| t_init + f as f64 / sim.fps;
    for f in 1..frame_count {
        let msg = ClientSession::pose_message(f, &poses[f as usize]);
        let t = frame_time(f);
        let a = up.deliver(msg.encoded_len(), t);
        transcript.push(entry(Direction::Uplink, t, a, &msg));
        uplink.push((a, msg));
    }

    loop {
        let k = cloud.next_window();
        let trigger = cloud.trigger_frame(k);
        if trigger >= frame_count {
            break;
        }
        let ready = uplink[trigger as usize].0;
        let start = ready.max(cloud_free);
        while fed < uplink.len() && uplink[fed].0 <= start {
            cloud.on_pose(&uplink[fed].1)?;
            fed += 1;
        }
        cloud_free = run_window(&mut cloud, start, &mut transcript, &mut downlink)?;
    }
    drop(run_window);

    let mut client = ClientSession::new();
    let mut frames = Vec::with_capacity(poses.len());
    let mut next = 0;
    let mut cut_bytes = 0u64;
    let mut missing_nodes = 0;
    let mut apply = |client: &mut ClientSession, msg: &Message| -> Result<usize> {
        if let super::ClientEvent::Applied { report, .. } = client.on_message(msg)? {
            missing_nodes += report.missing;
        }
        Ok(if msg.kind == MsgType::Config { 0 } else { msg.encoded_len() })
    };
    for (f, pose) in poses.iter().enumerate() {
        let now = frame_time(f as u32);
        let mut received = 0;
        while next < downlink.len() && downlink[next].0 <= now {
            received += apply(&mut client, &downlink[next].1)?;
            next += 1;
        }
        cut_bytes += received as u64;
        let (queue, stats) = client.gather(pose);
        let sample = FrameSample {
            frame: f as u32,
            window: client.subgraph().and_then(|s| s.last_window()),
            resident: client.subgraph().map_or(0, |s| s.len()),
            queue_len: queue.len(),
            missing: stats.missing,
            coarse_fallbacks: stats.coarse_fallbacks,
            bytes_received: received,
        };
        on_frame(&sample, pose, &queue, &stats);
        frames.push(sample);
    }
    while next < downlink.len() {
        apply(&mut client, &downlink[next].1)?;
        next += 1;
    }

    transcript.sort_by(|a: &TranscriptEntry, b: &TranscriptEntry| a.t_send.total_cmp(&b.t_send));
    Ok(SimOutput {
        transcript: Transcript { entries: transcript },
        windows,
        frames,
        t_init,
        cloud_ids: cloud.table().ids().into_iter().collect(),
        client_ids: client.subgraph().map(|s| s.ids().into_iter().collect()).unwrap_or_default(),
        cut_bytes,
        missing_nodes,
    })
}

fn entry(direction: Direction, t_send: f64, t_arrive: f64, msg: &Message) -> TranscriptEntry {
    TranscriptEntry {
        direction,
        t_send,
        t_arrive,
        bytes: msg.encode(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::publish;
    use crate::lod::fixtures::five_node_tree;
    use nalgebra::{UnitQuaternion, Vector3};

    fn dolly(n: usize, speed: f32) -> Vec<Pose> {
        (0..n)
            .map(|i| Pose::new(Vector3::new(0.0, 0.0, -2.0 - speed * i as f32), UnitQuaternion::identity()))
            .collect()
    }

    fn setup() -> (LoDTree, QuantGrid, Intrinsics) {
        let (tree, _) = five_node_tree();
        let (tree, grid) = publish(tree);
        let intr = Intrinsics {
            focal: 100.0,
            width: 64,
            height: 64,
            near: 0.01,
            far: 1000.0,
        };
        (tree, grid, intr)
    }

    #[test]
    fn static_session_sends_empty_deltas() {
        let (tree, grid, intr) = setup();
        let cfg = CloudConfig {
            management: crate::management::ManagementConfig {
                window: 8,
                ..Default::default()
            },
            ..CloudConfig::default()
        };
        let out = simulate(&tree, &grid, intr, cfg, &SimConfig::default(), &dolly(64, 0.0)).unwrap();
        assert!(out.windows.len() >= 7);
        assert!(out.windows[0].report.added > 0);
        assert!(out.windows[1..].iter().all(|w| w.report.added == 0));
        assert_eq!(out.cloud_ids, out.client_ids);
        assert_eq!(out.missing_nodes, 0);
        let kinds: Vec<_> = out.transcript.messages(Direction::Downlink).unwrap().iter().map(|m| m.kind).collect();
        assert_eq!(kinds[..3], [MsgType::Config, MsgType::InitCut, MsgType::DeltaCut]);
    }

    #[test]
    fn client_never_waits_and_windows_are_ordered() {
        let (tree, grid, intr) = setup();
        let sim = SimConfig {
            compute_ms: 50.0,
            ..SimConfig::default()
        };
        let out = simulate(&tree, &grid, intr, CloudConfig::default(), &sim, &dolly(200, 0.1)).unwrap();
        assert_eq!(out.frames.len(), 200);
        assert!(out.frames.iter().all(|f| f.window.is_some()));
        for w in out.windows.windows(2) {
            assert!(w[1].t_start >= w[0].t_send);
            assert!(w[1].t_arrive >= w[0].t_arrive);
        }
        assert_eq!(out.cloud_ids, out.client_ids);
    }

    #[test]
    fn transcript_round_trip_and_determinism() {
        let (tree, grid, intr) = setup();
        let sim = SimConfig {
            downlink: NetworkModel {
                jitter_ms: 5.0,
                ..NetworkModel::default()
            },
            seed: 7,
            ..SimConfig::default()
        };
        let run = || simulate(&tree, &grid, intr, CloudConfig::default(), &sim, &dolly(100, 0.2)).unwrap();
        let a = run().transcript.encode();
        assert_eq!(a, run().transcript.encode());
        assert_eq!(Transcript::decode(&a).unwrap().encode(), a);
        assert!(Transcript::decode(&a[..a.len() - 1]).is_err());
    }
}
