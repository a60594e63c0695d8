use super::payload::{decode_delta, decode_pose, encode_delta, encode_pose, SessionConfig};
use super::predict::{predict_pose, PoseHistory};
use super::{IndexGuard, Message, MsgType};
use crate::camera::{Camera, Intrinsics, Pose};
use crate::codec::QuantGrid;
use crate::error::{Error, Result};
use crate::lod::{find_cut_streaming, find_cut_temporal, Cut};
use crate::management::{ApplyReport, ClientSubgraph, GatherStats, ManagementConfig, ManagementTable, QueueItem};
use crate::scene::LoDTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Full breadth-first search every window.
    Streaming,
    /// Incremental search seeded by the previous window's cut.
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudConfig {
    pub tau: f32,
    pub management: ManagementConfig,
    /// Frames before a window starts at which its search is launched.
    pub prefetch: u32,
    pub lut_m: u32,
    pub alpha_min: f32,
    pub search: SearchMode,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig {
            tau: 3.0,
            management: ManagementConfig::default(),
            prefetch: 4,
            lut_m: 32,
            alpha_min: 1.0 / 255.0,
            search: SearchMode::Temporal,
        }
    }
}

/// What the cloud did for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub window: u32,
    /// Frame whose pose the cut was searched for.
    pub target_frame: u32,
    /// Latest pose frame known when the search ran.
    pub latest_frame: u32,
    pub predicted: Pose,
    pub cut_size: usize,
    pub visited: usize,
    pub added: usize,
    pub clamped: usize,
    pub message_bytes: usize,
}

/// Cloud endpoint: consumes poses, emits CONFIG and cut messages.
pub struct CloudSession<'a> {
    tree: &'a LoDTree,
    grid: &'a QuantGrid,
    intrinsics: Intrinsics,
    cfg: CloudConfig,
    table: ManagementTable,
    history: PoseHistory,
    prev: Option<Cut>,
    next_window: u32,
    guard: IndexGuard,
}

impl<'a> CloudSession<'a> {
    /// `tree` must be published against `grid` (see [`crate::codec::publish`]).
    pub fn new(tree: &'a LoDTree, grid: &'a QuantGrid, intrinsics: Intrinsics, cfg: CloudConfig) -> Self {
        CloudSession {
            tree,
            grid,
            intrinsics,
            table: ManagementTable::new(cfg.management),
            cfg,
            history: PoseHistory::new(8),
            prev: None,
            next_window: 0,
            guard: IndexGuard::default(),
        }
    }

    pub fn table(&self) -> &ManagementTable {
        &self.table
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            tau: self.cfg.tau,
            management: self.cfg.management,
            lut_m: self.cfg.lut_m,
            alpha_min: self.cfg.alpha_min,
            max_level: self.tree.max_level(),
            intrinsics: self.intrinsics,
            grid: self.grid.clone(),
        }
    }

    pub fn config_message(&self) -> Message {
        Message::new(MsgType::Config, 0, self.session_config().encode())
    }

    pub fn on_pose(&mut self, msg: &Message) -> Result<()> {
        if msg.kind != MsgType::Pose {
            return Err(Error::Protocol(format!("cloud cannot handle {:?}", msg.kind)));
        }
        self.guard.check(msg)?;
        self.history.push(msg.index, decode_pose(&msg.payload)?);
        Ok(())
    }

    /// Frame whose arrival launches the search for `window`.
    pub fn trigger_frame(&self, window: u32) -> u32 {
        if window == 0 {
            return 0;
        }
        (window * self.cfg.management.window).saturating_sub(self.cfg.prefetch).max(1)
    }

    pub fn next_window(&self) -> u32 {
        self.next_window
    }

    /// Whether the next window's search can run with the poses received.
    pub fn window_due(&self) -> bool {
        self.history
            .last()
            .is_some_and(|(f, _)| f >= self.trigger_frame(self.next_window))
    }

    /// Runs the search for the next window and returns its cut message.
    pub fn run_window(&mut self) -> Result<(Message, WindowReport)> {
        let (latest, last_pose) = self
            .history
            .last()
            .ok_or(Error::NotReady(0))?;
        let k = self.next_window;
        let w = self.cfg.management.window;
        let target = if k == 0 { latest } else { (k + 1) * w - 1 };
        let predicted = if target <= latest {
            last_pose
        } else {
            predict_pose(&self.history, (target - latest) as f32).unwrap_or(last_pose)
        };
        let cam = self.intrinsics.at(&predicted);
        let tau = self.cfg.tau;
        let (cut, stats) = match (&self.prev, self.cfg.search) {
            (Some(prev), SearchMode::Temporal) => find_cut_temporal(self.tree, prev, &cam, tau, target)?,
            _ => find_cut_streaming(self.tree, &cam, tau, target),
        };
        let delta = self.table.cloud_update(&cut, self.tree);
        debug_assert_eq!(delta.window, k);
        let (payload, clamped) = encode_delta(&delta, self.grid, self.tree.max_level(), self.prev.as_ref())?;
        let kind = if k == 0 { MsgType::InitCut } else { MsgType::DeltaCut };
        let msg = Message::new(kind, k, payload);
        let report = WindowReport {
            window: k,
            target_frame: target,
            latest_frame: latest,
            predicted,
            cut_size: cut.len(),
            visited: stats.visited,
            added: delta.added.len(),
            clamped,
            message_bytes: msg.encoded_len(),
        };
        self.prev = Some(cut);
        self.next_window += 1;
        Ok((msg, report))
    }
}

/// What a client did with one incoming message.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientEvent {
    Configured,
    Applied { window: u32, report: ApplyReport },
}

/// Client endpoint: applies cloud messages and gathers render queues.
#[derive(Debug, Clone, Default)]
pub struct ClientSession {
    config: Option<SessionConfig>,
    sub: Option<ClientSubgraph>,
    guard: IndexGuard,
    missing_total: usize,
}

impl ClientSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn config(&self) -> Option<&SessionConfig> {
        self.config.as_ref()
    }

    pub fn subgraph(&self) -> Option<&ClientSubgraph> {
        self.sub.as_ref()
    }

    pub fn missing_total(&self) -> usize {
        self.missing_total
    }

    pub fn pose_message(frame: u32, pose: &Pose) -> Message {
        Message::new(MsgType::Pose, frame, encode_pose(pose))
    }

    pub fn on_message(&mut self, msg: &Message) -> Result<ClientEvent> {
        self.guard.check(msg)?;
        match msg.kind {
            MsgType::Config => {
                if self.config.is_some() {
                    return Err(Error::Protocol("second CONFIG in one session".into()));
                }
                let cfg = SessionConfig::decode(&msg.payload)?;
                self.sub = Some(ClientSubgraph::new(cfg.management));
                self.config = Some(cfg);
                Ok(ClientEvent::Configured)
            }
            MsgType::InitCut | MsgType::DeltaCut => {
                let (Some(cfg), Some(sub)) = (&self.config, &mut self.sub) else {
                    return Err(Error::Protocol("cut before CONFIG".into()));
                };
                if (msg.kind == MsgType::InitCut) != sub.last_window().is_none() {
                    return Err(Error::Protocol("INIT_CUT must open the cut sequence".into()));
                }
                let delta = decode_delta(msg.index, &msg.payload, &cfg.grid, sub.current_cut())?;
                let report = sub.client_apply(delta)?;
                self.missing_total += report.missing;
                Ok(ClientEvent::Applied {
                    window: msg.index,
                    report,
                })
            }
            MsgType::Pose => Err(Error::Protocol("client received a POSE".into())),
        }
    }

    pub fn camera(&self, pose: &Pose) -> Option<Camera> {
        self.config.as_ref().map(|c| c.intrinsics.at(pose))
    }

    /// Render queue for the client's current pose.
    pub fn gather(&self, pose: &Pose) -> (Vec<QueueItem>, GatherStats) {
        match (&self.config, &self.sub) {
            (Some(cfg), Some(sub)) => sub.gather_render_queue(&cfg.intrinsics.at(pose), cfg.tau),
            _ => (Vec::new(), GatherStats::default()),
        }
    }
}
