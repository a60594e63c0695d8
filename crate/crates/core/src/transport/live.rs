//! Length-prefixed messages over a byte stream (TCP in practice).

use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use super::session::{ClientEvent, ClientSession, CloudConfig, CloudSession, WindowReport};
use super::{Message, MsgType};
use crate::camera::{Intrinsics, Pose};
use crate::codec::QuantGrid;
use crate::error::{Error, Result};
use crate::scene::LoDTree;
use crate::NodeId;

/// Cloud side of one connection. Sends CONFIG, then answers the pose stream
/// with cut messages until the peer closes its side.
pub fn serve_one(
    stream: TcpStream,
    tree: &LoDTree,
    grid: &QuantGrid,
    intrinsics: Intrinsics,
    cfg: CloudConfig,
) -> Result<ServeReport> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut cloud = CloudSession::new(tree, grid, intrinsics, cfg);
    let mut report = ServeReport::default();
    let config = cloud.config_message();
    config.write_framed(&mut writer)?;
    writer.flush()?;
    report.bytes_sent += config.encoded_len() as u64;
    while let Some(msg) = Message::read_framed(&mut reader)? {
        cloud.on_pose(&msg)?;
        report.poses += 1;
        while cloud.window_due() {
            let (out, w) = cloud.run_window()?;
            out.write_framed(&mut writer)?;
            report.bytes_sent += out.encoded_len() as u64;
            log::debug!("window {} cut {} added {}", w.window, w.cut_size, w.added);
            report.windows.push(w);
        }
        writer.flush()?;
    }
    report.table_ids = cloud.table().ids().into_iter().collect();
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct ServeReport {
    pub poses: usize,
    pub windows: Vec<WindowReport>,
    /// Message bytes written, headers included.
    pub bytes_sent: u64,
    pub table_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, Default)]
pub struct LiveClientReport {
    pub frames: usize,
    pub windows_applied: usize,
    pub bytes_received: u64,
    pub missing: usize,
    /// Render queue length per frame.
    pub queue_lens: Vec<usize>,
    pub subgraph_ids: Vec<NodeId>,
}

/// Client side: sends one pose per frame at `frame_interval`, applies
/// whatever cuts have arrived before each frame, then closes its side and
/// drains the remaining messages.
pub fn run_client<A: ToSocketAddrs>(addr: A, poses: &[Pose], frame_interval: Duration) -> Result<LiveClientReport> {
    if poses.is_empty() {
        return Err(Error::Usage("no poses to send".into()));
    }
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream.try_clone()?;
    let (tx, rx) = mpsc::channel::<Result<Message>>();
    let pump = thread::spawn(move || loop {
        match Message::read_framed(&mut reader) {
            Ok(Some(m)) => {
                if tx.send(Ok(m)).is_err() {
                    return;
                }
            }
            Ok(None) => return,
            Err(e) => {
                let _ = tx.send(Err(e));
                return;
            }
        }
    });

    let mut client = ClientSession::new();
    let mut report = LiveClientReport::default();
    let apply = |client: &mut ClientSession, msg: Message, report: &mut LiveClientReport| -> Result<()> {
        report.bytes_received += msg.encoded_len() as u64;
        if let ClientEvent::Applied { report: r, .. } = client.on_message(&msg)? {
            report.windows_applied += 1;
            report.missing += r.missing;
        }
        Ok(())
    };

    ClientSession::pose_message(0, &poses[0]).write_framed(&mut writer)?;
    // Block until the first cut: there is nothing to draw before it.
    while client.subgraph().is_none_or(|s| s.last_window().is_none()) {
        let msg = rx
            .recv()
            .map_err(|_| Error::Protocol("connection closed before INIT_CUT".into()))??;
        if msg.kind == MsgType::Pose {
            return Err(Error::Protocol("server sent a POSE".into()));
        }
        apply(&mut client, msg, &mut report)?;
    }
    for (f, pose) in poses.iter().enumerate() {
        if f > 0 {
            thread::sleep(frame_interval);
            ClientSession::pose_message(f as u32, pose).write_framed(&mut writer)?;
        }
        while let Ok(msg) = rx.try_recv() {
            apply(&mut client, msg?, &mut report)?;
        }
        let (queue, _) = client.gather(pose);
        report.queue_lens.push(queue.len());
        report.frames += 1;
    }
    stream.shutdown(Shutdown::Write)?;
    for msg in rx.iter() {
        apply(&mut client, msg?, &mut report)?;
    }
    let _ = pump.join();
    report.subgraph_ids = client.subgraph().map(|s| s.ids().into_iter().collect()).unwrap_or_default();
    Ok(report)
}
