use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use splatstream::harness::{gen_synthetic_scene, generate_path, scene_side, Layout, PathKind, PathSpec, PreparedScene};
use splatstream::transport::{run_client, serve_one, ClientSession, CloudConfig, Message, MsgType};
use splatstream::{Intrinsics, SceneConfig};

fn small_scene() -> PreparedScene {
    PreparedScene::build(
        gen_synthetic_scene(3, 1200, Layout::CityGrid).unwrap(),
        &SceneConfig {
            partition_target_size: 32,
            ..SceneConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn loopback_session_mirrors_the_table() {
    let scene = small_scene();
    let (center, _) = scene.bounds();
    let path = generate_path(&PathSpec::for_scene(PathKind::Orbit, center, scene_side(1200), 40, 60.0)).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mut cfg = CloudConfig::default();
    cfg.management.window = 8;
    let intrinsics = Intrinsics::from_fov(160, 90, 60.0);

    let (served, client) = std::thread::scope(|s| {
        let server = s.spawn(|| {
            let (stream, _) = listener.accept().unwrap();
            serve_one(stream, &scene.tree, &scene.grid, intrinsics, cfg).unwrap()
        });
        let client = run_client(addr, &path.poses, Duration::from_millis(2)).unwrap();
        (server.join().unwrap(), client)
    });

    assert_eq!(served.poses, 40);
    assert_eq!(client.frames, 40);
    assert_eq!(client.windows_applied, served.windows.len());
    assert_eq!(client.bytes_received, served.bytes_sent);
    assert_eq!(client.missing, 0);
    assert_eq!(client.subgraph_ids, served.table_ids);
    assert!(client.queue_lens.iter().all(|&n| n > 0));
}

#[test]
fn server_rejects_a_non_pose_message() {
    let scene = small_scene();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let result = std::thread::scope(|s| {
        let server = s.spawn(|| {
            let (stream, _) = listener.accept().unwrap();
            serve_one(stream, &scene.tree, &scene.grid, Intrinsics::from_fov(64, 48, 60.0), CloudConfig::default())
        });
        let mut peer = TcpStream::connect(addr).unwrap();
        let config = Message::read_framed(&mut peer).unwrap().unwrap();
        assert_eq!(config.kind, MsgType::Config);
        let mut client = ClientSession::new();
        client.on_message(&config).unwrap();
        // A cut travelling the wrong way.
        Message::new(MsgType::InitCut, 0, vec![0; 4]).write_framed(&mut peer).unwrap();
        peer.flush().unwrap();
        server.join().unwrap()
    });
    assert!(result.is_err());
}
