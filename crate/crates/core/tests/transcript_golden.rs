//! Golden session transcript. Run with `SPLATSTREAM_BLESS=1` to rewrite the
//! fixture after an intentional wire change.
//!
//! `golden_transcript.ids` lists the subgraph a conforming client holds
//! after replaying every downlink message, one id per line.

use splatstream::harness::{gen_synthetic_scene, generate_path, scene_side, Layout, PathKind, PathSpec, PreparedScene};
use splatstream::transport::{simulate, ClientSession, CloudConfig, Direction, NetworkModel, SimConfig, Transcript};
use splatstream::{Intrinsics, SceneConfig};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn golden_session() -> (Transcript, Vec<u32>) {
    let n = 1500;
    let scene = PreparedScene::build(
        gen_synthetic_scene(5, n, Layout::CityGrid).unwrap(),
        &SceneConfig {
            partition_target_size: 32,
            ..SceneConfig::default()
        },
    )
    .unwrap();
    let (center, _) = scene.bounds();
    let mut spec = PathSpec::for_scene(PathKind::RandomWalk, center, scene_side(n), 48, 30.0);
    spec.seed = 2;
    let path = generate_path(&spec).unwrap();
    let link = NetworkModel {
        bandwidth_mbps: 20.0,
        latency_ms: 15.0,
        jitter_ms: 4.0,
    };
    let sim = SimConfig {
        fps: 30.0,
        uplink: link,
        downlink: link,
        compute_ms: 5.0,
        seed: 11,
    };
    let mut cfg = CloudConfig::default();
    cfg.management.window = 8;
    let out = simulate(&scene.tree, &scene.grid, Intrinsics::from_fov(160, 90, 60.0), cfg, &sim, &path.poses).unwrap();
    assert_eq!(out.cloud_ids, out.client_ids);
    (out.transcript, out.client_ids)
}

#[test]
fn transcript_is_byte_stable_and_replays() {
    let (transcript, ids) = golden_session();
    let bytes = transcript.encode();
    let ids_text: String = ids.iter().map(|id| format!("{id}\n")).collect();
    let bin = format!("{FIXTURES}/golden_transcript.vtrs");
    let txt = format!("{FIXTURES}/golden_transcript.ids");
    if std::env::var_os("SPLATSTREAM_BLESS").is_some() {
        std::fs::write(&bin, &bytes).unwrap();
        std::fs::write(&txt, &ids_text).unwrap();
    }
    let golden = std::fs::read(&bin).expect("missing fixture; run with SPLATSTREAM_BLESS=1");
    assert!(bytes == golden, "transcript differs from the golden fixture");
    assert_eq!(std::fs::read_to_string(&txt).unwrap(), ids_text);

    // A fresh client fed only the recorded downlink ends with the same set.
    let recorded = Transcript::decode(&golden).unwrap();
    let mut client = ClientSession::new();
    for m in recorded.messages(Direction::Downlink).unwrap() {
        client.on_message(&m).unwrap();
    }
    let replayed: Vec<u32> = client.subgraph().unwrap().ids().into_iter().collect();
    assert_eq!(replayed, ids);
    assert_eq!(client.missing_total(), 0);
}
