//! Oracle-equivalence suite run by the `verify` subcommand.

use std::collections::BTreeSet;

use crate::camera::{Intrinsics, Pose};
use crate::codec::QuantGrid;
use crate::lod::{
    find_cut_exhaustive, find_cut_streaming_with, find_cut_temporal, validate_cut, Cut, StreamingOptions,
};
use crate::management::{ClientSubgraph, ManagementConfig, ManagementTable};
use crate::scene::LoDTree;
use crate::transport::{decode_delta, encode_delta};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, failures: Vec<String>, total: usize) {
        let passed = failures.is_empty();
        let detail = if passed {
            format!("{total} cases")
        } else {
            format!("{} of {total} failed; first: {}", failures.len(), failures[0])
        };
        self.checks.push(Check { name, passed, detail });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub tau: f32,
    pub management: ManagementConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            tau: 3.0,
            management: ManagementConfig::default(),
        }
    }
}

fn ancestors_closure(tree: &LoDTree, cut: &Cut) -> BTreeSet<NodeId> {
    let mut set = BTreeSet::new();
    for id in cut.ids() {
        set.insert(id);
        set.extend(tree.ancestors(id));
    }
    set
}

/// Checks every search against the exhaustive oracle along `poses`, the
/// visited-set rule, and cloud/client mirroring through the wire codec.
pub fn verify(tree: &LoDTree, grid: &QuantGrid, intrinsics: Intrinsics, poses: &[Pose], cfg: &VerifyConfig) -> VerifyReport {
    let mut report = VerifyReport::default();
    let tree_check = tree.check_invariants();
    report.push("tree invariants", tree_check.err().into_iter().collect(), 1);

    let opts = StreamingOptions {
        record_visits: true,
        ..StreamingOptions::default()
    };
    let mut streaming_fail = Vec::new();
    let mut temporal_fail = Vec::new();
    let mut visit_fail = Vec::new();
    let mut valid_fail = Vec::new();
    let mut mirror_fail = Vec::new();
    let mut prev: Option<Cut> = None;
    let mut table = ManagementTable::new(cfg.management);
    let mut client = ClientSubgraph::new(cfg.management);
    for (f, pose) in poses.iter().enumerate() {
        let frame = f as u32;
        let cam = intrinsics.at(pose);
        let (oracle, _) = find_cut_exhaustive(tree, &cam, cfg.tau, frame);
        if let Err(e) = validate_cut(tree, &oracle, &cam) {
            valid_fail.push(format!("frame {f}: {e}"));
        }
        let (streamed, stats) = find_cut_streaming_with(tree, &cam, cfg.tau, frame, &opts);
        if streamed != oracle {
            streaming_fail.push(format!("frame {f}: {} vs {} entries", streamed.len(), oracle.len()));
        }
        let visited: BTreeSet<NodeId> = stats.visited_ids.unwrap_or_default().into_iter().collect();
        if visited != ancestors_closure(tree, &oracle) || stats.visited != visited.len() {
            visit_fail.push(format!("frame {f}: {} visited", stats.visited));
        }
        let temporal = match &prev {
            Some(p) => find_cut_temporal(tree, p, &cam, cfg.tau, frame).map(|(c, _)| c),
            None => Ok(streamed.clone()),
        };
        match temporal {
            Ok(c) if c == oracle => prev = Some(c),
            Ok(c) => {
                temporal_fail.push(format!("frame {f}: {} vs {} entries", c.len(), oracle.len()));
                prev = Some(streamed);
            }
            Err(e) => {
                temporal_fail.push(format!("frame {f}: {e}"));
                prev = Some(streamed);
            }
        }

        let base = client.current_cut().cloned();
        let delta = table.cloud_update(&oracle, tree);
        let wire = encode_delta(&delta, grid, tree.max_level(), base.as_ref())
            .and_then(|(bytes, _)| decode_delta(delta.window, &bytes, grid, base.as_ref()));
        match wire.and_then(|d| client.client_apply(d)) {
            Ok(r) if r.missing == 0 && table.ids() == client.ids() => {}
            Ok(r) => mirror_fail.push(format!("window {}: {} missing", delta.window, r.missing)),
            Err(e) => mirror_fail.push(format!("window {}: {e}", delta.window)),
        }
        if oracle.ids().any(|id| !client.contains(id)) {
            mirror_fail.push(format!("window {}: current member evicted", delta.window));
        }
    }
    let n = poses.len();
    report.push("oracle cuts valid", valid_fail, n);
    report.push("streaming = exhaustive", streaming_fail, n);
    report.push("temporal = exhaustive", temporal_fail, n);
    report.push("visited = cut + ancestors", visit_fail, n);
    report.push("cloud/client mirror", mirror_fail, n);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{gen_synthetic_scene, generate_path, scene_side, Layout, PathKind, PathSpec, PreparedScene};
    use crate::scene::SceneConfig;

    #[test]
    fn small_city_verifies() {
        let scene = PreparedScene::build(
            gen_synthetic_scene(9, 2000, Layout::CityGrid).unwrap(),
            &SceneConfig {
                partition_target_size: 32,
                ..SceneConfig::default()
            },
        )
        .unwrap();
        let (center, _) = scene.bounds();
        let path = generate_path(&PathSpec::for_scene(PathKind::RandomWalk, center, scene_side(2000), 40, 60.0)).unwrap();
        let report = verify(&scene.tree, &scene.grid, Intrinsics::from_fov(320, 180, 60.0), &path.poses, &VerifyConfig::default());
        assert!(report.all_passed(), "{:#?}", report.checks);
        assert_eq!(report.checks.len(), 6);
    }
}
