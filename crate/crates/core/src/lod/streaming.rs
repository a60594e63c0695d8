use super::{eval_node, interpolation_weight, motion_budget, opens, Budget, Cut, CutEntry, Eval, ReuseCache, SearchStats};
use crate::camera::Camera;
use crate::exec;
use crate::scene::LoDTree;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamingOptions {
    /// Frontier nodes handed to one worker at a time.
    pub block_size: usize,
    /// Record the ids of every evaluated node in the stats.
    pub record_visits: bool,
}

impl Default for StreamingOptions {
    fn default() -> Self {
        StreamingOptions {
            block_size: super::DEFAULT_BLOCK_SIZE,
            record_visits: false,
        }
    }
}

/// Level-synchronous top-down search. Each level's frontier is split into
/// fixed-size blocks evaluated in parallel; only open nodes push their
/// children, so the evaluated set is exactly the cut plus its ancestors.
pub fn find_cut_streaming(tree: &LoDTree, cam: &Camera, tau: f32, frame: u32) -> (Cut, SearchStats) {
    find_cut_streaming_with(tree, cam, tau, frame, &StreamingOptions::default())
}

struct BlockOut {
    next: Vec<(NodeId, Option<Eval>)>,
    found: Vec<(CutEntry, Budget)>,
}

pub fn find_cut_streaming_with(
    tree: &LoDTree,
    cam: &Camera,
    tau: f32,
    frame: u32,
    opts: &StreamingOptions,
) -> (Cut, SearchStats) {
    let tau64 = tau as f64;
    let block = opts.block_size.max(1);
    let mut stats = SearchStats::default();
    let mut ids = opts.record_visits.then(Vec::new);
    let mut found = Vec::new();
    let mut frontier: Vec<(NodeId, Option<Eval>)> = vec![(tree.root(), None)];
    while !frontier.is_empty() {
        stats.visited += frontier.len();
        if let Some(ids) = ids.as_mut() {
            ids.extend(frontier.iter().map(|(id, _)| *id));
        }
        let blocks: Vec<&[(NodeId, Option<Eval>)]> = frontier.chunks(block).collect();
        let outs = exec::map(&blocks, |items| {
            let mut out = BlockOut {
                next: Vec::new(),
                found: Vec::new(),
            };
            for &(id, parent) in items.iter() {
                let node = tree.node(id);
                let eval = eval_node(node, cam);
                if opens(node, eval.size, tau64) {
                    out.next.extend(node.children.iter().map(|&c| (c, Some(eval))));
                } else {
                    let t = interpolation_weight(eval.size, parent.map(|p| p.size), tau64, node.is_leaf());
                    let budget = motion_budget(&eval, node.is_leaf(), parent.as_ref(), cam, tau64);
                    out.found.push((CutEntry { node: id, t }, budget));
                }
            }
            out
        });
        frontier = Vec::new();
        for out in outs {
            frontier.extend(out.next);
            found.extend(out.found);
        }
    }
    found.sort_by_key(|(e, _)| e.node);
    let (entries, budgets) = found.into_iter().unzip();
    stats.visited_ids = ids;
    (
        Cut {
            frame,
            tau,
            entries,
            reuse: Some(ReuseCache {
                focal: cam.focal,
                near: cam.near,
                tau,
                budgets,
            }),
        },
        stats,
    )
}
