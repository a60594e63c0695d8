use super::{eval_node, interpolation_weight, motion_budget, opens, Cut, CutEntry, ReuseCache, SearchStats};
use crate::camera::Camera;
use crate::scene::LoDTree;
use crate::NodeId;

/// Reference search: evaluates every node of the tree and keeps the ones
/// whose ancestors are all open while they are not. Makes no assumption
/// about how sizes relate between parent and child.
pub fn find_cut_exhaustive(tree: &LoDTree, cam: &Camera, tau: f32, frame: u32) -> (Cut, SearchStats) {
    let tau64 = tau as f64;
    let mut found = Vec::new();
    let mut visited = 0;
    // (node, parent size, every ancestor open)
    let mut stack: Vec<(NodeId, Option<f64>, bool)> = vec![(tree.root(), None, true)];
    while let Some((id, parent_size, open_above)) = stack.pop() {
        let node = tree.node(id);
        let eval = eval_node(node, cam);
        visited += 1;
        let open = opens(node, eval.size, tau64);
        if open_above && !open {
            let t = interpolation_weight(eval.size, parent_size, tau64, node.is_leaf());
            let parent_eval = node.parent.map(|p| eval_node(tree.node(p), cam));
            let budget = motion_budget(&eval, node.is_leaf(), parent_eval.as_ref(), cam, tau64);
            found.push((CutEntry { node: id, t }, budget));
        }
        for &c in node.children.iter().rev() {
            stack.push((c, Some(eval.size), open_above && open));
        }
    }
    found.sort_by_key(|(e, _)| e.node);
    let (entries, budgets) = found.into_iter().unzip();
    let cut = Cut {
        frame,
        tau,
        entries,
        reuse: Some(ReuseCache {
            focal: cam.focal,
            near: cam.near,
            tau,
            budgets,
        }),
    };
    (
        cut,
        SearchStats {
            visited,
            ..SearchStats::default()
        },
    )
}
