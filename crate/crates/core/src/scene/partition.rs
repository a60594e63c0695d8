use super::tree::{LoDTree, PartitionInfo, SceneConfig};
use crate::NodeId;

/// Splits the tree into connected subtrees of roughly
/// `cfg.partition_target_size` nodes.
///
/// Each tier pass walks the unassigned nodes bottom-up and closes a node as a
/// partition root once its unassigned subtree reaches the target, provided no
/// node below it was closed in the same pass. `partition_levels - 1` passes
/// run; what remains (always containing the root) is the top-tree,
/// partition 0. Other partitions are numbered by the level order of their
/// roots.
pub fn partition_subtrees(mut tree: LoDTree, cfg: &SceneConfig) -> LoDTree {
    let n = tree.len();
    let target = cfg.partition_target_size.max(1);
    // Partition root id per node, u32::MAX while unassigned.
    let mut owner = vec![u32::MAX; n];

    for _pass in 1..cfg.partition_levels {
        let mut count = vec![0usize; n];
        let mut blocked = vec![false; n];
        let mut closed = vec![false; n];
        for i in (0..n).rev() {
            let node = &tree.nodes[i];
            let mut c = usize::from(owner[i] == u32::MAX);
            let mut b = false;
            for &ch in &node.children {
                c += count[ch as usize];
                b |= blocked[ch as usize] || closed[ch as usize];
            }
            if owner[i] == u32::MAX && !b && c >= target {
                closed[i] = true;
                count[i] = 0;
            } else {
                count[i] = c;
            }
            blocked[i] = b;
        }
        // Assign each closed node's open component, top-down so the outermost
        // closed ancestor claims nodes first (no nesting within one pass).
        for i in 0..n {
            if closed[i] {
                let mut stack = vec![i as NodeId];
                while let Some(id) = stack.pop() {
                    if owner[id as usize] != u32::MAX {
                        continue;
                    }
                    owner[id as usize] = i as u32;
                    stack.extend(tree.nodes[id as usize].children.iter().copied());
                }
            }
        }
    }

    // Number partitions: the one containing the root is 0, the rest by root id.
    let root_owner = owner[0];
    let mut roots: Vec<NodeId> = Vec::new();
    let mut part_of_root = std::collections::HashMap::new();
    part_of_root.insert(root_owner, 0u32);
    roots.push(0);
    for (i, &o) in owner.iter().enumerate() {
        if o == i as u32 && o != root_owner {
            part_of_root.insert(o, roots.len() as u32);
            roots.push(i as NodeId);
        }
    }
    for (i, node) in tree.nodes.iter_mut().enumerate() {
        node.partition = part_of_root[&owner[i]];
    }
    let mut sizes = vec![0usize; roots.len()];
    for node in &tree.nodes {
        sizes[node.partition as usize] += 1;
    }
    tree.partitions = roots
        .iter()
        .zip(&sizes)
        .map(|(&root, &size)| PartitionInfo {
            root,
            parent: tree.nodes[root as usize]
                .parent
                .map(|p| tree.nodes[p as usize].partition),
            size,
        })
        .collect();
    tree
}
