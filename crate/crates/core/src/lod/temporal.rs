use std::collections::{BTreeMap, HashMap, HashSet};

use super::{
    check_known, eval_node, interpolation_weight, motion_budget, opens, Budget, Cut, CutEntry, Eval, ReuseCache,
    SearchStats,
};
use crate::camera::Camera;
use crate::error::Result;
use crate::exec;
use crate::scene::LoDTree;
use crate::NodeId;

#[derive(Clone, Copy)]
enum Task {
    /// Re-check entry `k` of the previous cut.
    Check(usize),
    /// Continue an ascent from `node`, already known to be below tau.
    Ascend(NodeId, Eval),
}

#[derive(Default)]
struct PartOut {
    found: Vec<(NodeId, Eval, Option<Eval>)>,
    kept: Vec<(NodeId, Budget)>,
    escalate: Vec<(u32, NodeId, Eval)>,
    visited: usize,
    reused: usize,
    retested: usize,
    crossings: usize,
}

struct Ctx<'a> {
    tree: &'a LoDTree,
    cam: &'a Camera,
    tau: f64,
    budgets: Option<&'a [Budget]>,
    prev: &'a Cut,
}

struct Local<'a, 'b> {
    ctx: &'b Ctx<'a>,
    part: u32,
    memo: HashMap<NodeId, Eval>,
    ascended: HashSet<NodeId>,
    out: PartOut,
}

impl Local<'_, '_> {
    fn eval(&mut self, id: NodeId) -> Eval {
        if let Some(e) = self.memo.get(&id) {
            return *e;
        }
        let e = eval_node(self.ctx.tree.node(id), self.ctx.cam);
        self.out.visited += 1;
        self.memo.insert(id, e);
        e
    }

    fn check(&mut self, k: usize) {
        let id = self.ctx.prev.entries[k].node;
        if let Some(b) = self.ctx.budgets.map(|b| b[k]) {
            if b.covers(self.ctx.cam) {
                self.out.kept.push((id, b));
                self.out.reused += 1;
                return;
            }
        }
        self.out.retested += 1;
        let tree = self.ctx.tree;
        let node = tree.node(id);
        let e = self.eval(id);
        if opens(node, e.size, self.ctx.tau) {
            self.descend(id, e);
            return;
        }
        match node.parent {
            None => self.out.found.push((id, e, None)),
            Some(p) => {
                let ep = self.eval(p);
                if ep.size >= self.ctx.tau {
                    self.out.found.push((id, e, Some(ep)));
                } else {
                    self.ascend(p, ep);
                }
            }
        }
    }

    fn descend(&mut self, id: NodeId, e: Eval) {
        let tree = self.ctx.tree;
        let mut stack: Vec<(NodeId, Eval)> = vec![(id, e)];
        while let Some((pid, pe)) = stack.pop() {
            for &c in &tree.node(pid).children {
                let child = tree.node(c);
                if child.partition != self.part {
                    self.out.crossings += 1;
                }
                let ce = self.eval(c);
                if opens(child, ce.size, self.ctx.tau) {
                    stack.push((c, ce));
                } else {
                    self.out.found.push((c, ce, Some(pe)));
                }
            }
        }
    }

    /// `a` is below tau; climb until an open parent is found.
    fn ascend(&mut self, mut a: NodeId, mut ea: Eval) {
        let tree = self.ctx.tree;
        loop {
            if !self.ascended.insert(a) {
                return;
            }
            let Some(q) = tree.node(a).parent else {
                self.out.found.push((a, ea, None));
                return;
            };
            let qpart = tree.node(q).partition;
            if qpart != self.part {
                self.out.crossings += 1;
                self.out.escalate.push((qpart, a, ea));
                return;
            }
            let eq = self.eval(q);
            if eq.size >= self.ctx.tau {
                self.out.found.push((a, ea, Some(eq)));
                return;
            }
            a = q;
            ea = eq;
        }
    }
}

/// Incremental search seeded by the previous frame's cut.
///
/// Entries are grouped by partition and each group is processed
/// independently. An entry whose motion budget still covers the camera is
/// kept without evaluation; otherwise it is re-tested and the search moves
/// down (node now too large) or up (parent now too small) locally. Ascents
/// that leave a partition continue in the parent partition in a following
/// round. Cuts without motion budgets, such as ones decoded from the wire,
/// have every entry re-tested.
pub fn find_cut_temporal(tree: &LoDTree, prev: &Cut, cam: &Camera, tau: f32, frame: u32) -> Result<(Cut, SearchStats)> {
    check_known(tree, prev)?;
    let budgets = prev
        .reuse
        .as_ref()
        .filter(|r| r.focal == cam.focal && r.near == cam.near && r.tau == tau && r.budgets.len() == prev.len())
        .map(|r| r.budgets.as_slice());
    let ctx = Ctx {
        tree,
        cam,
        tau: tau as f64,
        budgets,
        prev,
    };
    let mut groups: BTreeMap<u32, Vec<Task>> = BTreeMap::new();
    for (k, e) in prev.entries.iter().enumerate() {
        groups
            .entry(tree.node(e.node).partition)
            .or_default()
            .push(Task::Check(k));
    }

    let mut stats = SearchStats::default();
    let mut found: BTreeMap<NodeId, (Eval, Option<Eval>)> = BTreeMap::new();
    let mut kept: BTreeMap<NodeId, Budget> = BTreeMap::new();
    while !groups.is_empty() {
        let work: Vec<(u32, Vec<Task>)> = std::mem::take(&mut groups).into_iter().collect();
        let outs = exec::map(&work, |(part, tasks)| {
            let mut local = Local {
                ctx: &ctx,
                part: *part,
                memo: HashMap::new(),
                ascended: HashSet::new(),
                out: PartOut::default(),
            };
            for task in tasks {
                match *task {
                    Task::Check(k) => local.check(k),
                    Task::Ascend(a, ea) => local.ascend(a, ea),
                }
            }
            local.out
        });
        for out in outs {
            stats.visited += out.visited;
            stats.reused += out.reused;
            stats.retested += out.retested;
            stats.boundary_crossings += out.crossings;
            for (id, e, p) in out.found {
                found.entry(id).or_insert((e, p));
            }
            kept.extend(out.kept);
            for (part, a, ea) in out.escalate {
                groups.entry(part).or_default().push(Task::Ascend(a, ea));
            }
        }
    }

    let tau64 = tau as f64;
    let mut merged: Vec<(CutEntry, Budget)> = Vec::with_capacity(found.len() + kept.len());
    for (id, (e, p)) in found {
        let leaf = tree.node(id).is_leaf();
        let t = interpolation_weight(e.size, p.map(|p| p.size), tau64, leaf);
        merged.push((CutEntry { node: id, t }, motion_budget(&e, leaf, p.as_ref(), cam, tau64)));
    }
    for (id, b) in kept {
        let t = super::entry_weight(tree, id, cam, tau64);
        merged.push((CutEntry { node: id, t }, b));
    }
    merged.sort_by_key(|(e, _)| e.node);
    merged.dedup_by_key(|(e, _)| e.node);
    let (entries, budgets) = merged.into_iter().unzip();
    Ok((
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
    ))
}
