//! Mirrored residency bookkeeping.
//!
//! The cloud keeps a [`ManagementTable`] of the nodes the client holds and
//! the client keeps a [`ClientSubgraph`] with the node records themselves.
//! Both sides run the same update rule once per window, so under in-order
//! delivery their id sets stay equal without any acknowledgement traffic.

use std::collections::{BTreeMap, BTreeSet};

use crate::camera::Camera;
use crate::codec::NodeRecord;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::lod::{interpolation_weight, projected_size_at, Cut};
use crate::render::lerp_gaussian;
use crate::scene::LoDTree;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManagementConfig {
    /// Frames per window; every update ages entries by this much.
    pub window: u32,
    /// Entries whose reuse window exceeds this many frames are evicted.
    pub reuse_threshold: u32,
    /// Keep the parents of cut members resident for interpolation.
    pub ship_parents: bool,
}

impl Default for ManagementConfig {
    fn default() -> Self {
        ManagementConfig {
            window: 32,
            reuse_threshold: 128,
            ship_parents: true,
        }
    }
}

/// Result of one cloud-side update.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCut {
    pub window: u32,
    /// Records the client does not hold yet, sorted by id.
    pub added: Vec<NodeRecord>,
    /// After a wire round trip only membership survives; weights read 1.
    pub cut: Cut,
}

fn required_set(cut: &Cut, parent_of: impl Fn(NodeId) -> Option<NodeId>, ship_parents: bool) -> BTreeSet<NodeId> {
    let mut req: BTreeSet<NodeId> = cut.ids().collect();
    if ship_parents {
        for id in cut.ids() {
            if let Some(p) = parent_of(id) {
                req.insert(p);
            }
        }
    }
    req
}

/// Ages every entry by `window`, resets or inserts the required ones and
/// evicts entries past the threshold. Returns the newly inserted ids.
fn age_and_refresh(
    entries: &mut BTreeMap<NodeId, u32>,
    required: &BTreeSet<NodeId>,
    cfg: &ManagementConfig,
) -> Vec<NodeId> {
    for w in entries.values_mut() {
        *w = w.saturating_add(cfg.window);
    }
    let mut inserted = Vec::new();
    for &id in required {
        if entries.insert(id, 0).is_none() {
            inserted.push(id);
        }
    }
    entries.retain(|_, w| *w <= cfg.reuse_threshold);
    inserted
}

/// Cloud view of the client's residency.
#[derive(Debug, Clone)]
pub struct ManagementTable {
    cfg: ManagementConfig,
    entries: BTreeMap<NodeId, u32>,
    next_window: u32,
}

impl ManagementTable {
    pub fn new(cfg: ManagementConfig) -> Self {
        ManagementTable {
            cfg,
            entries: BTreeMap::new(),
            next_window: 0,
        }
    }

    pub fn config(&self) -> &ManagementConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.entries.keys().copied().collect()
    }

    pub fn reuse_window(&self, id: NodeId) -> Option<u32> {
        self.entries.get(&id).copied()
    }

    /// Advances one window for `cut` and returns the delta to ship.
    pub fn cloud_update(&mut self, cut: &Cut, tree: &LoDTree) -> DeltaCut {
        let required = required_set(cut, |id| tree.node(id).parent, self.cfg.ship_parents);
        let inserted = age_and_refresh(&mut self.entries, &required, &self.cfg);
        let window = self.next_window;
        self.next_window += 1;
        DeltaCut {
            window,
            added: inserted
                .into_iter()
                .map(|id| NodeRecord::from_node(tree.node(id)))
                .collect(),
            cut: cut.clone().without_reuse_cache(),
        }
    }
}

#[derive(Debug, Clone)]
struct ClientEntry {
    record: NodeRecord,
}

/// Outcome of applying one delta on the client.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApplyReport {
    pub inserted: usize,
    pub evicted: usize,
    /// Cut members that were never delivered.
    pub missing: usize,
}

/// Client-side node store.
#[derive(Debug, Clone)]
pub struct ClientSubgraph {
    cfg: ManagementConfig,
    records: BTreeMap<NodeId, ClientEntry>,
    reuse: BTreeMap<NodeId, u32>,
    last_window: Option<u32>,
    cut: Option<Cut>,
}

/// One primitive ready for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueItem {
    pub node: NodeId,
    pub t: f32,
    pub gaussian: Gaussian,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GatherStats {
    /// Entries that wanted finer detail whose children are not resident.
    pub coarse_fallbacks: usize,
    /// Current-cut members not resident.
    pub missing: usize,
}

impl ClientSubgraph {
    pub fn new(cfg: ManagementConfig) -> Self {
        ClientSubgraph {
            cfg,
            records: BTreeMap::new(),
            reuse: BTreeMap::new(),
            last_window: None,
            cut: None,
        }
    }

    pub fn config(&self) -> &ManagementConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.records.keys().copied().collect()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.records.contains_key(&id)
    }

    pub fn record(&self, id: NodeId) -> Option<&NodeRecord> {
        self.records.get(&id).map(|e| &e.record)
    }

    pub fn current_cut(&self) -> Option<&Cut> {
        self.cut.as_ref()
    }

    pub fn last_window(&self) -> Option<u32> {
        self.last_window
    }

    /// Applies a delta. Window indices must strictly increase; a repeated or
    /// older delta is rejected without touching the store.
    pub fn client_apply(&mut self, delta: DeltaCut) -> Result<ApplyReport> {
        if let Some(last) = self.last_window {
            if delta.window <= last {
                return Err(Error::Protocol(format!(
                    "window {} arrived after window {last}",
                    delta.window
                )));
            }
        }
        self.last_window = Some(delta.window);
        let mut report = ApplyReport::default();
        for rec in delta.added {
            let id = rec.id;
            if self.records.insert(id, ClientEntry { record: rec }).is_none() {
                report.inserted += 1;
            }
        }
        let records = &self.records;
        let required = required_set(
            &delta.cut,
            |id| records.get(&id).and_then(|e| e.record.parent),
            self.cfg.ship_parents,
        );
        report.missing = delta.cut.ids().filter(|id| !self.records.contains_key(id)).count();
        for id in self.records.keys() {
            self.reuse.entry(*id).or_insert(0);
        }
        let before = self.reuse.len();
        age_and_refresh(&mut self.reuse, &required, &self.cfg);
        let reuse = &self.reuse;
        self.records.retain(|id, _| reuse.contains_key(id));
        self.reuse.retain(|id, _| self.records.contains_key(id));
        report.evicted = before.saturating_sub(self.reuse.len());
        if report.missing > 0 {
            log::warn!("window {}: {} cut members missing", delta.window, report.missing);
        }
        self.cut = Some(delta.cut);
        Ok(report)
    }

    fn size(&self, rec: &NodeRecord, cam: &Camera) -> f64 {
        projected_size_at(&rec.gaussian.position, rec.extent, cam)
    }

    fn children_resident(&self, rec: &NodeRecord) -> bool {
        rec.children.iter().all(|c| self.records.contains_key(c))
    }

    /// Builds the render queue for the client's current camera.
    ///
    /// Starting from the latest received cut, each member is refined against
    /// `cam` within the resident subgraph: it is replaced by its children
    /// while it is too large and they are all resident, and by its parent
    /// while the parent is resident and below `tau`. Weights use the
    /// resident parent's record; entries without one get weight 1.
    pub fn gather_render_queue(&self, cam: &Camera, tau: f32) -> (Vec<QueueItem>, GatherStats) {
        let mut stats = GatherStats::default();
        let Some(cut) = &self.cut else {
            return (Vec::new(), stats);
        };
        let tau64 = tau as f64;
        let mut chosen: BTreeSet<NodeId> = BTreeSet::new();
        let mut stack = Vec::new();
        for id in cut.ids() {
            let Some(mut rec) = self.record(id) else {
                stats.missing += 1;
                continue;
            };
            // Ascend while the resident parent is below tau.
            while let Some(parent) = rec.parent.and_then(|p| self.record(p)) {
                if self.size(parent, cam) < tau64 {
                    rec = parent;
                } else {
                    break;
                }
            }
            stack.push(rec.id);
        }
        while let Some(id) = stack.pop() {
            if chosen.contains(&id) {
                continue;
            }
            let rec = self.record(id).expect("resident");
            if !rec.is_leaf() && self.size(rec, cam) >= tau64 {
                if self.children_resident(rec) {
                    stack.extend(rec.children.iter().copied());
                    continue;
                }
                stats.coarse_fallbacks += 1;
            }
            chosen.insert(id);
        }
        // Drop entries covered by a chosen ancestor.
        let queue = chosen
            .iter()
            .filter(|&&id| {
                let mut p = self.record(id).and_then(|r| r.parent);
                while let Some(pid) = p {
                    if chosen.contains(&pid) {
                        return false;
                    }
                    p = self.record(pid).and_then(|r| r.parent);
                }
                true
            })
            .map(|&id| {
                let rec = self.record(id).unwrap();
                match rec.parent.and_then(|p| self.record(p)) {
                    Some(parent) => {
                        let t = interpolation_weight(
                            self.size(rec, cam),
                            Some(self.size(parent, cam)),
                            tau64,
                            rec.is_leaf(),
                        );
                        QueueItem {
                            node: id,
                            t,
                            gaussian: lerp_gaussian(&parent.gaussian, &rec.gaussian, t),
                        }
                    }
                    None => QueueItem {
                        node: id,
                        t: 1.0,
                        gaussian: rec.gaussian.clone(),
                    },
                }
            })
            .collect();
        (queue, stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lod::{find_cut_exhaustive, CutEntry};
    use rand::{Rng, SeedableRng};

    fn chain_tree() -> LoDTree {
        // Root 0 with children 1..=4, each with two leaf children.
        let g = Gaussian::with_color(
            nalgebra::Vector3::zeros(),
            nalgebra::UnitQuaternion::identity(),
            nalgebra::Vector3::repeat(0.01),
            0.5,
            [0.5; 3],
        );
        let mut parents = vec![None, Some(0), Some(0), Some(0), Some(0)];
        for p in 1..=4 {
            parents.push(Some(p));
            parents.push(Some(p));
        }
        LoDTree::from_hierarchy(vec![g; parents.len()], &parents, None).unwrap().0
    }

    fn cut_of(ids: &[NodeId]) -> Cut {
        Cut::new(0, 3.0, ids.iter().map(|&node| CutEntry { node, t: 1.0 }).collect())
    }

    fn added_ids(d: &DeltaCut) -> Vec<NodeId> {
        d.added.iter().map(|r| r.id).collect()
    }

    #[test]
    fn cold_start_then_delta() {
        let tree = chain_tree();
        let cfg = ManagementConfig {
            window: 1,
            reuse_threshold: 128,
            ship_parents: false,
        };
        let mut table = ManagementTable::new(cfg);
        let d = table.cloud_update(&cut_of(&[1, 2, 3]), &tree);
        assert_eq!(added_ids(&d), vec![1, 2, 3]);
        assert!([1, 2, 3].iter().all(|&i| table.reuse_window(i) == Some(0)));
        let d = table.cloud_update(&cut_of(&[2, 3, 4]), &tree);
        assert_eq!(added_ids(&d), vec![4]);
        assert_eq!(table.reuse_window(1), Some(1));
        assert_eq!(table.reuse_window(4), Some(0));
        let d = table.cloud_update(&cut_of(&[2, 3, 4]), &tree);
        assert!(d.added.is_empty());
    }

    #[test]
    fn eviction_after_threshold() {
        let tree = chain_tree();
        let cfg = ManagementConfig {
            window: 1,
            reuse_threshold: 2,
            ship_parents: false,
        };
        let mut table = ManagementTable::new(cfg);
        let mut client = ClientSubgraph::new(cfg);
        let cuts = [vec![1, 2], vec![2], vec![2], vec![2]];
        for (k, ids) in cuts.iter().enumerate() {
            let d = table.cloud_update(&cut_of(ids), &tree);
            client.client_apply(d).unwrap();
            let resident = k < 3;
            assert_eq!(table.ids().contains(&1), resident, "window {k}");
            assert_eq!(client.ids(), table.ids());
        }
    }

    #[test]
    fn parents_ride_along() {
        let tree = chain_tree();
        let mut table = ManagementTable::new(ManagementConfig::default());
        let d = table.cloud_update(&cut_of(&[5, 6, 2]), &tree);
        assert_eq!(added_ids(&d), vec![0, 1, 2, 5, 6]);
    }

    #[test]
    fn stale_windows_are_rejected() {
        let tree = chain_tree();
        let mut table = ManagementTable::new(ManagementConfig::default());
        let mut client = ClientSubgraph::new(ManagementConfig::default());
        let d0 = table.cloud_update(&cut_of(&[1]), &tree);
        client.client_apply(d0.clone()).unwrap();
        assert!(client.client_apply(d0).is_err());
        assert_eq!(client.ids(), table.ids());
    }

    #[test]
    fn undelivered_members_are_counted() {
        let mut client = ClientSubgraph::new(ManagementConfig::default());
        let report = client
            .client_apply(DeltaCut {
                window: 0,
                added: Vec::new(),
                cut: cut_of(&[3]),
            })
            .unwrap();
        assert_eq!(report.missing, 1);
        let cam = crate::lod::fixtures::camera_at(10.0);
        let (queue, stats) = client.gather_render_queue(&cam, 3.0);
        assert!(queue.is_empty());
        assert_eq!(stats.missing, 1);
    }

    #[test]
    fn empty_subgraph_gives_empty_queue() {
        let client = ClientSubgraph::new(ManagementConfig::default());
        let cam = crate::lod::fixtures::camera_at(10.0);
        assert!(client.gather_render_queue(&cam, 3.0).0.is_empty());
    }

    #[test]
    fn gather_at_search_pose_reproduces_the_oracle() {
        let (tree, _) = crate::lod::fixtures::five_node_tree();
        let cam = crate::lod::fixtures::camera_at(10.0);
        for tau in [0.5, 3.0, 5.0, 10.0] {
            let mut table = ManagementTable::new(ManagementConfig::default());
            let mut client = ClientSubgraph::new(ManagementConfig::default());
            let (cut, _) = find_cut_exhaustive(&tree, &cam, tau, 0);
            client.client_apply(table.cloud_update(&cut, &tree)).unwrap();
            let (queue, _) = client.gather_render_queue(&cam, tau);
            let got: Vec<(NodeId, f32)> = queue.iter().map(|q| (q.node, q.t)).collect();
            let want: Vec<(NodeId, f32)> = cut.entries.iter().map(|e| (e.node, e.t)).collect();
            assert_eq!(got, want, "tau {tau}");
        }
    }

    #[test]
    fn random_lock_step_keeps_mirrors_equal() {
        let tree = chain_tree();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cfg = ManagementConfig {
            window: 4,
            reuse_threshold: 12,
            ship_parents: true,
        };
        let mut table = ManagementTable::new(cfg);
        let mut client = ClientSubgraph::new(cfg);
        for _ in 0..200 {
            let ids: Vec<NodeId> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0..13)).collect();
            let cut = cut_of(&ids);
            let d = table.cloud_update(&cut, &tree);
            client.client_apply(d).unwrap();
            assert_eq!(client.ids(), table.ids());
            assert!(cut.ids().all(|id| table.reuse_window(id) == Some(0)));
        }
    }
}
