//! Level-of-detail cut search.
//!
//! A node belongs to the cut when every strict ancestor is *open*
//! (projected size ≥ τ and not a leaf) while the node itself is not open.
//! Projected size is `focal · extent / max(d, near)` with `d` the distance
//! from the camera to the node center, and +∞ when the camera lies inside the
//! node's bounding sphere. Because child spheres nest inside their parent's
//! sphere this size never grows from parent to child, which the incremental
//! search below relies on.

mod exhaustive;
mod streaming;
mod temporal;

use std::collections::HashSet;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::scene::{distance, LoDNode, LoDTree};
use crate::NodeId;

pub use exhaustive::find_cut_exhaustive;
pub use streaming::{find_cut_streaming, find_cut_streaming_with, StreamingOptions};
pub use temporal::find_cut_temporal;

pub const DEFAULT_BLOCK_SIZE: usize = 256;

/// Projected size in pixels of a node under `cam`.
pub fn projected_size(node: &LoDNode, cam: &Camera) -> f64 {
    eval_node(node, cam).size
}

/// Projected size for an explicit center/extent pair.
pub fn projected_size_at(center: &nalgebra::Vector3<f32>, extent: f32, cam: &Camera) -> f64 {
    size_from_distance(distance(center, &cam.position), extent, cam)
}

fn size_from_distance(d: f64, extent: f32, cam: &Camera) -> f64 {
    let e = extent as f64;
    if d <= e {
        return f64::INFINITY;
    }
    cam.focal as f64 * e / d.max(cam.near as f64)
}

/// Size together with the distance it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Eval {
    pub size: f64,
    pub dist: f64,
    pub extent: f32,
}

pub(crate) fn eval_node(node: &LoDNode, cam: &Camera) -> Eval {
    let dist = distance(&node.gaussian.position, &cam.position);
    Eval {
        size: size_from_distance(dist, node.extent, cam),
        dist,
        extent: node.extent,
    }
}

/// Whether search descends below `node`.
pub(crate) fn opens(node: &LoDNode, size: f64, tau: f64) -> bool {
    !node.is_leaf() && size >= tau
}

/// Interpolation weight toward the node (1) versus its parent (0).
pub fn interpolation_weight(node_size: f64, parent_size: Option<f64>, tau: f64, is_leaf: bool) -> f32 {
    let Some(ps) = parent_size else {
        return 1.0;
    };
    if (is_leaf && node_size >= tau) || !ps.is_finite() || ps == node_size {
        return 1.0;
    }
    ((ps - tau) / (ps - node_size)).clamp(0.0, 1.0) as f32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutEntry {
    pub node: NodeId,
    /// Interpolation weight in [0, 1]: 1 renders the node as is, 0 renders
    /// its parent.
    pub t: f32,
}

/// Camera-motion budget of one cut entry: while the camera stays within
/// `radius` of `anchor`, neither the entry's nor its parent's side of the
/// criterion can change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Budget {
    pub anchor: [f64; 3],
    pub radius: f64,
}

impl Budget {
    pub(crate) fn covers(&self, cam: &Camera) -> bool {
        if !(self.radius > 0.0) {
            return false;
        }
        let p = cam.position;
        let dx = p.x as f64 - self.anchor[0];
        let dy = p.y as f64 - self.anchor[1];
        let dz = p.z as f64 - self.anchor[2];
        (dx * dx + dy * dy + dz * dz).sqrt() < self.radius
    }
}

/// Derives the motion budget for an entry from its evaluation and that of
/// its parent, both taken at `cam`.
pub(crate) fn motion_budget(entry: &Eval, leaf: bool, parent: Option<&Eval>, cam: &Camera, tau: f64) -> Budget {
    let f = cam.focal as f64;
    let near = cam.near as f64;
    let mut radius = f64::INFINITY;
    if !leaf {
        // Stays below tau while d > max(f e / tau, e).
        let e = entry.extent as f64;
        let threshold = (f * e / tau).max(e);
        radius = radius.min(entry.dist - threshold - 1e-9 * (1.0 + entry.dist + threshold));
    }
    if let Some(p) = parent {
        // Stays open while d <= e_p, or while max(d, near) <= f e_p / tau.
        let e = p.extent as f64;
        let a = f * e / tau;
        let threshold = if near <= a { e.max(a) } else { e };
        radius = radius.min(threshold - p.dist - 1e-9 * (1.0 + p.dist + threshold));
    }
    let pos = cam.position;
    Budget {
        anchor: [pos.x as f64, pos.y as f64, pos.z as f64],
        radius,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ReuseCache {
    pub focal: f32,
    pub near: f32,
    pub tau: f32,
    /// Parallel to `Cut::entries`.
    pub budgets: Vec<Budget>,
}

/// The set of nodes selected for one frame, sorted by node id.
#[derive(Debug, Clone)]
pub struct Cut {
    pub frame: u32,
    pub tau: f32,
    pub entries: Vec<CutEntry>,
    pub(crate) reuse: Option<ReuseCache>,
}

impl PartialEq for Cut {
    fn eq(&self, other: &Self) -> bool {
        self.frame == other.frame && self.tau == other.tau && self.entries == other.entries
    }
}

impl Cut {
    pub fn new(frame: u32, tau: f32, mut entries: Vec<CutEntry>) -> Self {
        entries.sort_by_key(|e| e.node);
        Cut {
            frame,
            tau,
            entries,
            reuse: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|e| e.node)
    }

    pub fn id_set(&self) -> HashSet<NodeId> {
        self.ids().collect()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.entries.binary_search_by_key(&id, |e| e.node).is_ok()
    }

    /// Whether the cut carries motion budgets usable by incremental search.
    pub fn has_reuse_cache(&self) -> bool {
        self.reuse.is_some()
    }

    /// Drops the motion budgets, as a cut decoded from the wire would be.
    pub fn without_reuse_cache(mut self) -> Self {
        self.reuse = None;
        self
    }

    /// Node ids and weights only; equality that ignores frame numbers.
    pub fn same_selection(&self, other: &Cut) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.node == b.node && a.t.to_bits() == b.t.to_bits())
    }

    pub fn encoded_len(&self) -> usize {
        12 + 8 * self.entries.len()
    }

    /// `frame u32 | tau f32 | count u32 | (node u32, t f32)*`, little-endian.
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend(self.frame.to_le_bytes());
        out.extend(self.tau.to_le_bytes());
        out.extend((self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend(e.node.to_le_bytes());
            out.extend(e.t.to_le_bytes());
        }
    }

    /// Decodes one cut from the front of `buf`, returning it and the number
    /// of bytes consumed.
    pub fn decode(buf: &[u8]) -> Result<(Cut, usize)> {
        let word = |i: usize| -> Result<[u8; 4]> {
            buf.get(i..i + 4)
                .map(|b| b.try_into().unwrap())
                .ok_or_else(|| Error::format("truncated cut"))
        };
        let frame = u32::from_le_bytes(word(0)?);
        let tau = f32::from_le_bytes(word(4)?);
        let count = u32::from_le_bytes(word(8)?) as usize;
        if buf.len() < 12 + 8 * count {
            return Err(Error::format("truncated cut entries"));
        }
        let mut entries = Vec::with_capacity(count);
        for k in 0..count {
            let base = 12 + 8 * k;
            let node = u32::from_le_bytes(word(base)?);
            let t = f32::from_le_bytes(word(base + 4)?);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::format(format!("cut weight {t} out of range")));
            }
            if let Some(prev) = entries.last().map(|e: &CutEntry| e.node) {
                if node <= prev {
                    return Err(Error::format("cut entries not sorted by node id"));
                }
            }
            entries.push(CutEntry { node, t });
        }
        Ok((
            Cut {
                frame,
                tau,
                entries,
                reuse: None,
            },
            12 + 8 * count,
        ))
    }

    /// Ids in `base` but not in `self`, and ids in `self` but not in `base`.
    fn diff(&self, base: Option<&Cut>) -> (Vec<NodeId>, Vec<NodeId>) {
        let old: &[CutEntry] = base.map_or(&[], |b| &b.entries);
        let (mut removed, mut inserted) = (Vec::new(), Vec::new());
        let (mut i, mut j) = (0, 0);
        loop {
            match (old.get(i), self.entries.get(j)) {
                (Some(a), Some(b)) if a.node == b.node => {
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a.node < b.node => {
                    removed.push(a.node);
                    i += 1;
                }
                (Some(a), None) => {
                    removed.push(a.node);
                    i += 1;
                }
                (_, Some(b)) => {
                    inserted.push(b.node);
                    j += 1;
                }
                (None, None) => break,
            }
        }
        (removed, inserted)
    }

    pub fn diff_encoded_len(&self, base: Option<&Cut>) -> usize {
        let (r, i) = self.diff(base);
        16 + 4 * (r.len() + i.len())
    }

    /// Encodes the membership change from `base`, the previous cut the
    /// receiver holds:
    ///
    /// `frame u32 | tau f32 | removed count u32 | node u32* | inserted count u32 | node u32*`
    ///
    /// Weights are not sent; they depend only on the camera and node
    /// geometry, and the client derives them for its own pose every frame.
    /// With no base every entry is inserted.
    pub fn encode_diff(&self, base: Option<&Cut>, out: &mut Vec<u8>) {
        let (removed, inserted) = self.diff(base);
        out.extend(self.frame.to_le_bytes());
        out.extend(self.tau.to_le_bytes());
        for list in [removed, inserted] {
            out.extend((list.len() as u32).to_le_bytes());
            for id in list {
                out.extend(id.to_le_bytes());
            }
        }
    }

    /// Inverse of [`Cut::encode_diff`]. Every decoded entry has weight 1.
    pub fn decode_diff(buf: &[u8], base: Option<&Cut>) -> Result<(Cut, usize)> {
        let mut r = crate::codec::Reader::new(buf);
        let frame = r.u32()?;
        let tau = r.f32()?;
        let mut read_sorted = || -> Result<Vec<NodeId>> {
            let count = r.u32()? as usize;
            if r.remaining() < count * 4 {
                return Err(Error::format("truncated cut diff"));
            }
            let mut list: Vec<NodeId> = Vec::with_capacity(count);
            for _ in 0..count {
                let node = r.u32()?;
                if list.last().is_some_and(|&l| l >= node) {
                    return Err(Error::format("cut diff ids not sorted"));
                }
                list.push(node);
            }
            Ok(list)
        };
        let removed = read_sorted()?;
        let inserted = read_sorted()?;
        let old: &[CutEntry] = base.map_or(&[], |b| &b.entries);
        let mut rm = removed.iter().peekable();
        let mut ids: Vec<NodeId> = Vec::with_capacity(old.len() + inserted.len());
        for e in old {
            if rm.peek().is_some_and(|&&x| x == e.node) {
                rm.next();
            } else {
                ids.push(e.node);
            }
        }
        let mismatch = rm.next().is_some();
        ids.extend(inserted);
        ids.sort_unstable();
        if mismatch || ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Protocol("cut diff does not match the previous cut".into()));
        }
        let used = r.pos;
        Ok((Cut::new(frame, tau, ids.into_iter().map(|node| CutEntry { node, t: 1.0 }).collect()), used))
    }
}

/// Counters reported by the search routines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Distinct projected-size evaluations made while finding the cut.
    pub visited: usize,
    /// Previous entries confirmed from their motion budget alone.
    pub reused: usize,
    /// Previous entries whose criterion had to be re-evaluated.
    pub retested: usize,
    /// Local searches that left their partition.
    pub boundary_crossings: usize,
    /// Node ids evaluated, when requested.
    pub visited_ids: Option<Vec<NodeId>>,
}

/// Recomputes every entry's weight for `cam` and `tau`.
pub fn interpolate_weights(mut cut: Cut, tree: &LoDTree, cam: &Camera, tau: f32) -> Cut {
    for e in &mut cut.entries {
        e.t = entry_weight(tree, e.node, cam, tau as f64);
    }
    cut
}

pub(crate) fn entry_weight(tree: &LoDTree, id: NodeId, cam: &Camera, tau: f64) -> f32 {
    let node = tree.node(id);
    let size = projected_size(node, cam);
    let parent = node.parent.map(|p| projected_size(tree.node(p), cam));
    interpolation_weight(size, parent, tau, node.is_leaf())
}

/// Checks the cut invariants against `cam`: antichain, leaf coverage and the
/// size criterion for every entry.
pub fn validate_cut(tree: &LoDTree, cut: &Cut, cam: &Camera) -> std::result::Result<(), String> {
    let tau = cut.tau as f64;
    let members = cut.id_set();
    if members.len() != cut.len() {
        return Err("duplicate entries".into());
    }
    for e in &cut.entries {
        let node = tree.get(e.node).ok_or(format!("unknown node {}", e.node))?;
        if !(0.0..=1.0).contains(&e.t) {
            return Err(format!("weight of {} out of range", e.node));
        }
        if let Some(a) = tree.ancestors(e.node).find(|a| members.contains(a)) {
            return Err(format!("{} and its ancestor {a} are both in the cut", e.node));
        }
        let size = projected_size(node, cam);
        let ok = match node.parent {
            None => size < tau || node.is_leaf(),
            Some(p) => {
                let parent_ok = projected_size(tree.node(p), cam) >= tau;
                parent_ok && (size < tau || node.is_leaf())
            }
        };
        if !ok {
            return Err(format!("node {} violates the size criterion", e.node));
        }
    }
    for n in tree.nodes().iter().filter(|n| n.is_leaf()) {
        let covering = std::iter::once(n.id)
            .chain(tree.ancestors(n.id))
            .filter(|a| members.contains(a))
            .count();
        if covering != 1 {
            return Err(format!("leaf {} covered {covering} times", n.id));
        }
    }
    Ok(())
}

pub(crate) fn check_known(tree: &LoDTree, cut: &Cut) -> Result<()> {
    match cut.entries.iter().find(|e| e.node as usize >= tree.len()) {
        Some(e) => Err(Error::StaleCut(e.node)),
        None => Ok(()),
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::camera::Pose;
    use nalgebra::Vector3;

    #[test]
    fn projected_size_examples() {
        let cam = Camera {
            focal: 1000.0,
            ..camera_at(10.0)
        };
        let s = projected_size_at(&Vector3::zeros(), 0.05, &cam);
        assert!((s - 5.0).abs() < 1e-6, "{s}");
        assert_eq!(projected_size_at(&Vector3::zeros(), 0.0, &cam), 0.0);
        assert_eq!(projected_size_at(&cam.position, 0.0, &cam), f64::INFINITY);
        assert_eq!(projected_size_at(&cam.position, 0.3, &cam), f64::INFINITY);
    }

    #[test]
    fn five_node_sizes_match_hand_values() {
        let (tree, [a, b, c, d, e]) = five_node_tree();
        let cam = camera_at(10.0);
        let sizes: Vec<f64> = [a, b, c, d, e].iter().map(|&i| projected_size(tree.node(i), &cam)).collect();
        for (got, want) in sizes.iter().zip([8.0, 4.0, 4.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn interpolation_weight_examples() {
        assert!((interpolation_weight(1.0, Some(4.0), 3.0, false) - 1.0 / 3.0).abs() < 1e-7);
        assert_eq!(interpolation_weight(1.0, Some(4.0), 1.0, false), 1.0);
        assert_eq!(interpolation_weight(1.0, Some(4.0), 4.0, false), 0.0);
        assert_eq!(interpolation_weight(1.0, None, 3.0, false), 1.0);
        assert_eq!(interpolation_weight(5.0, Some(9.0), 3.0, true), 1.0);
        assert_eq!(interpolation_weight(1.0, Some(f64::INFINITY), 3.0, false), 1.0);
    }

    #[test]
    fn weight_is_continuous_in_tau() {
        let (ps, ns) = (7.5, 2.25);
        let mut tau = 2.3;
        while tau < 7.4 {
            let a = interpolation_weight(ns, Some(ps), tau, false);
            let b = interpolation_weight(ns, Some(ps), tau + 1e-6, false);
            assert!((a - b).abs() < 1e-5);
            tau += 0.01;
        }
    }

    #[test]
    fn cut_serialization_round_trips() {
        let cut = Cut::new(
            7,
            3.0,
            vec![CutEntry { node: 9, t: 0.25 }, CutEntry { node: 2, t: 1.0 }],
        );
        let mut bytes = Vec::new();
        cut.encode(&mut bytes);
        assert_eq!(bytes.len(), cut.encoded_len());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        let (back, used) = Cut::decode(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, cut);
        assert!(Cut::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn cut_diff_round_trips_membership() {
        let e = |node, t| CutEntry { node, t };
        let base = Cut::new(1, 3.0, vec![e(2, 1.0), e(5, 0.5), e(7, 1.0), e(9, 0.25)]);
        let next = Cut::new(2, 3.0, vec![e(2, 1.0), e(5, 0.75), e(8, 1.0), e(9, 0.25), e(11, 0.1)]);
        let mut bytes = Vec::new();
        next.encode_diff(Some(&base), &mut bytes);
        // One removal, two insertions; the weight change costs nothing.
        assert_eq!(bytes.len(), 16 + 4 + 8);
        assert_eq!(bytes.len(), next.diff_encoded_len(Some(&base)));
        let (back, used) = Cut::decode_diff(&bytes, Some(&base)).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!((back.frame, back.tau), (2, 3.0));
        assert_eq!(back.ids().collect::<Vec<_>>(), next.ids().collect::<Vec<_>>());
        assert!(back.entries.iter().all(|e| e.t == 1.0));

        let mut full = Vec::new();
        next.encode_diff(None, &mut full);
        assert_eq!(full.len(), 16 + 4 * 5);
        assert_eq!(Cut::decode_diff(&full, None).unwrap().0.id_set(), next.id_set());

        let mut same = Vec::new();
        base.encode_diff(Some(&base), &mut same);
        assert_eq!(same.len(), 16);

        // Removing an id the receiver never had is a protocol error.
        let wrong = Cut::new(1, 3.0, vec![e(2, 1.0), e(5, 0.5), e(6, 1.0), e(9, 0.25)]);
        assert!(Cut::decode_diff(&bytes, Some(&wrong)).is_err());
        // So is inserting one it already has.
        assert!(Cut::decode_diff(&full, Some(&base)).is_err());
        assert!(Cut::decode_diff(&bytes[..bytes.len() - 1], Some(&base)).is_err());
    }

    #[test]
    fn budget_is_conservative_under_motion() {
        let (tree, [_, b, _, d, _]) = five_node_tree();
        let cam = camera_at(10.0);
        let tau = 3.0;
        let ed = eval_node(tree.node(d), &cam);
        let eb = eval_node(tree.node(b), &cam);
        let budget = motion_budget(&ed, true, Some(&eb), &cam, tau);
        // Parent B opens while d <= 100 * 0.4 / 3 = 13.33.
        assert!((budget.radius - (40.0 / 3.0 - 10.0)).abs() < 1e-6);
        let moved = cam.with_pose(&Pose::look_at(
            Vector3::new(0.0, 0.0, -13.3),
            Vector3::zeros(),
            Vector3::new(0.0, -1.0, 0.0),
        ));
        assert!(budget.covers(&moved));
        assert!(projected_size(tree.node(b), &moved) >= tau);
        let too_far = cam.with_pose(&Pose::look_at(
            Vector3::new(0.0, 0.0, -13.34),
            Vector3::zeros(),
            Vector3::new(0.0, -1.0, 0.0),
        ));
        assert!(!budget.covers(&too_far));
    }

    fn ids(cut: &Cut) -> Vec<NodeId> {
        cut.ids().collect()
    }

    fn sorted(mut v: Vec<NodeId>) -> Vec<NodeId> {
        v.sort();
        v
    }

    #[test]
    fn five_node_exhaustive_cuts() {
        let (tree, [a, b, c, d, e]) = five_node_tree();
        let cam = camera_at(10.0);
        let (cut, stats) = find_cut_exhaustive(&tree, &cam, 3.0, 0);
        assert_eq!(ids(&cut), sorted(vec![d, e, c]));
        assert_eq!(stats.visited, 5);
        let weight = |id| cut.entries.iter().find(|x| x.node == id).unwrap().t;
        assert!((weight(d) - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(weight(c), 1.0);
        assert_eq!(ids(&find_cut_exhaustive(&tree, &cam, 10.0, 0).0), vec![a]);
        assert_eq!(ids(&find_cut_exhaustive(&tree, &cam, 1e-6, 0).0), sorted(vec![d, e, c]));
        let (cut, _) = find_cut_exhaustive(&tree, &cam, 5.0, 0);
        assert_eq!(ids(&cut), sorted(vec![b, c]));
        assert!(cut.entries.iter().all(|x| (x.t - 0.75).abs() < 1e-6));
    }

    #[test]
    fn five_node_streaming_visits() {
        let (tree, [a, _, c, d, e]) = five_node_tree();
        let cam = camera_at(10.0);
        let opts = StreamingOptions {
            record_visits: true,
            ..StreamingOptions::default()
        };
        let (cut, stats) = find_cut_streaming_with(&tree, &cam, 3.0, 0, &opts);
        assert_eq!(ids(&cut), sorted(vec![d, e, c]));
        assert_eq!(stats.visited, 5);
        let (cut, stats) = find_cut_streaming_with(&tree, &cam, 10.0, 0, &opts);
        assert_eq!(ids(&cut), vec![a]);
        assert_eq!(stats.visited_ids, Some(vec![a]));
    }

    #[test]
    fn five_node_dolly_back() {
        let (tree, [_, b, c, _, _]) = five_node_tree();
        let (prev, _) = find_cut_streaming(&tree, &camera_at(10.0), 3.0, 0);
        let far = camera_at(20.0);
        for prev in [prev.clone(), prev.without_reuse_cache()] {
            let (cut, _) = find_cut_temporal(&tree, &prev, &far, 3.0, 1).unwrap();
            assert_eq!(ids(&cut), sorted(vec![b, c]));
            assert_eq!(cut, find_cut_exhaustive(&tree, &far, 3.0, 1).0);
        }
    }

    #[test]
    fn identical_camera_reuses_everything() {
        let (tree, _) = five_node_tree();
        let cam = camera_at(10.0);
        let (prev, _) = find_cut_streaming(&tree, &cam, 3.0, 0);
        let (cut, stats) = find_cut_temporal(&tree, &prev, &cam, 3.0, 0).unwrap();
        assert_eq!(cut, prev);
        assert_eq!(stats.visited, 0);
        assert_eq!(stats.reused, prev.len());
        let (cut, stats) = find_cut_temporal(&tree, &prev.clone().without_reuse_cache(), &cam, 3.0, 0).unwrap();
        assert_eq!(cut, prev);
        assert!(stats.visited <= 2 * prev.len());
    }

    #[test]
    fn unknown_node_is_a_stale_cut() {
        let (tree, _) = five_node_tree();
        let prev = Cut::new(0, 3.0, vec![CutEntry { node: 99, t: 1.0 }]);
        let err = find_cut_temporal(&tree, &prev, &camera_at(10.0), 3.0, 1).unwrap_err();
        assert!(matches!(err, Error::StaleCut(99)));
    }
}
