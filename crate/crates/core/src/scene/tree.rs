//! The LoD tree: construction by median split with moment-matched interior
//! Gaussians, level-order numbering and bounding extents.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::gaussian::{sh_len, Gaussian};
use crate::NodeId;

/// Relative outward padding applied to every extent. It keeps child bounding
/// spheres strictly inside their parent's sphere after f32 rounding, which the
/// projected-size monotonicity (and therefore incremental search) relies on.
pub const EXTENT_PADDING: f64 = 1e-6;

/// Build parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneConfig {
    pub max_children: usize,
    pub partition_target_size: usize,
    pub partition_levels: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            max_children: 8,
            partition_target_size: 512,
            partition_levels: 2,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_children < 2 || self.partition_target_size == 0 || self.partition_levels < 1 {
            return Err(Error::Usage(format!("invalid scene config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoDNode {
    pub id: NodeId,
    pub gaussian: Gaussian,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub level: u32,
    /// Bounding radius around `gaussian.position` covering the 3-sigma
    /// spheres of every leaf in the subtree.
    pub extent: f32,
    pub bfs_next: Option<NodeId>,
    pub partition: u32,
}

impl LoDNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A connected subtree produced by offline partitioning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInfo {
    pub root: NodeId,
    /// Partition holding the parent of `root`; `None` for the top-tree.
    pub parent: Option<u32>,
    pub size: usize,
}

/// Hierarchical scene. Node ids are level-order indices, so the root is 0,
/// `bfs_next(i) = i + 1` and the children of a node are contiguous ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LoDTree {
    pub(crate) nodes: Vec<LoDNode>,
    pub(crate) partitions: Vec<PartitionInfo>,
    pub(crate) max_level: u32,
}

struct Proto {
    gaussian: Gaussian,
    children: Vec<usize>,
    weight: f64,
}

impl LoDTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &LoDNode {
        &self.nodes[id as usize]
    }

    pub fn get(&self, id: NodeId) -> Option<&LoDNode> {
        self.nodes.get(id as usize)
    }

    pub fn nodes(&self) -> &[LoDNode] {
        &self.nodes
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn partitions(&self) -> &[PartitionInfo] {
        &self.partitions
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Builds the hierarchy over `gaussians`; the inputs become the leaves.
    /// The result carries a single top-tree partition; call
    /// [`crate::scene::partition_subtrees`] to split it.
    pub fn build(gaussians: Vec<Gaussian>, cfg: &SceneConfig) -> Result<LoDTree> {
        cfg.validate()?;
        if gaussians.is_empty() {
            return Err(Error::EmptyScene);
        }
        let mut protos: Vec<Proto> = Vec::with_capacity(gaussians.len() * 3 / 2);
        for g in gaussians {
            let weight = mixture_weight(&g);
            protos.push(Proto {
                gaussian: g,
                children: Vec::new(),
                weight,
            });
        }
        let leaves: Vec<usize> = (0..protos.len()).collect();
        let root = if leaves.len() == 1 {
            0
        } else {
            let mut idx = leaves;
            split(&mut protos, &mut idx, cfg.max_children)
        };
        Ok(Self::from_protos(protos, root).0)
    }

    /// Builds a tree from an explicit hierarchy. `parents[i]` is the index of
    /// the parent of input `i` (exactly one `None`, the root). When `extents`
    /// is `None` they are derived like [`LoDTree::build`] does. Returns the
    /// tree and the node id assigned to each input index.
    pub fn from_hierarchy(
        gaussians: Vec<Gaussian>,
        parents: &[Option<usize>],
        extents: Option<&[f32]>,
    ) -> Result<(LoDTree, Vec<NodeId>)> {
        if gaussians.is_empty() {
            return Err(Error::EmptyScene);
        }
        if parents.len() != gaussians.len() || extents.is_some_and(|e| e.len() != gaussians.len()) {
            return Err(Error::Usage("hierarchy arrays differ in length".into()));
        }
        let roots: Vec<usize> = (0..parents.len()).filter(|&i| parents[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Usage(format!("expected one root, found {}", roots.len())));
        }
        let mut protos: Vec<Proto> = gaussians
            .into_iter()
            .map(|g| Proto {
                gaussian: g,
                children: Vec::new(),
                weight: 0.0,
            })
            .collect();
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= protos.len() || p == i {
                    return Err(Error::Usage(format!("bad parent index for {i}")));
                }
                protos[p].children.push(i);
            }
        }
        let (mut tree, order) = Self::from_protos(protos, roots[0]);
        if tree.len() != parents.len() {
            return Err(Error::Usage("hierarchy is not connected".into()));
        }
        let mut map = vec![0; parents.len()];
        for (id, &src) in order.iter().enumerate() {
            map[src] = id as NodeId;
        }
        if let Some(e) = extents {
            for (src, &id) in map.iter().enumerate() {
                tree.nodes[id as usize].extent = e[src];
            }
        }
        Ok((tree, map))
    }

    fn from_protos(mut protos: Vec<Proto>, root: usize) -> (LoDTree, Vec<usize>) {
        // Level-order numbering.
        let mut order = Vec::with_capacity(protos.len());
        let mut new_id = vec![u32::MAX; protos.len()];
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            if new_id[p] != u32::MAX {
                continue;
            }
            new_id[p] = order.len() as u32;
            order.push(p);
            queue.extend(protos[p].children.iter().copied());
        }
        let mut nodes: Vec<LoDNode> = Vec::with_capacity(order.len());
        let mut parent_of = vec![None; protos.len()];
        for &p in &order {
            for &c in &protos[p].children {
                parent_of[c] = Some(new_id[p]);
            }
        }
        for (id, &p) in order.iter().enumerate() {
            let proto = &mut protos[p];
            let gaussian = std::mem::replace(
                &mut proto.gaussian,
                Gaussian::with_color(
                    Vector3::zeros(),
                    UnitQuaternion::identity(),
                    Vector3::repeat(1.0),
                    1.0,
                    [0.0; 3],
                ),
            );
            let level = parent_of[p].map_or(0, |pid: NodeId| nodes[pid as usize].level + 1);
            nodes.push(LoDNode {
                id: id as NodeId,
                gaussian,
                parent: parent_of[p],
                children: proto.children.iter().map(|&c| new_id[c]).collect(),
                level,
                extent: 0.0,
                bfs_next: (id + 1 < order.len()).then_some(id as NodeId + 1),
                partition: 0,
            });
        }
        let max_level = nodes.iter().map(|n| n.level).max().unwrap_or(0);
        let mut tree = LoDTree {
            partitions: vec![PartitionInfo {
                root: 0,
                parent: None,
                size: nodes.len(),
            }],
            nodes,
            max_level,
        };
        tree.recompute_extents();
        (tree, order)
    }

    /// Recomputes every extent bottom-up from current positions and scales.
    pub fn recompute_extents(&mut self) {
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let radius = if node.is_leaf() {
                3.0 * node.gaussian.max_scale() as f64
            } else {
                let p = node.gaussian.position;
                node.children
                    .iter()
                    .map(|&c| {
                        let child = &self.nodes[c as usize];
                        distance(&p, &child.gaussian.position) + child.extent as f64
                    })
                    .fold(0.0, f64::max)
            };
            self.nodes[i].extent = (radius * (1.0 + EXTENT_PADDING)) as f32;
        }
    }

    /// Checks structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut cur = Some(0u32);
        let mut last_level = 0;
        let mut count = 0;
        while let Some(id) = cur {
            let n = self.nodes.get(id as usize).ok_or(format!("bfs_next to unknown {id}"))?;
            if seen[id as usize] {
                return Err(format!("bfs chain revisits {id}"));
            }
            seen[id as usize] = true;
            if n.level < last_level {
                return Err(format!("bfs chain level decreases at {id}"));
            }
            last_level = n.level;
            count += 1;
            cur = n.bfs_next;
        }
        if count != self.nodes.len() {
            return Err(format!("bfs chain covers {count} of {} nodes", self.nodes.len()));
        }
        for n in &self.nodes {
            if n.parent.is_none() != (n.id == 0) {
                return Err(format!("node {} has inconsistent root status", n.id));
            }
            for &c in &n.children {
                let child = self.get(c).ok_or(format!("node {} has unknown child {c}", n.id))?;
                if child.parent != Some(n.id) {
                    return Err(format!("child {c} does not point back to {}", n.id));
                }
                if child.level != n.level + 1 {
                    return Err(format!("level jump on edge {} -> {c}", n.id));
                }
                if child.extent > n.extent {
                    return Err(format!("extent of {c} exceeds parent {}", n.id));
                }
                let reach = distance(&n.gaussian.position, &child.gaussian.position) + child.extent as f64;
                if reach > n.extent as f64 {
                    return Err(format!("extent of {} does not bound child {c}", n.id));
                }
            }
            let pid = n.partition as usize;
            let part = self.partitions.get(pid).ok_or(format!("node {} in unknown partition", n.id))?;
            let root = self.node(part.root);
            if root.partition != n.partition {
                return Err(format!("partition {pid} root mismatch"));
            }
            if n.id != part.root {
                let parent = self.node(n.parent.ok_or("non-root without parent")?);
                if parent.partition != n.partition {
                    return Err(format!("partition {pid} is not connected at node {}", n.id));
                }
            }
        }
        Ok(())
    }

    /// Nodes on the path from `id` to the root, excluding `id`.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.node(id).parent, move |&p| self.node(p).parent)
    }
}

pub(crate) fn distance(a: &Vector3<f32>, b: &Vector3<f32>) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    let dz = a.z as f64 - b.z as f64;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn mixture_weight(g: &Gaussian) -> f64 {
    let s = g.scale;
    (g.opacity as f64 * s.x as f64 * s.y as f64 * s.z as f64).max(1e-30)
}

/// Recursive median split over the longest axis; returns the index of the
/// created interior proto.
fn split(protos: &mut Vec<Proto>, idx: &mut [usize], max_children: usize) -> usize {
    let children: Vec<usize> = if idx.len() <= max_children {
        idx.to_vec()
    } else {
        let mut lo = Vector3::repeat(f32::INFINITY);
        let mut hi = Vector3::repeat(f32::NEG_INFINITY);
        for &i in idx.iter() {
            let p = protos[i].gaussian.position;
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        let axis = (hi - lo).imax();
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            protos[a].gaussian.position[axis]
                .total_cmp(&protos[b].gaussian.position[axis])
                .then(a.cmp(&b))
        });
        let (left, right) = idx.split_at_mut(mid);
        vec![split(protos, left, max_children), split(protos, right, max_children)]
    };
    let (gaussian, weight) = merge(protos, &children);
    protos.push(Proto {
        gaussian,
        children,
        weight,
    });
    protos.len() - 1
}

/// Moment-matched merge of child Gaussians.
fn merge(protos: &[Proto], children: &[usize]) -> (Gaussian, f64) {
    let total: f64 = children.iter().map(|&c| protos[c].weight).sum();
    let mut mean = Vector3::<f64>::zeros();
    for &c in children {
        mean += protos[c].gaussian.position.cast::<f64>() * (protos[c].weight / total);
    }
    let mut cov = Matrix3::<f64>::zeros();
    let mut transparency = 1.0f64;
    let degree = children.iter().map(|&c| protos[c].gaussian.sh_degree).max().unwrap_or(0);
    let mut sh = vec![0.0f64; sh_len(degree)];
    for &c in children {
        let g = &protos[c].gaussian;
        let w = protos[c].weight / total;
        let d = g.position.cast::<f64>() - mean;
        cov += (g.covariance().cast::<f64>() + d * d.transpose()) * w;
        transparency *= 1.0 - g.opacity as f64;
        for (acc, v) in sh.iter_mut().zip(&g.sh) {
            *acc += w * *v as f64;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut basis = eig.eigenvectors;
    if basis.determinant() < 0.0 {
        basis.set_column(2, &(-basis.column(2)));
    }
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(basis.cast::<f32>()));
    let scale = eig.eigenvalues.map(|l| (l.max(1e-14)).sqrt() as f32);
    let opacity = ((1.0 - transparency) as f32).clamp(1e-6, 1.0);
    let gaussian = Gaussian {
        position: mean.cast::<f32>(),
        rotation,
        scale,
        opacity,
        log_opacity: opacity.ln(),
        sh_degree: degree,
        sh: sh.into_iter().map(|v| v as f32).collect(),
    };
    (gaussian, total)
}
