//! Versioned binary tree snapshot.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "VTRE" | version u8 | node count u32 | node records in level order
//! ```
//!
//! Every node record is 273 bytes:
//!
//! | field                         | type            |
//! |-------------------------------|-----------------|
//! | id                            | u32             |
//! | parent (`u32::MAX` = root)    | u32             |
//! | bfs_next (`u32::MAX` = none)  | u32             |
//! | first child                   | u32             |
//! | child count                   | u32             |
//! | level                         | u32             |
//! | partition                     | u32             |
//! | extent                        | f32             |
//! | position                      | 3 × f32         |
//! | rotation (x, y, z, w)         | 4 × f32         |
//! | scale                         | 3 × f32         |
//! | opacity                       | f32             |
//! | log opacity                   | f32             |
//! | SH degree                     | u8              |
//! | SH coefficients, zero padded  | 48 × f32        |

use std::io::{Read, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::tree::{LoDNode, LoDTree, PartitionInfo};
use crate::error::{Error, Result};
use crate::gaussian::{sh_len, Gaussian};
use crate::NodeId;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"VTRE";
pub const SNAPSHOT_VERSION: u8 = 1;
pub const NODE_RECORD_BYTES: usize = 7 * 4 + 4 + 12 + 16 + 12 + 4 + 4 + 1 + 48 * 4;

const NONE: u32 = u32::MAX;

pub fn write_snapshot<W: Write>(w: &mut W, tree: &LoDTree) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&[SNAPSHOT_VERSION])?;
    w.write_all(&(tree.len() as u32).to_le_bytes())?;
    let mut rec = Vec::with_capacity(NODE_RECORD_BYTES);
    for n in tree.nodes() {
        rec.clear();
        let first_child = n.children.first().copied().unwrap_or(NONE);
        for v in [
            n.id,
            n.parent.unwrap_or(NONE),
            n.bfs_next.unwrap_or(NONE),
            first_child,
            n.children.len() as u32,
            n.level,
            n.partition,
        ] {
            rec.extend(v.to_le_bytes());
        }
        let g = &n.gaussian;
        let q = g.rotation.quaternion();
        let floats = std::iter::once(n.extent)
            .chain(g.position.iter().copied())
            .chain([q.i, q.j, q.k, q.w])
            .chain(g.scale.iter().copied())
            .chain([g.opacity, g.log_opacity]);
        for v in floats {
            rec.extend(v.to_le_bytes());
        }
        rec.push(g.sh_degree);
        for k in 0..48 {
            rec.extend(g.sh.get(k).copied().unwrap_or(0.0).to_le_bytes());
        }
        debug_assert_eq!(rec.len(), NODE_RECORD_BYTES);
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<LoDTree> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head)
        .map_err(|_| Error::format("truncated snapshot header"))?;
    if &head[..4] != SNAPSHOT_MAGIC {
        return Err(Error::format("bad snapshot magic"));
    }
    if head[4] != SNAPSHOT_VERSION {
        return Err(Error::format(format!("unsupported snapshot version {}", head[4])));
    }
    let count = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
    let mut nodes = Vec::with_capacity(count);
    let mut rec = vec![0u8; NODE_RECORD_BYTES];
    for i in 0..count {
        r.read_exact(&mut rec)
            .map_err(|_| Error::format(format!("truncated node record {i}")))?;
        let u = |k: usize| u32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let id = u(0);
        if id as usize != i {
            return Err(Error::format(format!("node record {i} carries id {id}")));
        }
        let opt = |v: u32| (v != NONE).then_some(v);
        let (first_child, child_count) = (u(3), u(4));
        let degree = rec[28 + 4 * 13];
        if degree > 3 {
            return Err(Error::format(format!("node {i} has SH degree {degree}")));
        }
        let sh_base = 28 + 4 * 13 + 1;
        let sh = (0..sh_len(degree))
            .map(|k| f32::from_le_bytes(rec[sh_base + 4 * k..sh_base + 4 * k + 4].try_into().unwrap()))
            .collect();
        let quat = Quaternion::new(f(14), f(11), f(12), f(13));
        let gaussian = Gaussian {
            position: Vector3::new(f(8), f(9), f(10)),
            rotation: UnitQuaternion::new_unchecked(quat),
            scale: Vector3::new(f(15), f(16), f(17)),
            opacity: f(18),
            log_opacity: f(19),
            sh_degree: degree,
            sh,
        };
        nodes.push(LoDNode {
            id,
            gaussian,
            parent: opt(u(1)),
            children: if child_count == 0 {
                Vec::new()
            } else {
                (first_child..first_child + child_count).collect::<Vec<NodeId>>()
            },
            level: u(5),
            extent: f(7),
            bfs_next: opt(u(2)),
            partition: u(6),
        });
    }
    if nodes.is_empty() {
        return Err(Error::EmptyScene);
    }
    let tree = assemble(nodes)?;
    tree.check_invariants().map_err(Error::Format)?;
    Ok(tree)
}

fn assemble(nodes: Vec<LoDNode>) -> Result<LoDTree> {
    let parts = nodes.iter().map(|n| n.partition).max().unwrap_or(0) as usize + 1;
    let mut partitions: Vec<Option<PartitionInfo>> = vec![None; parts];
    let mut sizes = vec![0usize; parts];
    for n in &nodes {
        if n.children.iter().any(|&c| c as usize >= nodes.len()) {
            return Err(Error::format(format!("node {} has out-of-range children", n.id)));
        }
        sizes[n.partition as usize] += 1;
        let parent_part = match n.parent {
            Some(p) => Some(
                nodes
                    .get(p as usize)
                    .ok_or_else(|| Error::format(format!("node {} has unknown parent", n.id)))?
                    .partition,
            ),
            None => None,
        };
        if parent_part != Some(n.partition) {
            let slot = &mut partitions[n.partition as usize];
            if slot.is_some() {
                return Err(Error::format(format!("partition {} has two roots", n.partition)));
            }
            *slot = Some(PartitionInfo {
                root: n.id,
                parent: parent_part,
                size: 0,
            });
        }
    }
    let partitions = partitions
        .into_iter()
        .zip(sizes)
        .enumerate()
        .map(|(i, (p, size))| {
            p.map(|p| PartitionInfo { size, ..p })
                .ok_or_else(|| Error::format(format!("partition {i} has no root")))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_level = nodes.iter().map(|n| n.level).max().unwrap_or(0);
    Ok(LoDTree {
        nodes,
        partitions,
        max_level,
    })
}

pub fn save_snapshot(path: impl AsRef<std::path::Path>, tree: &LoDTree) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(&mut f, tree)?;
    f.flush()?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<std::path::Path>) -> Result<LoDTree> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_snapshot(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{partition_subtrees, SceneConfig};
    use proptest::prelude::*;

    fn scene(n: usize, seed: u64) -> LoDTree {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let gs = (0..n)
            .map(|_| {
                let mut g = Gaussian::with_color(
                    Vector3::new(rng.gen(), rng.gen(), rng.gen()),
                    UnitQuaternion::from_euler_angles(rng.gen(), rng.gen(), rng.gen()),
                    Vector3::new(0.01, 0.02, 0.03),
                    rng.gen_range(0.1..1.0),
                    [rng.gen(), rng.gen(), rng.gen()],
                );
                g.sh_degree = 3;
                g.sh.extend((0..45).map(|_| rng.gen_range(-0.5f32..0.5)));
                g
            })
            .collect();
        let cfg = SceneConfig {
            partition_target_size: 16,
            ..SceneConfig::default()
        };
        partition_subtrees(LoDTree::build(gs, &cfg).unwrap(), &cfg)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn snapshot_round_trip_is_bit_exact(n in 1usize..300, seed in any::<u64>()) {
            let tree = scene(n, seed);
            let mut bytes = Vec::new();
            write_snapshot(&mut bytes, &tree).unwrap();
            prop_assert_eq!(bytes.len(), 9 + tree.len() * NODE_RECORD_BYTES);
            let back = read_snapshot(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(&back, &tree);
        }
    }

    #[test]
    fn bad_magic_and_truncation_are_format_errors() {
        let tree = scene(10, 1);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &tree).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(&mut bad.as_slice()), Err(Error::Format(_))));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_snapshot(&mut bytes.as_slice()), Err(Error::Format(_))));
    }
}
