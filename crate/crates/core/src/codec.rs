//! Per-node record compression: SH truncation by tree level and 16-bit
//! fixed-point attributes.
//!
//! Record layout (little-endian):
//!
//! ```text
//! node id u32 | parent u32 (u32::MAX = root) | partition u32 | extent f32
//! level u8 | SH degree u8 | child count u8 | child ids u32 × count
//! position 3 × u16 | rotation (w, x, y, z) 4 × u16 | log-scale 3 × u16
//! log-opacity u16 | SH 3·(d+1)² × u16
//! ```
//!
//! Positions are quantized on a per-partition box, log-scales and
//! log-opacity on scene-wide ranges, rotation components on [-1, 1] and SH
//! coefficients on [-4, 4].

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::gaussian::{sh_len, Gaussian};
use crate::scene::{LoDNode, LoDTree};
use crate::NodeId;

pub const QUANT_LEVELS: f64 = 65535.0;
pub const SH_RANGE: f32 = 4.0;
/// Bytes before the child id list.
pub const RECORD_HEADER_BYTES: usize = 19;

const NONE: u32 = u32::MAX;

/// Closed value range mapped onto `0..=65535`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: f32,
    pub max: f32,
}

impl Bounds {
    /// Widens empty or inverted ranges so that `max > min`.
    pub fn new(min: f32, max: f32) -> Self {
        if max > min {
            Bounds { min, max }
        } else {
            let pad = 1e-3 * min.abs().max(1.0);
            Bounds {
                min: min - pad,
                max: min + pad,
            }
        }
    }

    pub fn covering(values: impl IntoIterator<Item = f32>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo.is_finite() {
            Bounds::new(lo, hi)
        } else {
            Bounds::new(0.0, 1.0)
        }
    }

    pub fn range(&self) -> f64 {
        self.max as f64 - self.min as f64
    }

    /// Quantization step.
    pub fn step(&self) -> f64 {
        self.range() / QUANT_LEVELS
    }

    /// Nearest code and whether `v` had to be clamped.
    pub fn quantize(&self, v: f32) -> (u16, bool) {
        let x = (v as f64 - self.min as f64) / self.range() * QUANT_LEVELS;
        if !x.is_finite() {
            return (0, true);
        }
        let code = x.round();
        if code < 0.0 {
            (0, true)
        } else if code > QUANT_LEVELS {
            (u16::MAX, true)
        } else {
            (code as u16, v < self.min || v > self.max)
        }
    }

    pub fn dequantize(&self, code: u16) -> f32 {
        (self.min as f64 + code as f64 / QUANT_LEVELS * self.range()) as f32
    }

    pub fn snap(&self, v: f32) -> f32 {
        self.dequantize(self.quantize(v).0)
    }
}

const UNIT: Bounds = Bounds { min: -1.0, max: 1.0 };
const SH_BOUNDS: Bounds = Bounds {
    min: -SH_RANGE,
    max: SH_RANGE,
};

/// Quantization domains shared by encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGrid {
    /// Position box per partition.
    pub positions: Vec<[Bounds; 3]>,
    pub log_scale: Bounds,
    pub log_opacity: Bounds,
}

impl QuantGrid {
    pub fn from_tree(tree: &LoDTree) -> Self {
        let parts = tree.partitions().len();
        let mut lo = vec![[f32::INFINITY; 3]; parts];
        let mut hi = vec![[f32::NEG_INFINITY; 3]; parts];
        for n in tree.nodes() {
            let p = n.partition as usize;
            for a in 0..3 {
                lo[p][a] = lo[p][a].min(n.gaussian.position[a]);
                hi[p][a] = hi[p][a].max(n.gaussian.position[a]);
            }
        }
        let positions = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| [0, 1, 2].map(|a| Bounds::new(l[a], h[a])))
            .collect();
        let log_scale = Bounds::covering(
            tree.nodes()
                .iter()
                .flat_map(|n| n.gaussian.scale.iter().map(|s| s.ln()).collect::<Vec<_>>()),
        );
        let log_opacity = Bounds::covering(tree.nodes().iter().map(|n| n.gaussian.log_opacity));
        QuantGrid {
            positions,
            log_scale,
            log_opacity,
        }
    }

    pub fn position_bounds(&self, partition: u32) -> Result<&[Bounds; 3]> {
        self.positions
            .get(partition as usize)
            .ok_or_else(|| Error::format(format!("no quantization grid for partition {partition}")))
    }

    pub fn encoded_len(&self) -> usize {
        4 + 24 * self.positions.len() + 16
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend((self.positions.len() as u32).to_le_bytes());
        for b in self.positions.iter().flatten() {
            out.extend(b.min.to_le_bytes());
            out.extend(b.max.to_le_bytes());
        }
        for b in [self.log_scale, self.log_opacity] {
            out.extend(b.min.to_le_bytes());
            out.extend(b.max.to_le_bytes());
        }
    }

    pub fn decode(buf: &[u8]) -> Result<(QuantGrid, usize)> {
        let mut r = Reader::new(buf);
        let count = r.u32()? as usize;
        if buf.len() < 4 + 24 * count + 16 {
            return Err(Error::format("truncated quantization grid"));
        }
        let bounds = |r: &mut Reader| -> Result<Bounds> {
            let (min, max) = (r.f32()?, r.f32()?);
            if !(max > min) {
                return Err(Error::format("degenerate quantization range"));
            }
            Ok(Bounds { min, max })
        };
        let mut positions = Vec::with_capacity(count);
        for _ in 0..count {
            positions.push([bounds(&mut r)?, bounds(&mut r)?, bounds(&mut r)?]);
        }
        let log_scale = bounds(&mut r)?;
        let log_opacity = bounds(&mut r)?;
        Ok((
            QuantGrid {
                positions,
                log_scale,
                log_opacity,
            },
            r.pos,
        ))
    }
}

/// Snaps every node position onto its partition grid and recomputes
/// extents, so that positions decoded on the client equal the positions the
/// cloud searches with, bit for bit.
pub fn publish(mut tree: LoDTree) -> (LoDTree, QuantGrid) {
    let grid = QuantGrid::from_tree(&tree);
    for n in &mut tree.nodes {
        let b = grid.positions[n.partition as usize];
        let p = &mut n.gaussian.position;
        *p = Vector3::new(b[0].snap(p.x), b[1].snap(p.y), b[2].snap(p.z));
    }
    tree.recompute_extents();
    (tree, grid)
}

/// SH degree kept for a node at `level`: coarse levels carry fewer bands.
pub fn sh_degree_for_level(level: u32, max_level: u32) -> u8 {
    if max_level == 0 {
        return 3;
    }
    let r = level.min(max_level) as f64 / max_level as f64;
    if r < 0.25 {
        1
    } else if r < 0.5 {
        2
    } else {
        3
    }
}

/// A tree node as shipped to the client.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub partition: u32,
    pub level: u32,
    pub extent: f32,
    pub children: Vec<NodeId>,
    pub gaussian: Gaussian,
}

impl NodeRecord {
    pub fn from_node(node: &LoDNode) -> Self {
        NodeRecord {
            id: node.id,
            parent: node.parent,
            partition: node.partition,
            level: node.level,
            extent: node.extent,
            children: node.children.clone(),
            gaussian: node.gaussian.clone(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

pub fn record_len(child_count: usize, degree: u8) -> usize {
    RECORD_HEADER_BYTES + 4 * child_count + 2 * (11 + sh_len(degree))
}

/// Appends the encoded record and returns the number of clamped values.
/// The SH block is truncated to `min(degree, stored degree)`.
pub fn encode_record(rec: &NodeRecord, grid: &QuantGrid, degree: u8, out: &mut Vec<u8>) -> Result<usize> {
    let g = &rec.gaussian;
    let degree = degree.min(g.sh_degree).min(3);
    let level = u8::try_from(rec.level).map_err(|_| Error::format(format!("level {} too deep", rec.level)))?;
    let count = u8::try_from(rec.children.len())
        .map_err(|_| Error::format(format!("node {} has too many children", rec.id)))?;
    let pos = grid.position_bounds(rec.partition)?;
    out.extend(rec.id.to_le_bytes());
    out.extend(rec.parent.unwrap_or(NONE).to_le_bytes());
    out.extend(rec.partition.to_le_bytes());
    out.extend(rec.extent.to_le_bytes());
    out.extend([level, degree, count]);
    for c in &rec.children {
        out.extend(c.to_le_bytes());
    }
    let mut clamped = 0;
    let mut put = |b: &Bounds, v: f32, out: &mut Vec<u8>| {
        let (code, c) = b.quantize(v);
        clamped += usize::from(c);
        out.extend(code.to_le_bytes());
    };
    for a in 0..3 {
        put(&pos[a], g.position[a], out);
    }
    let q = g.rotation.quaternion();
    for v in [q.w, q.i, q.j, q.k] {
        put(&UNIT, v, out);
    }
    for a in 0..3 {
        put(&grid.log_scale, g.scale[a].ln(), out);
    }
    put(&grid.log_opacity, g.log_opacity, out);
    for &v in &g.sh[..sh_len(degree)] {
        put(&SH_BOUNDS, v, out);
    }
    Ok(clamped)
}

/// Decodes one record from the front of `buf`; returns it and the bytes
/// consumed.
pub fn decode_record(buf: &[u8], grid: &QuantGrid) -> Result<(NodeRecord, usize)> {
    let mut r = Reader::new(buf);
    let id = r.u32()?;
    let parent = r.u32()?;
    let partition = r.u32()?;
    let extent = r.f32()?;
    let level = r.u8()?;
    let degree = r.u8()?;
    if degree > 3 {
        return Err(Error::format(format!("record {id} has SH degree {degree}")));
    }
    let count = r.u8()? as usize;
    let children = (0..count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let pos = grid.position_bounds(partition)?;
    let position = Vector3::new(
        pos[0].dequantize(r.u16()?),
        pos[1].dequantize(r.u16()?),
        pos[2].dequantize(r.u16()?),
    );
    let q = [r.u16()?, r.u16()?, r.u16()?, r.u16()?].map(|c| UNIT.dequantize(c));
    let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
    let rotation = if quat.norm() > 1e-6 {
        UnitQuaternion::from_quaternion(quat)
    } else {
        UnitQuaternion::identity()
    };
    let mut scale = Vector3::zeros();
    for a in 0..3 {
        scale[a] = grid.log_scale.dequantize(r.u16()?).exp();
    }
    let log_opacity = grid.log_opacity.dequantize(r.u16()?).min(0.0);
    let sh = (0..sh_len(degree))
        .map(|_| r.u16().map(|c| SH_BOUNDS.dequantize(c)))
        .collect::<Result<Vec<_>>>()?;
    let gaussian = Gaussian {
        position,
        rotation,
        scale,
        opacity: log_opacity.exp(),
        log_opacity,
        sh_degree: degree,
        sh,
    };
    Ok((
        NodeRecord {
            id,
            parent: (parent != NONE).then_some(parent),
            partition,
            level: level as u32,
            extent,
            children,
            gaussian,
        },
        r.pos,
    ))
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .buf
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::format(format!("truncated buffer at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(min: f32, max: f32) -> QuantGrid {
        let b = Bounds::new(min, max);
        QuantGrid {
            positions: vec![[b; 3]],
            log_scale: Bounds::new(-8.0, 1.0),
            log_opacity: Bounds::new(-6.0, 0.0),
        }
    }

    fn record(g: Gaussian) -> NodeRecord {
        NodeRecord {
            id: 5,
            parent: Some(1),
            partition: 0,
            level: 2,
            extent: 0.75,
            children: vec![11, 12],
            gaussian: g,
        }
    }

    #[test]
    fn endpoint_and_midpoint_codes() {
        let b = Bounds::new(0.0, 10.0);
        assert_eq!(b.quantize(0.0), (0, false));
        assert_eq!(b.quantize(10.0), (65535, false));
        assert_eq!(b.quantize(5.0), (32768, false));
        assert!((b.dequantize(32768) - 5.000_076).abs() < 1e-5);
        assert_eq!(b.quantize(11.0), (65535, true));
        assert_eq!(b.quantize(-1.0), (0, true));
    }

    #[test]
    fn degree_policy() {
        assert_eq!(sh_degree_for_level(0, 8), 1);
        assert_eq!(sh_degree_for_level(2, 8), 2);
        assert_eq!(sh_degree_for_level(8, 8), 3);
        assert_eq!(sh_degree_for_level(0, 0), 3);
        for max in 1..20 {
            for l in 1..=max {
                assert!(sh_degree_for_level(l, max) >= sh_degree_for_level(l - 1, max));
            }
        }
    }

    #[test]
    fn degree_one_record_carries_twelve_sh_values() {
        let mut g = Gaussian::with_color(
            Vector3::new(1.0, 2.0, 3.0),
            UnitQuaternion::identity(),
            Vector3::new(0.1, 0.2, 0.3),
            0.5,
            [0.2, 0.4, 0.6],
        );
        g.sh_degree = 3;
        g.sh.resize(48, 0.1);
        let rec = record(g);
        let mut out = Vec::new();
        encode_record(&rec, &grid(0.0, 10.0), 1, &mut out).unwrap();
        assert_eq!(out.len(), record_len(2, 1));
        assert_eq!(out.len(), RECORD_HEADER_BYTES + 8 + 2 * (11 + 12));
        let (back, used) = decode_record(&out, &grid(0.0, 10.0)).unwrap();
        assert_eq!(used, out.len());
        assert_eq!(back.gaussian.sh.len(), 12);
        assert_eq!(back.children, vec![11, 12]);
        assert_eq!(back.parent, Some(1));
        assert_eq!(back.extent, 0.75);
        assert!(decode_record(&out[..out.len() - 1], &grid(0.0, 10.0)).is_err());
    }

    #[test]
    fn unknown_degree_is_rejected() {
        let rec = record(Gaussian::with_color(
            Vector3::zeros(),
            UnitQuaternion::identity(),
            Vector3::repeat(0.1),
            0.5,
            [0.5; 3],
        ));
        let mut out = Vec::new();
        encode_record(&rec, &grid(-1.0, 1.0), 0, &mut out).unwrap();
        out[17] = 4;
        assert!(matches!(decode_record(&out, &grid(-1.0, 1.0)), Err(Error::Format(_))));
    }

    #[test]
    fn grid_round_trips() {
        let g = grid(-3.0, 7.5);
        let mut bytes = Vec::new();
        g.encode(&mut bytes);
        assert_eq!(bytes.len(), g.encoded_len());
        assert_eq!(QuantGrid::decode(&bytes).unwrap(), (g, bytes.len()));
    }

    #[test]
    fn snapped_values_are_fixed_points() {
        let b = Bounds::new(-123.4, 567.8);
        for i in 0..10_000 {
            let v = -123.4 + i as f32 * 0.069;
            let s = b.snap(v);
            assert_eq!(b.snap(s).to_bits(), s.to_bits());
        }
    }

    proptest! {
        #[test]
        fn round_trip_error_is_within_half_a_step(
            pos in prop::array::uniform3(-50.0f32..50.0),
            sh in prop::collection::vec(-4.0f32..4.0, 48),
            opacity in 0.01f32..1.0,
            level in 0u32..10,
        ) {
            let mut g = Gaussian::with_color(
                Vector3::from(pos),
                UnitQuaternion::from_euler_angles(pos[0], pos[1], pos[2]),
                Vector3::new(0.01, 0.1, 1.0),
                opacity,
                [0.5; 3],
            );
            g.sh_degree = 3;
            g.sh = sh;
            let grid = grid(-50.0, 50.0);
            let degree = sh_degree_for_level(level, 9);
            let mut out = Vec::new();
            encode_record(&record(g.clone()), &grid, degree, &mut out).unwrap();
            let (back, _) = decode_record(&out, &grid).unwrap();
            let step = grid.positions[0][0].step();
            for a in 0..3 {
                prop_assert!(((back.gaussian.position[a] - g.position[a]).abs() as f64) <= step * 0.5 + 1e-5);
            }
            let sh_step = SH_BOUNDS.step();
            for (x, y) in back.gaussian.sh.iter().zip(&g.sh) {
                prop_assert!(((x - y).abs() as f64) <= sh_step * 0.5 + 1e-6);
            }
            prop_assert!((back.gaussian.log_opacity - g.log_opacity).abs() <= 1e-4);
        }
    }
}
