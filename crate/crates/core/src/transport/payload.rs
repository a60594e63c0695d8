//! Payload formats.
//!
//! POSE: position 3 × f32 | orientation (w, x, y, z) 4 × f32.
//!
//! CONFIG: tau f32 | window u32 | reuse threshold u32 | ship parents u8 |
//! LUT intervals u32 | alpha min f32 | max level u32 | focal f32 |
//! width u32 | height u32 | near f32 | far f32 | quantization grid.
//!
//! INIT_CUT / DELTA_CUT: added count u32 | node records | cut membership,
//! encoded as a diff against the previous window's cut (none for INIT_CUT).

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::camera::{Intrinsics, Pose};
use crate::codec::{decode_record, encode_record, record_len, sh_degree_for_level, QuantGrid, Reader};
use crate::error::{Error, Result};
use crate::lod::Cut;
use crate::management::{DeltaCut, ManagementConfig};

pub fn encode_pose(pose: &Pose) -> Vec<u8> {
    let q = pose.orientation.quaternion();
    let mut out = Vec::with_capacity(28);
    for v in pose.position.iter().chain([q.w, q.i, q.j, q.k].iter()) {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_pose(buf: &[u8]) -> Result<Pose> {
    if buf.len() != 28 {
        return Err(Error::format(format!("pose payload has {} bytes", buf.len())));
    }
    let mut r = Reader::new(buf);
    let position = Vector3::new(r.f32()?, r.f32()?, r.f32()?);
    let q = Quaternion::new(r.f32()?, r.f32()?, r.f32()?, r.f32()?);
    let pose = Pose::new(position, UnitQuaternion::from_quaternion(q));
    if !pose.is_finite() {
        return Err(Error::format("non-finite pose"));
    }
    Ok(pose)
}

/// Session parameters the cloud announces before the first cut.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub tau: f32,
    pub management: ManagementConfig,
    pub lut_m: u32,
    pub alpha_min: f32,
    pub max_level: u32,
    pub intrinsics: Intrinsics,
    pub grid: QuantGrid,
}

impl SessionConfig {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(self.tau.to_le_bytes());
        out.extend(self.management.window.to_le_bytes());
        out.extend(self.management.reuse_threshold.to_le_bytes());
        out.push(u8::from(self.management.ship_parents));
        out.extend(self.lut_m.to_le_bytes());
        out.extend(self.alpha_min.to_le_bytes());
        out.extend(self.max_level.to_le_bytes());
        let i = &self.intrinsics;
        out.extend(i.focal.to_le_bytes());
        out.extend(i.width.to_le_bytes());
        out.extend(i.height.to_le_bytes());
        out.extend(i.near.to_le_bytes());
        out.extend(i.far.to_le_bytes());
        self.grid.encode(&mut out);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let tau = r.f32()?;
        let window = r.u32()?;
        let reuse_threshold = r.u32()?;
        let ship_parents = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(Error::format(format!("bad ship-parents flag {v}"))),
        };
        let lut_m = r.u32()?;
        let alpha_min = r.f32()?;
        let max_level = r.u32()?;
        let intrinsics = Intrinsics {
            focal: r.f32()?,
            width: r.u32()?,
            height: r.u32()?,
            near: r.f32()?,
            far: r.f32()?,
        };
        let (grid, used) = QuantGrid::decode(&buf[r.pos..])?;
        if r.pos + used != buf.len() {
            return Err(Error::format("trailing bytes after config"));
        }
        if !(tau > 0.0) || window == 0 {
            return Err(Error::format("invalid session parameters"));
        }
        Ok(SessionConfig {
            tau,
            management: ManagementConfig {
                window,
                reuse_threshold,
                ship_parents,
            },
            lut_m,
            alpha_min,
            max_level,
            intrinsics,
            grid,
        })
    }
}

/// Exact payload size of an encoded delta.
pub fn delta_payload_len(delta: &DeltaCut, max_level: u32, base: Option<&Cut>) -> usize {
    4 + delta
        .added
        .iter()
        .map(|r| {
            let d = sh_degree_for_level(r.level, max_level).min(r.gaussian.sh_degree);
            record_len(r.children.len(), d)
        })
        .sum::<usize>()
        + delta.cut.diff_encoded_len(base)
}

/// Encodes a delta; returns the payload and the number of clamped values.
/// `base` is the cut sent in the previous window.
pub fn encode_delta(delta: &DeltaCut, grid: &QuantGrid, max_level: u32, base: Option<&Cut>) -> Result<(Vec<u8>, usize)> {
    let mut out = Vec::with_capacity(delta_payload_len(delta, max_level, base));
    out.extend((delta.added.len() as u32).to_le_bytes());
    let mut clamped = 0;
    for rec in &delta.added {
        clamped += encode_record(rec, grid, sh_degree_for_level(rec.level, max_level), &mut out)?;
    }
    delta.cut.encode_diff(base, &mut out);
    Ok((out, clamped))
}

pub fn decode_delta(window: u32, buf: &[u8], grid: &QuantGrid, base: Option<&Cut>) -> Result<DeltaCut> {
    let mut r = Reader::new(buf);
    let count = r.u32()? as usize;
    let mut added = Vec::with_capacity(count.min(buf.len() / crate::codec::RECORD_HEADER_BYTES + 1));
    let mut pos = r.pos;
    for _ in 0..count {
        let (rec, used) = decode_record(&buf[pos..], grid)?;
        pos += used;
        added.push(rec);
    }
    let (cut, used) = Cut::decode_diff(&buf[pos..], base)?;
    if pos + used != buf.len() {
        return Err(Error::format("trailing bytes after cut"));
    }
    Ok(DeltaCut { window, added, cut })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{publish, NodeRecord};
    use crate::lod::find_cut_exhaustive;
    use crate::management::ManagementTable;

    #[test]
    fn pose_round_trip() {
        let p = Pose::new(Vector3::new(1.0, -2.0, 3.5), UnitQuaternion::from_euler_angles(0.3, 0.2, 0.1));
        let back = decode_pose(&encode_pose(&p)).unwrap();
        assert_eq!(back.position, p.position);
        assert!(back.orientation.angle_to(&p.orientation) < 1e-6);
        assert!(decode_pose(&[0; 27]).is_err());
    }

    #[test]
    fn config_round_trip() {
        let (tree, _) = crate::lod::fixtures::five_node_tree();
        let (tree, grid) = publish(tree);
        let cfg = SessionConfig {
            tau: 3.0,
            management: ManagementConfig::default(),
            lut_m: 32,
            alpha_min: 1.0 / 255.0,
            max_level: tree.max_level(),
            intrinsics: Intrinsics::from_fov(960, 540, 60.0),
            grid,
        };
        assert_eq!(SessionConfig::decode(&cfg.encode()).unwrap(), cfg);
    }

    #[test]
    fn delta_size_matches_formula_and_decodes() {
        let (tree, _) = crate::lod::fixtures::five_node_tree();
        let (tree, grid) = publish(tree);
        let cam = crate::lod::fixtures::camera_at(10.0);
        let (cut, _) = find_cut_exhaustive(&tree, &cam, 3.0, 0);
        let mut table = ManagementTable::new(ManagementConfig::default());
        let delta = table.cloud_update(&cut, &tree);
        let (bytes, clamped) = encode_delta(&delta, &grid, tree.max_level(), None).unwrap();
        assert_eq!(clamped, 0);
        assert_eq!(bytes.len(), delta_payload_len(&delta, tree.max_level(), None));
        let back = decode_delta(0, &bytes, &grid, None).unwrap();
        assert_eq!(back.cut.id_set(), delta.cut.id_set());
        let ids: Vec<_> = back.added.iter().map(|r: &NodeRecord| r.id).collect();
        assert_eq!(ids, delta.added.iter().map(|r| r.id).collect::<Vec<_>>());
        for (a, b) in back.added.iter().zip(&delta.added) {
            assert_eq!(a.gaussian.position, b.gaussian.position);
            assert_eq!(a.extent, b.extent);
        }
        let empty = DeltaCut {
            window: 3,
            added: Vec::new(),
            cut: Cut::new(3, 3.0, Vec::new()),
        };
        let (bytes, _) = encode_delta(&empty, &grid, 2, None).unwrap();
        assert!(decode_delta(3, &bytes, &grid, None).unwrap().added.is_empty());
    }

    #[test]
    fn unchanged_cut_costs_a_fixed_header() {
        let (tree, _) = crate::lod::fixtures::five_node_tree();
        let (tree, grid) = publish(tree);
        let cam = crate::lod::fixtures::camera_at(10.0);
        let (cut, _) = find_cut_exhaustive(&tree, &cam, 3.0, 0);
        let mut table = ManagementTable::new(ManagementConfig::default());
        let first = table.cloud_update(&cut, &tree);
        let second = table.cloud_update(&cut, &tree);
        assert!(second.added.is_empty());
        let (bytes, _) = encode_delta(&second, &grid, tree.max_level(), Some(&first.cut)).unwrap();
        assert_eq!(bytes.len(), 4 + 16);
        let back = decode_delta(1, &bytes, &grid, Some(&first.cut)).unwrap();
        assert_eq!(back.cut.id_set(), cut.id_set());
        // Against the wrong base the diff is rejected or yields a different cut.
        assert!(!cut.is_empty());
        let other = Cut::new(0, 3.0, Vec::new());
        assert!(decode_delta(1, &bytes, &grid, Some(&other)).map_or(true, |d| d.cut.id_set() != cut.id_set()));
    }
}
