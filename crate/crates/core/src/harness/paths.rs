//! Camera paths: procedural orbits, dollies and random walks, plus a CSV
//! format (`frame,t,px,py,pz,qw,qx,qy,qz`).

use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::Pose;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Orbit,
    Dolly,
    RandomWalk,
    /// Static camera at the orbit start.
    Static,
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orbit" => Ok(PathKind::Orbit),
            "dolly" => Ok(PathKind::Dolly),
            "random-walk" | "walk" => Ok(PathKind::RandomWalk),
            "static" => Ok(PathKind::Static),
            _ => Err(Error::Usage(format!("unknown path kind {s:?}"))),
        }
    }
}

/// Poses sampled at a fixed frame rate; pose `i` is shown at `i / fps`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPath {
    pub fps: f64,
    pub poses: Vec<Pose>,
}

/// Where procedural paths are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub kind: PathKind,
    pub frames: usize,
    pub fps: f64,
    pub center: Vector3<f32>,
    /// Horizontal distance from `center`.
    pub radius: f32,
    /// Eye height above `center`.
    pub height: f32,
    /// Orbit angular speed, or dolly/walk linear speed in radius units per
    /// second.
    pub speed: f32,
    pub seed: u64,
}

impl PathSpec {
    /// A low path around a scene whose footprint has side `side` around
    /// `center`. Orbits start just outside the footprint.
    pub fn for_scene(kind: PathKind, center: Vector3<f32>, side: f32, frames: usize, fps: f64) -> Self {
        PathSpec {
            kind,
            frames,
            fps,
            center,
            radius: side * 0.75,
            height: side * 0.15,
            speed: match kind {
                PathKind::Orbit => 10f32.to_radians(),
                _ => 0.05,
            },
            seed: 0,
        }
    }

    /// Drone-like framing from well outside the footprint, where the whole
    /// scene is in view and coarse levels of the hierarchy are selected.
    pub fn aerial(mut self, side: f32) -> Self {
        self.radius = side * 4.0;
        self.height = side * 2.5;
        self
    }
}

fn up() -> Vector3<f32> {
    Vector3::y()
}

pub fn generate_path(spec: &PathSpec) -> Result<CameraPath> {
    if spec.frames == 0 || !(spec.fps > 0.0) {
        return Err(Error::Usage("path needs frames and a positive fps".into()));
    }
    let dt = (1.0 / spec.fps) as f32;
    let c = spec.center;
    let eye_at = |angle: f32, r: f32| c + Vector3::new(r * angle.cos(), spec.height, r * angle.sin());
    let poses = match spec.kind {
        PathKind::Static => vec![Pose::look_at(eye_at(0.0, spec.radius), c, up()); spec.frames],
        PathKind::Orbit => (0..spec.frames)
            .map(|i| Pose::look_at(eye_at(spec.speed * dt * i as f32, spec.radius), c, up()))
            .collect(),
        PathKind::Dolly => (0..spec.frames)
            .map(|i| {
                let r = spec.radius * (1.0 - spec.speed * dt * i as f32).max(0.05);
                let eye = eye_at(0.0, r);
                Pose::look_at(eye, eye + (c - eye_at(0.0, spec.radius)), up())
            })
            .collect(),
        PathKind::RandomWalk => random_walk(spec, dt),
    };
    Ok(CameraPath { fps: spec.fps, poses })
}

/// Smooth wandering: velocity and heading follow a damped random process.
fn random_walk(spec: &PathSpec, dt: f32) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.center;
    let mut pos = c + Vector3::new(spec.radius, spec.height, 0.0);
    let mut heading = std::f32::consts::PI;
    let mut turn = 0.0f32;
    let speed = spec.speed * spec.radius;
    (0..spec.frames)
        .map(|_| {
            turn = 0.95 * turn + rng.gen_range(-0.4f32..0.4) * dt;
            // Steer back when drifting out of the disc.
            let off = Vector3::new(pos.x - c.x, 0.0, pos.z - c.z);
            if off.norm() > spec.radius {
                let home = (-off.z).atan2(-off.x);
                let diff = (home - heading + std::f32::consts::PI).rem_euclid(std::f32::consts::TAU) - std::f32::consts::PI;
                turn += diff.signum() * 0.5 * dt;
            }
            heading += turn;
            let dir = Vector3::new(heading.cos(), -0.15, heading.sin());
            let pose = Pose::look_at(pos, pos + dir, up());
            pos += Vector3::new(heading.cos(), 0.0, heading.sin()) * speed * dt;
            pose
        })
        .collect()
}

impl CameraPath {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "frame,t,px,py,pz,qw,qx,qy,qz")?;
        for (i, p) in self.poses.iter().enumerate() {
            let q = p.orientation.quaternion();
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{},{}",
                i as f64 / self.fps,
                p.position.x,
                p.position.y,
                p.position.z,
                q.w,
                q.i,
                q.j,
                q.k
            )?;
        }
        Ok(())
    }

    /// Reads the CSV format; the frame rate is recovered from the timestamps.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut poses = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("frame") {
                continue;
            }
            let v: Vec<f32> = line
                .split(',')
                .map(|s| s.trim().parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data {
                    index: n,
                    reason: format!("bad number: {e}"),
                })?;
            if v.len() != 9 {
                return Err(Error::Data {
                    index: n,
                    reason: format!("expected 9 columns, found {}", v.len()),
                });
            }
            let q = Quaternion::new(v[5], v[6], v[7], v[8]);
            if q.norm() < 1e-6 {
                return Err(Error::Data {
                    index: n,
                    reason: "zero quaternion".into(),
                });
            }
            let pose = Pose::new(Vector3::new(v[2], v[3], v[4]), UnitQuaternion::from_quaternion(q));
            if !pose.is_finite() {
                return Err(Error::Data {
                    index: n,
                    reason: "non-finite pose".into(),
                });
            }
            if times.last().is_some_and(|&t: &f64| v[1] as f64 <= t) {
                return Err(Error::Data {
                    index: n,
                    reason: "timestamps must increase".into(),
                });
            }
            times.push(v[1] as f64);
            poses.push(pose);
        }
        if poses.is_empty() {
            return Err(Error::format("empty camera path"));
        }
        let fps = if times.len() > 1 {
            (times.len() - 1) as f64 / (times[times.len() - 1] - times[0])
        } else {
            60.0
        };
        Ok(CameraPath { fps, poses })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PathKind) -> PathSpec {
        PathSpec::for_scene(kind, Vector3::zeros(), 100.0, 120, 60.0)
    }

    #[test]
    fn paths_are_finite_and_deterministic() {
        for kind in [PathKind::Orbit, PathKind::Dolly, PathKind::RandomWalk, PathKind::Static] {
            let p = generate_path(&spec(kind)).unwrap();
            assert_eq!(p.poses.len(), 120);
            assert!(p.poses.iter().all(Pose::is_finite));
            assert_eq!(p, generate_path(&spec(kind)).unwrap());
        }
    }

    #[test]
    fn orbit_keeps_radius_and_looks_at_center() {
        let p = generate_path(&spec(PathKind::Orbit)).unwrap();
        for pose in &p.poses {
            let flat = Vector3::new(pose.position.x, 0.0, pose.position.z);
            assert!((flat.norm() - 75.0).abs() < 1e-3);
            let fwd = pose.orientation * Vector3::z();
            assert!(fwd.dot(&(-pose.position).normalize()) > 0.9999);
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = generate_path(&spec(PathKind::RandomWalk)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = CameraPath::read_csv(buf.as_slice()).unwrap();
        assert!((back.fps - 60.0).abs() < 1e-3);
        for (a, b) in back.poses.iter().zip(&p.poses) {
            assert_eq!(a.position, b.position);
            assert!(a.orientation.angle_to(&b.orientation) < 1e-5);
        }
        assert!(CameraPath::read_csv("0,0,1,2,3,1,0,0\n".as_bytes()).is_err());
        assert!(CameraPath::read_csv("0,1,0,0,0,1,0,0,0\n1,0.5,0,0,0,1,0,0,0\n".as_bytes()).is_err());
    }
}
