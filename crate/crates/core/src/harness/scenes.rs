//! Seeded synthetic scenes. World up is +y and the ground is y = 0.

use std::str::FromStr;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Box buildings on a street grid, splats on walls, roofs and ground.
    CityGrid,
    Uniform,
    Clustered,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "city-grid" | "city" => Ok(Layout::CityGrid),
            "uniform" => Ok(Layout::Uniform),
            "clustered" => Ok(Layout::Clustered),
            _ => Err(Error::Usage(format!("unknown layout {s:?}"))),
        }
    }
}

/// Side length of the square scene footprint for `n` splats.
pub fn scene_side(n: usize) -> f32 {
    (n as f32).sqrt().max(4.0)
}

pub fn gen_synthetic_scene(seed: u64, n: usize, layout: Layout) -> Result<Vec<Gaussian>> {
    if n == 0 {
        return Err(Error::Usage("scene needs at least one splat".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 1 {
        return Ok(vec![Gaussian::with_color(
            Vector3::zeros(),
            UnitQuaternion::identity(),
            Vector3::repeat(0.5),
            0.9,
            [0.9, 0.5, 0.2],
        )]);
    }
    Ok(match layout {
        Layout::CityGrid => city(&mut rng, n),
        Layout::Uniform => uniform(&mut rng, n),
        Layout::Clustered => clustered(&mut rng, n),
    })
}

struct Face {
    origin: Vector3<f32>,
    u: Vector3<f32>,
    v: Vector3<f32>,
    color: [f32; 3],
}

impl Face {
    fn area(&self) -> f32 {
        self.u.norm() * self.v.norm()
    }

    fn normal(&self) -> Vector3<f32> {
        self.u.cross(&self.v).normalize()
    }
}

fn city(rng: &mut ChaCha8Rng, n: usize) -> Vec<Gaussian> {
    let side = scene_side(n);
    let blocks = ((side / 12.0).round() as usize).clamp(2, 24);
    let pitch = side / blocks as f32;
    let street = pitch * 0.3;
    let half = side * 0.5;
    let mut faces = vec![Face {
        origin: Vector3::new(-half, 0.0, -half),
        u: Vector3::new(side, 0.0, 0.0),
        v: Vector3::new(0.0, 0.0, side),
        color: [0.35, 0.35, 0.38],
    }];
    for bx in 0..blocks {
        for bz in 0..blocks {
            let lot = pitch - street;
            let w = lot * rng.gen_range(0.6..1.0);
            let d = lot * rng.gen_range(0.6..1.0);
            let h = pitch * rng.gen_range(0.4..2.5);
            let x0 = -half + bx as f32 * pitch + street * 0.5 + (lot - w) * rng.gen::<f32>();
            let z0 = -half + bz as f32 * pitch + street * 0.5 + (lot - d) * rng.gen::<f32>();
            let base = [rng.gen_range(0.3..0.95), rng.gen_range(0.3..0.9), rng.gen_range(0.3..0.85)];
            let shade = |k: f32| base.map(|c| c * k);
            let up = Vector3::new(0.0, h, 0.0);
            let ex = Vector3::new(w, 0.0, 0.0);
            let ez = Vector3::new(0.0, 0.0, d);
            let o = Vector3::new(x0, 0.0, z0);
            faces.push(Face { origin: o, u: up, v: ex, color: shade(0.8) });
            faces.push(Face { origin: o + ez, u: ex, v: up, color: shade(0.8) });
            faces.push(Face { origin: o, u: ez, v: up, color: shade(0.65) });
            faces.push(Face { origin: o + ex, u: up, v: ez, color: shade(0.65) });
            faces.push(Face { origin: o + up, u: ez, v: ex, color: shade(1.0) });
        }
    }
    let total: f32 = faces.iter().map(Face::area).sum();
    let spacing = (total / n as f32).sqrt();
    let pick = WeightedIndex::new(faces.iter().map(Face::area)).expect("faces have area");
    (0..n)
        .map(|_| {
            let f = &faces[pick.sample(rng)];
            let p = f.origin + f.u * rng.gen::<f32>() + f.v * rng.gen::<f32>();
            let s = spacing * rng.gen_range(0.45..0.8);
            let scale = Vector3::new(s, s * rng.gen_range(0.6..1.0), s * 0.1);
            let normal = f.normal();
            let align = UnitQuaternion::rotation_between(&Vector3::z(), &normal)
                .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f32::consts::PI));
            let spin = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.gen_range(0.0..std::f32::consts::PI));
            let jitter = rng.gen_range(0.85..1.15);
            let color = f.color.map(|c| (c * jitter).clamp(0.0, 1.0));
            Gaussian::with_color(p, align * spin, scale, rng.gen_range(0.6..0.95), color)
        })
        .collect()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f32> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0f32..1.0));
    match nalgebra::Unit::try_new(axis, 1e-3) {
        Some(a) => UnitQuaternion::from_rotation_matrix(&Rotation3::from_axis_angle(&a, rng.gen_range(0.0..std::f32::consts::TAU))),
        None => UnitQuaternion::identity(),
    }
}

fn random_splat(rng: &mut ChaCha8Rng, p: Vector3<f32>, s: f32) -> Gaussian {
    let scale = Vector3::new(s * rng.gen_range(0.3..1.0), s * rng.gen_range(0.3..1.0), s * rng.gen_range(0.3..1.0));
    let color = [rng.gen(), rng.gen(), rng.gen()];
    let rot = random_rotation(rng);
    Gaussian::with_color(p, rot, scale, rng.gen_range(0.3..0.95), color)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<Gaussian> {
    let side = scene_side(n);
    let half = side * 0.5;
    let s = side / (n as f32).cbrt() * 0.5;
    (0..n)
        .map(|_| {
            let p = Vector3::new(
                rng.gen_range(-half..half),
                rng.gen_range(0.0..side * 0.25),
                rng.gen_range(-half..half),
            );
            random_splat(rng, p, s)
        })
        .collect()
}

fn clustered(rng: &mut ChaCha8Rng, n: usize) -> Vec<Gaussian> {
    let side = scene_side(n);
    let half = side * 0.5;
    let k = (n / 500).clamp(1, 64);
    let centers: Vec<(Vector3<f32>, f32)> = (0..k)
        .map(|_| {
            let c = Vector3::new(rng.gen_range(-half..half), rng.gen_range(1.0..side * 0.2), rng.gen_range(-half..half));
            (c, side * rng.gen_range(0.02..0.08))
        })
        .collect();
    (0..n)
        .map(|i| {
            let (c, r) = centers[i % k];
            let p = c + Vector3::new(std_normal(rng), std_normal(rng), std_normal(rng)) * r;
            random_splat(rng, p, r * 0.08)
        })
        .collect()
}

/// Box-Muller.
fn std_normal(rng: &mut ChaCha8Rng) -> f32 {
    let u: f32 = rng.gen_range(f32::EPSILON..1.0);
    let v: f32 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f32::consts::TAU * v).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_by_seed() {
        for layout in [Layout::CityGrid, Layout::Uniform, Layout::Clustered] {
            let a = gen_synthetic_scene(5, 2000, layout).unwrap();
            assert_eq!(a.len(), 2000);
            assert_eq!(a, gen_synthetic_scene(5, 2000, layout).unwrap());
            assert_ne!(a, gen_synthetic_scene(6, 2000, layout).unwrap());
            for (i, g) in a.iter().enumerate() {
                g.validate(i).unwrap();
            }
        }
    }

    #[test]
    fn layout_names() {
        assert_eq!("city-grid".parse::<Layout>().unwrap(), Layout::CityGrid);
        assert!("forest".parse::<Layout>().is_err());
        assert!(gen_synthetic_scene(0, 0, Layout::Uniform).is_err());
        assert_eq!(gen_synthetic_scene(0, 1, Layout::CityGrid).unwrap().len(), 1);
    }
}
