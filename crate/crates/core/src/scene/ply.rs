//! Reader and writer for the binary splat point layout produced by common
//! 3DGS trainers (`x y z`, `f_dc_*`, `f_rest_*`, `opacity` as logit,
//! `scale_*` as log-scale, `rot_*` as wxyz quaternion).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::gaussian::{logit, sh_basis_count, sigmoid, Gaussian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            other => return Err(Error::format(format!("unknown property type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, ScalarType)>,
}

impl Element {
    fn stride(&self) -> usize {
        self.props.iter().map(|(_, t)| t.size()).sum()
    }
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<Vec<Element>> {
    let mut line = String::new();
    let next_line = |r: &mut R, line: &mut String| -> Result<()> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(Error::format("unexpected end of header"));
        }
        Ok(())
    };
    next_line(r, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(Error::format("missing `ply` magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        next_line(r, &mut line)?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("binary_little_endian") {
                    return Err(Error::format("only binary_little_endian is supported"));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = words.next().ok_or_else(|| Error::format("element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::format("element without count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let ty = words.next().ok_or_else(|| Error::format("property without type"))?;
                if ty == "list" {
                    return Err(Error::format("list properties are not supported"));
                }
                let name = words.next().ok_or_else(|| Error::format("property without name"))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format("property before element"))?;
                el.props.push((name.to_string(), ScalarType::parse(ty)?));
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::format(format!("unexpected header keyword `{other}`"))),
        }
    }
    if !saw_format {
        return Err(Error::format("missing format line"));
    }
    Ok(elements)
}

/// Loads Gaussians from a binary splat point file, applying the usual
/// activations (exp on scale, sigmoid on opacity, normalization on rotation).
pub fn load_splats(path: impl AsRef<Path>) -> Result<Vec<Gaussian>> {
    let file = fs::File::open(path)?;
    read_splats(&mut BufReader::new(file))
}

pub fn read_splats<R: BufRead>(r: &mut R) -> Result<Vec<Gaussian>> {
    let elements = parse_header(r)?;
    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format("no vertex element"))?;
    for e in &elements[..vi] {
        let mut skip = vec![0u8; e.stride() * e.count];
        r.read_exact(&mut skip)
            .map_err(|_| Error::format("truncated element data"))?;
    }
    let vertex = &elements[vi];

    let find = |name: &str| -> Result<usize> {
        vertex
            .props
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::format(format!("missing property `{name}`")))
    };
    let pos = [find("x")?, find("y")?, find("z")?];
    let dc = [find("f_dc_0")?, find("f_dc_1")?, find("f_dc_2")?];
    let opacity = find("opacity")?;
    let scale = [find("scale_0")?, find("scale_1")?, find("scale_2")?];
    let rot = [find("rot_0")?, find("rot_1")?, find("rot_2")?, find("rot_3")?];
    let rest: Vec<usize> = (0..)
        .map_while(|i| vertex.props.iter().position(|(n, _)| *n == format!("f_rest_{i}")))
        .collect();
    let degree = match rest.len() {
        0 => 0u8,
        9 => 1,
        24 => 2,
        45 => 3,
        n => return Err(Error::format(format!("unsupported f_rest count {n}"))),
    };
    let per_channel = sh_basis_count(degree) - 1;

    let mut offsets = Vec::with_capacity(vertex.props.len());
    let mut acc = 0;
    for (_, t) in &vertex.props {
        offsets.push(acc);
        acc += t.size();
    }
    let stride = acc;
    let mut buf = vec![0u8; stride];
    let mut out = Vec::with_capacity(vertex.count);
    for index in 0..vertex.count {
        r.read_exact(&mut buf)
            .map_err(|_| Error::format(format!("truncated data at point {index}")))?;
        let get = |p: usize| vertex.props[p].1.read(&buf[offsets[p]..]) as f32;
        let raw: Vec<f32> = pos
            .iter()
            .chain(&dc)
            .chain(&rest)
            .chain(&scale)
            .chain(&rot)
            .chain(std::iter::once(&opacity))
            .map(|&p| get(p))
            .collect();
        if let Some(bad) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                index,
                reason: format!("non-finite attribute (field {bad})"),
            });
        }
        let q = Quaternion::new(get(rot[0]), get(rot[1]), get(rot[2]), get(rot[3]));
        if q.norm() == 0.0 {
            return Err(Error::Data {
                index,
                reason: "zero rotation quaternion".into(),
            });
        }
        let mut sh = Vec::with_capacity(3 * (per_channel + 1));
        sh.extend(dc.iter().map(|&p| get(p)));
        for k in 0..per_channel {
            for c in 0..3 {
                sh.push(get(rest[c * per_channel + k]));
            }
        }
        let opacity_logit = get(opacity);
        let theta = sigmoid(opacity_logit);
        let g = Gaussian {
            position: Vector3::new(get(pos[0]), get(pos[1]), get(pos[2])),
            rotation: UnitQuaternion::from_quaternion(q),
            scale: Vector3::new(get(scale[0]).exp(), get(scale[1]).exp(), get(scale[2]).exp()),
            opacity: theta,
            log_opacity: theta.ln(),
            sh_degree: degree,
            sh,
        };
        g.validate(index)?;
        out.push(g);
    }
    Ok(out)
}

/// Writes Gaussians in the same layout `load_splats` reads. All points are
/// written at the highest SH degree present; lower degrees are zero-padded.
pub fn write_splats<W: Write>(w: &mut W, gaussians: &[Gaussian]) -> Result<()> {
    let degree = gaussians.iter().map(|g| g.sh_degree).max().unwrap_or(0);
    let per_channel = sh_basis_count(degree) - 1;
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", gaussians.len());
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        header += &format!("property float {name}\n");
    }
    for i in 0..3 * per_channel {
        header += &format!("property float f_rest_{i}\n");
    }
    for name in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        header += &format!("property float {name}\n");
    }
    header += "end_header\n";
    w.write_all(header.as_bytes())?;

    let mut rec: Vec<f32> = Vec::with_capacity(17 + 3 * per_channel);
    for g in gaussians {
        rec.clear();
        rec.extend(g.position.iter());
        rec.extend([0.0, 0.0, 0.0]);
        rec.extend(&g.sh[..3]);
        let have = g.sh.len() / 3 - 1;
        for c in 0..3 {
            for k in 0..per_channel {
                rec.push(if k < have { g.sh[3 * (k + 1) + c] } else { 0.0 });
            }
        }
        rec.push(logit(g.opacity.min(1.0 - 1e-7)));
        rec.extend(g.scale.iter().map(|s| s.ln()));
        let q = g.rotation.quaternion();
        rec.extend([q.w, q.i, q.j, q.k]);
        for v in &rec {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_splats(path: impl AsRef<Path>, gaussians: &[Gaussian]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_splats(&mut f, gaussians)?;
    f.flush()?;
    Ok(())
}
