use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Linear RGB image plus final per-pixel transmittance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    width: u32,
    height: u32,
    rgb: Vec<f32>,
    transmittance: Vec<f32>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        FrameBuffer {
            width,
            height,
            rgb: vec![0.0; 3 * n],
            transmittance: vec![1.0; n],
        }
    }

    /// Wraps raw interleaved RGB data with full transmittance.
    pub fn from_rgb(width: u32, height: u32, rgb: Vec<f32>) -> Result<Self> {
        if rgb.len() != 3 * (width * height) as usize {
            return Err(Error::Usage("rgb length does not match dimensions".into()));
        }
        Ok(FrameBuffer {
            width,
            height,
            rgb,
            transmittance: vec![1.0; (width * height) as usize],
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgb(&self) -> &[f32] {
        &self.rgb
    }

    pub fn transmittance(&self) -> &[f32] {
        &self.transmittance
    }

    pub fn get(&self, x: u32, y: u32) -> ([f32; 3], f32) {
        let i = (y * self.width + x) as usize;
        ([self.rgb[3 * i], self.rgb[3 * i + 1], self.rgb[3 * i + 2]], self.transmittance[i])
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f32; 3], t: f32) {
        let i = (y * self.width + x) as usize;
        self.rgb[3 * i..3 * i + 3].copy_from_slice(&rgb);
        self.transmittance[i] = t;
    }

    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * self.transmittance.len());
        for px in self.rgb.chunks_exact(3) {
            out.extend(px.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
            out.push(255);
        }
        out
    }

    pub fn write_png<W: Write>(&self, w: W) -> Result<()> {
        let mut enc = png::Encoder::new(w, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        let data: Vec<u8> = self
            .rgb
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        writer.write_image_data(&data).map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_png(f)
    }

    /// `width u32 | height u32 | RGB f32 interleaved`, little-endian.
    pub fn write_raw<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        for v in &self.rgb {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_raw(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_raw(buf: &[u8]) -> Result<Self> {
        let mut r = crate::codec::Reader::new(buf);
        let (w, h) = (r.u32()?, r.u32()?);
        let n = 3 * (w as usize) * (h as usize);
        if r.remaining() != 4 * n {
            return Err(Error::format("raw frame size does not match its header"));
        }
        let rgb = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        FrameBuffer::from_rgb(w, h, rgb)
    }
}

fn check_dims(a: &FrameBuffer, b: &FrameBuffer) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Usage(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

pub const PSNR_CAP: f64 = 99.0;

/// PSNR in dB for images in [0, 1], capped at 99 dB.
pub fn compute_psnr(a: &FrameBuffer, b: &FrameBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let mse = a
        .rgb
        .iter()
        .zip(&b.rgb)
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum::<f64>()
        / a.rgb.len().max(1) as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Mean SSIM over channels with an 11×11 Gaussian window (σ = 1.5).
pub fn compute_ssim(a: &FrameBuffer, b: &FrameBuffer) -> Result<f64> {
    check_dims(a, b)?;
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    let (w, h) = (a.width as usize, a.height as usize);
    let kernel: Vec<f64> = {
        let k: Vec<f64> = (-5i32..=5).map(|i| (-(i * i) as f64 / (2.0 * 1.5 * 1.5)).exp()).collect();
        let s: f64 = k.iter().sum();
        k.into_iter().map(|v| v / s).collect()
    };
    // Separable blur with the window truncated and renormalized at borders.
    let blur = |img: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; w * h];
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (k, kv) in kernel.iter().enumerate() {
                    let xx = x as i64 + k as i64 - 5;
                    if xx >= 0 && (xx as usize) < w {
                        acc += kv * img[y * w + xx as usize];
                        norm += kv;
                    }
                }
                tmp[y * w + x] = acc / norm;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (k, kv) in kernel.iter().enumerate() {
                    let yy = y as i64 + k as i64 - 5;
                    if yy >= 0 && (yy as usize) < h {
                        acc += kv * tmp[yy as usize * w + x];
                        norm += kv;
                    }
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    let mut total = 0.0;
    for c in 0..3 {
        let xa: Vec<f64> = a.rgb.iter().skip(c).step_by(3).map(|&v| v as f64).collect();
        let xb: Vec<f64> = b.rgb.iter().skip(c).step_by(3).map(|&v| v as f64).collect();
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<f64>>();
        let (mu_a, mu_b) = (blur(&xa), blur(&xb));
        let (saa, sbb, sab) = (blur(&prod(&xa, &xa)), blur(&prod(&xb, &xb)), blur(&prod(&xa, &xb)));
        let mut sum = 0.0;
        for i in 0..w * h {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = saa[i] - ma * ma;
            let vb = sbb[i] - mb * mb;
            let cov = sab[i] - ma * mb;
            sum += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
        total += sum / (w * h).max(1) as f64;
    }
    Ok(total / 3.0)
}
