//! On-disk formats: the portable tensor file ("PTF") used for every
//! intermediate, and 8-bit PNG import/export for visualisation.
//!
//! PTF layout (little-endian): magic `RSAT`, u32 version = 1, u32 channels,
//! u32 height, u32 width, then `channels * height * width` f64 values in
//! `(channel, row, col)` row-major order.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::tensor::{BlurKernel, ImageTensor};

pub const PTF_MAGIC: &[u8; 4] = b"RSAT";
pub const PTF_VERSION: u32 = 1;

pub fn write_ptf(path: &Path, tensor: &ImageTensor) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(PTF_MAGIC)?;
    w.write_u32::<LittleEndian>(PTF_VERSION)?;
    w.write_u32::<LittleEndian>(tensor.channels() as u32)?;
    w.write_u32::<LittleEndian>(tensor.height() as u32)?;
    w.write_u32::<LittleEndian>(tensor.width() as u32)?;
    for &v in tensor.data() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ptf(path: &Path) -> Result<ImageTensor> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PTF_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic:?}, expected {PTF_MAGIC:?}",
            path.display()
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != PTF_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let channels = r.read_u32::<LittleEndian>()? as usize;
    let height = r.read_u32::<LittleEndian>()? as usize;
    let width = r.read_u32::<LittleEndian>()? as usize;
    let len = channels
        .checked_mul(height)
        .and_then(|x| x.checked_mul(width))
        .ok_or_else(|| Error::Format(format!("{}: dimensions overflow", path.display())))?;
    let mut data = vec![0.0f64; len];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    ImageTensor::new(channels, height, width, data)
}

/// Kernels travel as single-channel s x s tensors.
pub fn write_kernel_ptf(path: &Path, kernel: &BlurKernel) -> Result<()> {
    let tensor = ImageTensor::new(1, kernel.size(), kernel.size(), kernel.data().to_vec())?;
    write_ptf(path, &tensor)
}

pub fn read_kernel_ptf(path: &Path) -> Result<BlurKernel> {
    let tensor = read_ptf(path)?;
    let (c, a, b) = tensor.shape();
    if c != 1 || a != b {
        return Err(Error::Format(format!(
            "{}: kernel file must be 1 x s x s, got {c}x{a}x{b}",
            path.display()
        )));
    }
    BlurKernel::new(a, tensor.data().to_vec())
}

/// 8-bit PNG export: clamp to [0, 1], scale by 255, round half-up.
/// Single-channel tensors become grayscale, three-channel become RGB.
pub fn write_png(path: &Path, tensor: &ImageTensor) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let (channels, height, width) = tensor.shape();
    let to_byte = |v: f64| -> u8 { (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8 };
    match channels {
        1 => {
            let img = image::GrayImage::from_fn(width as u32, height as u32, |x, y| {
                image::Luma([to_byte(tensor.get(0, y as usize, x as usize))])
            });
            img.save(path)?;
        }
        3 => {
            let img = image::RgbImage::from_fn(width as u32, height as u32, |x, y| {
                image::Rgb([
                    to_byte(tensor.get(0, y as usize, x as usize)),
                    to_byte(tensor.get(1, y as usize, x as usize)),
                    to_byte(tensor.get(2, y as usize, x as usize)),
                ])
            });
            img.save(path)?;
        }
        other => {
            return Err(Error::Shape(format!(
                "png export supports 1 or 3 channels, got {other}"
            )))
        }
    }
    Ok(())
}

/// PNG import to intensities in [0, 1]; grayscale files load as one channel,
/// everything else as RGB.
pub fn read_png(path: &Path) -> Result<ImageTensor> {
    let img = image::open(path)?;
    let tensor = match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let (w, h) = gray.dimensions();
            ImageTensor::from_fn(1, h as usize, w as usize, |_, r, c| {
                gray.get_pixel(c as u32, r as u32)[0] as f64 / 255.0
            })
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            ImageTensor::from_fn(3, h as usize, w as usize, |ch, r, c| {
                rgb.get_pixel(c as u32, r as u32)[ch] as f64 / 255.0
            })
        }
    };
    Ok(tensor)
}

/// Kernel visualisation: normalised by the peak entry so structure is
/// visible.
pub fn write_kernel_png(path: &Path, kernel: &BlurKernel) -> Result<()> {
    let peak = kernel.data().iter().cloned().fold(f64::MIN, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    let tensor = ImageTensor::new(
        1,
        kernel.size(),
        kernel.size(),
        kernel.data().iter().map(|v| v * scale).collect(),
    )?;
    write_png(path, &tensor)
}

/// All `.ptf` files in a directory, sorted by file name.
pub fn list_ptf_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "ptf"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_ptf_dir(dir: &Path) -> Result<Vec<ImageTensor>> {
    let files = list_ptf_files(dir)?;
    if files.is_empty() {
        return Err(Error::Format(format!(
            "{}: no .ptf files found",
            dir.display()
        )));
    }
    files.iter().map(|p| read_ptf(p)).collect()
}

pub fn read_kernel_dir(dir: &Path) -> Result<Vec<BlurKernel>> {
    let files = list_ptf_files(dir)?;
    if files.is_empty() {
        return Err(Error::Format(format!(
            "{}: no .ptf files found",
            dir.display()
        )));
    }
    files.iter().map(|p| read_kernel_ptf(p)).collect()
}

/// Write one tensor per index under `dir` as `prefix_###.ptf`.
pub fn write_ptf_stack(dir: &Path, prefix: &str, tensors: &[ImageTensor]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, t) in tensors.iter().enumerate() {
        write_ptf(&dir.join(format!("{prefix}_{i:03}.ptf")), t)?;
    }
    Ok(())
}

pub fn write_kernel_stack(dir: &Path, prefix: &str, kernels: &[BlurKernel]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, k) in kernels.iter().enumerate() {
        write_kernel_ptf(&dir.join(format!("{prefix}_{i:03}.ptf")), k)?;
    }
    Ok(())
}
