//! KITTI-format file I/O: calibration text files, velodyne `.bin` scans,
//! 16-bit PNG depth maps, and the raw cost-volume debug dump.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cost_volume::{CostVolume, GridKind};
use crate::error::{Error, Result};
use crate::geometry::{CameraCalib, DepthMap};
use crate::lidar::{Extrinsics, LidarPoint, LidarScan};

/// Parsed calibration file: the P2/P3 projection matrices of the rectified
/// stereo pair plus the optional LiDAR-to-camera transform.
#[derive(Debug, Clone)]
pub struct CalibFile {
    pub p2: [[f64; 4]; 3],
    pub p3: [[f64; 4]; 3],
    pub tr_velo_to_cam: Option<Extrinsics>,
}

impl CalibFile {
    /// Intrinsics from P2 and the baseline from the P2/P3 horizontal offsets:
    /// b = (P2[0][3] - P3[0][3]) / f_u.
    pub fn stereo_calib(&self) -> Result<CameraCalib> {
        let f_u = self.p2[0][0];
        let f_v = self.p2[1][1];
        let c_u = self.p2[0][2];
        let c_v = self.p2[1][2];
        let baseline = (self.p2[0][3] - self.p3[0][3]) / f_u;
        CameraCalib::new(f_u, f_v, c_u, c_v, baseline)
    }
}

fn parse_matrix_3x4(values: &[f64]) -> Result<[[f64; 4]; 3]> {
    if values.len() != 12 {
        return Err(Error::CalibParse(format!(
            "expected 12 values for a 3x4 matrix, got {}",
            values.len()
        )));
    }
    let mut m = [[0.0; 4]; 3];
    for r in 0..3 {
        for c in 0..4 {
            m[r][c] = values[r * 4 + c];
        }
    }
    Ok(m)
}

/// Parse a KITTI calibration text file: `KEY: v0 v1 ...` lines. P2 and P3
/// are required; Tr_velo_to_cam is picked up when present.
pub fn parse_calib(text: &str) -> Result<CalibFile> {
    let mut p2 = None;
    let mut p3 = None;
    let mut tr = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else { continue };
        let values: std::result::Result<Vec<f64>, _> =
            rest.split_whitespace().map(str::parse::<f64>).collect();
        let Ok(values) = values else {
            return Err(Error::CalibParse(format!("non-numeric entry on line '{key}'")));
        };
        match key.trim() {
            "P2" => p2 = Some(parse_matrix_3x4(&values)?),
            "P3" => p3 = Some(parse_matrix_3x4(&values)?),
            "Tr_velo_to_cam" | "Tr" => {
                let m = parse_matrix_3x4(&values)?;
                tr = Some(Extrinsics::from_rows(&m));
            }
            _ => {}
        }
    }
    Ok(CalibFile {
        p2: p2.ok_or_else(|| Error::CalibParse("missing P2".into()))?,
        p3: p3.ok_or_else(|| Error::CalibParse("missing P3".into()))?,
        tr_velo_to_cam: tr,
    })
}

pub fn read_calib<P: AsRef<Path>>(path: P) -> Result<CalibFile> {
    parse_calib(&fs::read_to_string(path)?)
}

/// Write a calibration file for a synthetic scene: P2 with zero offset, P3
/// offset by -f_u * b, identity rectification, and the canonical LiDAR
/// transform.
pub fn write_calib<P: AsRef<Path>>(path: P, calib: &CameraCalib) -> Result<()> {
    let row = |m: &[[f64; 4]; 3]| {
        m.iter()
            .flat_map(|r| r.iter())
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let p = |tx: f64| {
        [
            [calib.f_u, 0.0, calib.c_u, tx],
            [0.0, calib.f_v, calib.c_v, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    };
    let p2 = p(0.0);
    let p3 = p(-calib.f_u * calib.baseline_m);
    let axes = Extrinsics::camera_axes();
    let r = axes.rotation;
    let tr = [
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], 0.0],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)], 0.0],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)], 0.0],
    ];
    let mut f = fs::File::create(path)?;
    writeln!(f, "P2: {}", row(&p2))?;
    writeln!(f, "P3: {}", row(&p3))?;
    writeln!(f, "R0_rect: 1 0 0 0 1 0 0 0 1")?;
    writeln!(f, "Tr_velo_to_cam: {}", row(&tr))?;
    Ok(())
}

/// Read a velodyne `.bin`: headerless little-endian f32 quadruples
/// (x, y, z, reflectance).
pub fn read_velodyne<P: AsRef<Path>>(path: P) -> Result<LidarScan> {
    let bytes = fs::read(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::ScanParse(format!(
            "file length {} is not a multiple of 16",
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for chunk in bytes.chunks_exact(16) {
        let f = |i: usize| f32::from_le_bytes(chunk[i..i + 4].try_into().unwrap());
        points.push(LidarPoint { x: f(0), y: f(4), z: f(8), reflectance: f(12) });
    }
    Ok(LidarScan { points })
}

pub fn write_velodyne<P: AsRef<Path>>(path: P, scan: &LidarScan) -> Result<()> {
    let mut bytes = Vec::with_capacity(scan.len() * 16);
    for p in &scan.points {
        bytes.extend_from_slice(&p.x.to_le_bytes());
        bytes.extend_from_slice(&p.y.to_le_bytes());
        bytes.extend_from_slice(&p.z.to_le_bytes());
        bytes.extend_from_slice(&p.reflectance.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Read a 16-bit single-channel PNG depth map: depth_m = value / 256,
/// zero meaning invalid.
pub fn read_depth_png<P: AsRef<Path>>(path: P) -> Result<DepthMap> {
    let img = image::open(path)?.into_luma16();
    let mut map = DepthMap::new(img.width() as usize, img.height() as usize);
    for (u, v, px) in img.enumerate_pixels() {
        let raw = px.0[0];
        if raw > 0 {
            map.grid.set(u as usize, v as usize, raw as f64 / 256.0);
        }
    }
    Ok(map)
}

/// Write a depth map as 16-bit PNG. Valid depths are quantized to 1/256 m
/// steps and clamped to the representable range; invalid pixels are zero.
pub fn write_depth_png<P: AsRef<Path>>(path: P, map: &DepthMap) -> Result<()> {
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(
        map.grid.width() as u32,
        map.grid.height() as u32,
    );
    for (u, v, z) in map.grid.iter_valid() {
        let raw = (z * 256.0).round().clamp(1.0, u16::MAX as f64) as u16;
        img.put_pixel(u as u32, v as u32, image::Luma([raw]));
    }
    img.save(path.as_ref())?;
    Ok(())
}

/// Write an 8-bit grayscale PNG.
pub fn write_gray_png<P: AsRef<Path>>(path: P, img: &image::GrayImage) -> Result<()> {
    img.save(path.as_ref())?;
    Ok(())
}

/// Read an image as 8-bit grayscale. Color inputs are converted with the
/// ITU-R 601 luma weights.
pub fn read_gray_png<P: AsRef<Path>>(path: P) -> Result<image::GrayImage> {
    let img = image::open(path)?;
    Ok(to_luma601(&img))
}

pub fn to_luma601(img: &image::DynamicImage) -> image::GrayImage {
    match img {
        image::DynamicImage::ImageLuma8(g) => g.clone(),
        other => {
            let rgb = other.to_rgb8();
            image::GrayImage::from_fn(rgb.width(), rgb.height(), |u, v| {
                let p = rgb.get_pixel(u, v).0;
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                image::Luma([y.round().clamp(0.0, 255.0) as u8])
            })
        }
    }
}

/// Debug dump of a cost volume: 16-byte header of four little-endian u32
/// (width, height, levels, kind: 0 disparity / 1 depth) followed by the raw
/// f32 scores.
pub fn write_volume_dump<P: AsRef<Path>>(path: P, vol: &CostVolume) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    let kind: u32 = match vol.kind() {
        GridKind::Disparity => 0,
        GridKind::Depth => 1,
    };
    for v in [vol.width() as u32, vol.height() as u32, vol.levels() as u32, kind] {
        f.write_all(&v.to_le_bytes())?;
    }
    for s in vol.raw_scores() {
        f.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}
