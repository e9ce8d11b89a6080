//! Score volumes over disparity or depth grids: classical SAD block matching,
//! disparity-to-depth remapping by interpolation along the grid axis, and
//! soft-argmax readout.

use image::GrayImage;

use crate::error::{Error, Result};
use crate::geometry::{CameraCalib, DepthMap, DisparityMap, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Disparity,
    Depth,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::Disparity => "disparity",
            GridKind::Depth => "depth",
        }
    }
}

/// Per-pixel score over an ordered grid of disparity or depth levels.
/// Higher scores mean more likely. Scores are stored as f32; reductions
/// accumulate in f64.
#[derive(Debug, Clone)]
pub struct CostVolume {
    width: usize,
    height: usize,
    kind: GridKind,
    grid: Vec<f64>,
    scores: Vec<f32>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, kind: GridKind, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyInput("cost volume grid"));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::DimensionMismatch(
                "cost volume grid must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            kind,
            scores: vec![0.0; width * height * grid.len()],
            grid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn levels(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    #[inline]
    fn base(&self, u: usize, v: usize) -> usize {
        (v * self.width + u) * self.grid.len()
    }

    #[inline]
    pub fn score(&self, u: usize, v: usize, level: usize) -> f32 {
        self.scores[self.base(u, v) + level]
    }

    #[inline]
    pub fn set_score(&mut self, u: usize, v: usize, level: usize, s: f32) {
        let i = self.base(u, v) + level;
        self.scores[i] = s;
    }

    /// Scores for one pixel, contiguous over grid levels.
    #[inline]
    pub fn pixel_scores(&self, u: usize, v: usize) -> &[f32] {
        let b = self.base(u, v);
        &self.scores[b..b + self.grid.len()]
    }

    pub fn raw_scores(&self) -> &[f32] {
        &self.scores
    }

    /// Index of the highest-scoring grid level at a pixel (first on ties).
    pub fn argmax_level(&self, u: usize, v: usize) -> usize {
        let s = self.pixel_scores(u, v);
        let mut best = 0;
        for (i, &x) in s.iter().enumerate() {
            if x > s[best] {
                best = i;
            }
        }
        best
    }

    /// Softmax-weighted average of grid values per pixel, with max-subtraction
    /// for stability. Output kind matches the volume kind; every pixel is valid.
    fn soft_argmax_grid(&self) -> Grid {
        let mut out = Grid::new(self.width, self.height);
        for v in 0..self.height {
            for u in 0..self.width {
                let s = self.pixel_scores(u, v);
                let m = s.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for (g, &x) in self.grid.iter().zip(s) {
                    let w = ((x - m) as f64).exp();
                    num += w * g;
                    den += w;
                }
                out.set(u, v, num / den);
            }
        }
        out
    }

    pub fn soft_argmax_depth(&self) -> Result<DepthMap> {
        match self.kind {
            GridKind::Depth => Ok(DepthMap { grid: self.soft_argmax_grid() }),
            GridKind::Disparity => Err(Error::WrongVolumeKind {
                expected: "depth",
                got: "disparity",
            }),
        }
    }

    pub fn soft_argmax_disparity(&self) -> Result<DisparityMap> {
        match self.kind {
            GridKind::Disparity => Ok(DisparityMap { grid: self.soft_argmax_grid() }),
            GridKind::Depth => Err(Error::WrongVolumeKind {
                expected: "disparity",
                got: "depth",
            }),
        }
    }
}

#[inline]
fn clamp_coord(x: i64, max: usize) -> usize {
    x.clamp(0, max as i64 - 1) as usize
}

#[inline]
fn sample_clamped(img: &GrayImage, u: i64, v: i64) -> i32 {
    let uu = clamp_coord(u, img.width() as usize) as u32;
    let vv = clamp_coord(v, img.height() as usize) as u32;
    img.get_pixel(uu, vv).0[0] as i32
}

/// Windowed sum-of-absolute-differences block matching between a rectified
/// pair, negated so that higher is better. The right image is sampled at
/// horizontal offset u + d. Out-of-image samples clamp to the edge.
///
/// Grid levels are the integer disparities 0..=max_disparity.
pub fn build_disparity_volume(
    left: &GrayImage,
    right: &GrayImage,
    max_disparity: usize,
    window: usize,
) -> Result<CostVolume> {
    if left.dimensions() != right.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "stereo pair sizes differ: {:?} vs {:?}",
            left.dimensions(),
            right.dimensions()
        )));
    }
    let (width, height) = (left.width() as usize, left.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::EmptyInput("stereo images"));
    }
    let grid: Vec<f64> = (0..=max_disparity).map(|d| d as f64).collect();
    let mut vol = CostVolume::new(width, height, GridKind::Disparity, grid)?;
    let half = (window / 2) as i64;

    for v in 0..height {
        for u in 0..width {
            for d in 0..=max_disparity {
                let mut sad = 0i64;
                for dv in -half..=half {
                    for du in -half..=half {
                        let lu = u as i64 + du;
                        let lv = v as i64 + dv;
                        let l = sample_clamped(left, lu, lv);
                        let r = sample_clamped(right, lu + d as i64, lv);
                        sad += (l - r).abs() as i64;
                    }
                }
                vol.set_score(u, v, d, -(sad as f32));
            }
        }
    }
    Ok(vol)
}

/// Resample a disparity score volume onto a depth grid: for each depth level z
/// the score is the linear interpolation of the disparity scores at the
/// continuous disparity d = f_u * b / z. Disparities outside the source grid
/// clamp to the boundary score. Interpolation is 1-D along the grid axis.
pub fn remap_to_depth_volume(
    disp_vol: &CostVolume,
    calib: &CameraCalib,
    depth_grid: &[f64],
) -> Result<CostVolume> {
    if disp_vol.kind() != GridKind::Disparity {
        return Err(Error::WrongVolumeKind { expected: "disparity", got: "depth" });
    }
    let mut out = CostVolume::new(
        disp_vol.width(),
        disp_vol.height(),
        GridKind::Depth,
        depth_grid.to_vec(),
    )?;
    let dgrid = disp_vol.grid();
    let levels = dgrid.len();

    // Precompute the bracketing disparity index and interpolation weight for
    // each depth level; they are shared by every pixel.
    let mut lut: Vec<(usize, usize, f64)> = Vec::with_capacity(depth_grid.len());
    for &z in depth_grid {
        let d = calib.disparity_from_depth(z);
        if d <= dgrid[0] {
            lut.push((0, 0, 0.0));
        } else if d >= dgrid[levels - 1] {
            lut.push((levels - 1, levels - 1, 0.0));
        } else {
            // strictly increasing grid: find i with dgrid[i] <= d < dgrid[i+1]
            let i = match dgrid.binary_search_by(|g| g.partial_cmp(&d).unwrap()) {
                Ok(i) => i,
                Err(ins) => ins - 1,
            };
            let t = (d - dgrid[i]) / (dgrid[i + 1] - dgrid[i]);
            lut.push((i, i + 1, t));
        }
    }

    for v in 0..disp_vol.height() {
        for u in 0..disp_vol.width() {
            let s = disp_vol.pixel_scores(u, v);
            for (zi, &(i0, i1, t)) in lut.iter().enumerate() {
                let score = if t == 0.0 {
                    s[i0] // knot-aligned: bit-exact passthrough
                } else {
                    ((1.0 - t) * s[i0] as f64 + t * s[i1] as f64) as f32
                };
                out.set_score(u, v, zi, score);
            }
        }
    }
    Ok(out)
}

/// Uniform depth grid: `levels` values spaced `step_m` apart starting at `min_m`.
/// The defaults `depth_grid(1.0, 1.0, 80)` span 1 m to 80 m at 1 m spacing.
pub fn depth_grid(min_m: f64, step_m: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|i| min_m + step_m * i as f64).collect()
}
