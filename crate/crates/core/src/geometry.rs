//! Pinhole camera model for a rectified stereo pair: disparity/depth
//! conversion, back-projection into a pseudo-LiDAR point cloud, projection
//! back to pixels, and the first-order depth error bound.
//!
//! Camera frame convention: x right, y down, z forward (optical axis).

use crate::error::{Error, Result};

/// Intrinsics of the rectified reference (left) camera plus the stereo baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraCalib {
    /// Horizontal focal length, pixels.
    pub f_u: f64,
    /// Vertical focal length, pixels.
    pub f_v: f64,
    /// Principal point x, pixels.
    pub c_u: f64,
    /// Principal point y, pixels.
    pub c_v: f64,
    /// Stereo baseline, meters.
    pub baseline_m: f64,
}

impl CameraCalib {
    pub fn new(f_u: f64, f_v: f64, c_u: f64, c_v: f64, baseline_m: f64) -> Result<Self> {
        if !(f_u > 0.0) || !(f_v > 0.0) {
            return Err(Error::InvalidCalib(format!(
                "focal lengths must be positive, got f_u={f_u}, f_v={f_v}"
            )));
        }
        if !(baseline_m > 0.0) {
            return Err(Error::InvalidCalib(format!(
                "baseline must be positive, got {baseline_m}"
            )));
        }
        Ok(Self { f_u, f_v, c_u, c_v, baseline_m })
    }

    /// Scalar disparity (pixels) -> depth (meters).
    #[inline]
    pub fn depth_from_disparity(&self, d: f64) -> f64 {
        self.f_u * self.baseline_m / d
    }

    /// Scalar depth (meters) -> disparity (pixels).
    #[inline]
    pub fn disparity_from_depth(&self, z: f64) -> f64 {
        self.f_u * self.baseline_m / z
    }
}

/// Dense per-pixel scalar grid with a validity mask. Shared representation
/// behind [`DepthMap`] and [`DisparityMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl Grid {
    /// All-invalid grid.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    fn idx(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    /// Value at (u, v) if the pixel is valid.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let i = self.idx(u, v);
        self.valid[i].then(|| self.values[i])
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[self.idx(u, v)]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        let i = self.idx(u, v);
        self.values[i] = value;
        self.valid[i] = true;
    }

    #[inline]
    pub fn set_invalid(&mut self, u: usize, v: usize) {
        let i = self.idx(u, v);
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    /// Row-major iteration over valid pixels.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.height).flat_map(move |v| {
            (0..self.width).filter_map(move |u| self.get(u, v).map(|z| (u, v, z)))
        })
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }
}

/// Per-pixel depth z in meters; valid pixels form the evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub grid: Grid,
}

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { grid: Grid::new(width, height) }
    }
}

/// Per-pixel disparity d in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub grid: Grid,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { grid: Grid::new(width, height) }
    }
}

/// Depth validity window applied when converting disparity to depth.
/// Out-of-range pixels become invalid rather than saturated.
#[derive(Debug, Clone, Copy)]
pub struct DepthRange {
    pub min_m: f64,
    pub max_m: f64,
}

impl Default for DepthRange {
    fn default() -> Self {
        Self { min_m: 1.0, max_m: 80.0 }
    }
}

impl DepthRange {
    pub fn contains(&self, z: f64) -> bool {
        z >= self.min_m && z <= self.max_m
    }
}

/// 3D point in the camera frame, optionally tagged with the pixel it
/// was back-projected from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub source_pixel: Option<(usize, usize)>,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, source_pixel: None }
    }
}

/// Ordered collection of 3D points in the camera frame.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// z(u,v) = f_u * b / d(u,v) on valid pixels with d > 0. Pixels whose depth
/// falls outside `range` are marked invalid, as are non-positive disparities.
pub fn disparity_to_depth(
    d_map: &DisparityMap,
    calib: &CameraCalib,
    range: DepthRange,
) -> Result<DepthMap> {
    if d_map.grid.is_empty() {
        return Err(Error::EmptyInput("disparity map has zero dimension"));
    }
    let mut out = DepthMap::new(d_map.grid.width(), d_map.grid.height());
    for (u, v, d) in d_map.grid.iter_valid() {
        if d <= 0.0 {
            continue;
        }
        let z = calib.depth_from_disparity(d);
        if range.contains(z) {
            out.grid.set(u, v, z);
        }
    }
    Ok(out)
}

/// d(u,v) = f_u * b / z(u,v); exact algebraic inverse of [`disparity_to_depth`]
/// on jointly valid pixels.
pub fn depth_to_disparity(z_map: &DepthMap, calib: &CameraCalib) -> Result<DisparityMap> {
    if z_map.grid.is_empty() {
        return Err(Error::EmptyInput("depth map has zero dimension"));
    }
    let mut out = DisparityMap::new(z_map.grid.width(), z_map.grid.height());
    for (u, v, z) in z_map.grid.iter_valid() {
        if z > 0.0 {
            out.grid.set(u, v, calib.disparity_from_depth(z));
        }
    }
    Ok(out)
}

/// Back-project every valid pixel into the camera frame:
/// x = (u - c_u) z / f_u, y = (v - c_v) z / f_v, z unchanged.
/// Points come out in row-major pixel order with their source pixel recorded.
pub fn backproject(z_map: &DepthMap, calib: &CameraCalib) -> PointCloud {
    let mut points = Vec::with_capacity(z_map.grid.valid_count());
    for (u, v, z) in z_map.grid.iter_valid() {
        points.push(Point3 {
            x: (u as f64 - calib.c_u) * z / calib.f_u,
            y: (v as f64 - calib.c_v) * z / calib.f_v,
            z,
            source_pixel: Some((u, v)),
        });
    }
    PointCloud { points }
}

/// A point projected into the image: continuous pixel coordinates plus its
/// camera-frame depth and the index of the source point in the input cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub point_index: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    /// Points with z <= 0 (behind the camera).
    pub dropped_behind: usize,
    /// Points whose nearest pixel falls outside the image.
    pub dropped_outside: usize,
}

/// Project camera-frame points to continuous pixel coordinates
/// u = f_u x / z + c_u, v = f_v y / z + c_v. Points behind the camera or
/// whose nearest pixel lies outside `image_size` are dropped and counted.
/// Rounding to the pixel grid is left to the caller.
pub fn project(points: &PointCloud, calib: &CameraCalib, image_size: (usize, usize)) -> Projection {
    let (width, height) = image_size;
    let mut out = Projection::default();
    for (i, p) in points.points.iter().enumerate() {
        if p.z <= 0.0 {
            out.dropped_behind += 1;
            continue;
        }
        let u = calib.f_u * p.x / p.z + calib.c_u;
        let v = calib.f_v * p.y / p.z + calib.c_v;
        let in_bounds = u >= -0.5
            && u < width as f64 - 0.5
            && v >= -0.5
            && v < height as f64 - 0.5;
        if !in_bounds {
            out.dropped_outside += 1;
            continue;
        }
        out.points.push(ProjectedPoint { u, v, z: p.z, point_index: i });
    }
    out
}

/// First-order depth error for a disparity error `delta_d` at depth `z`:
/// dZ = z^2 * dD / (f_u * b). Grows quadratically with depth.
pub fn depth_error_bound(z: f64, delta_d: f64, calib: &CameraCalib) -> f64 {
    z * z * delta_d / (calib.f_u * calib.baseline_m)
}
