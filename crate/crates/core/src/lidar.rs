//! LiDAR scans in the sensor frame (x front, y left, z up), elevation-angle
//! beam slicing to simulate sparser sensors, and the rigid transform into the
//! camera frame.
//!
//! The canonical axis permutation between the two frames is
//! x_cam = -y_lidar, y_cam = -z_lidar, z_cam = x_lidar; see
//! [`Extrinsics::camera_axes`].

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// One LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    /// Forward, meters.
    pub x: f32,
    /// Left, meters.
    pub y: f32,
    /// Up, meters.
    pub z: f32,
    pub reflectance: f32,
}

#[derive(Debug, Clone, Default)]
pub struct LidarScan {
    pub points: Vec<LidarPoint>,
}

impl LidarScan {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Signed elevation angle of a return above the sensor's horizontal plane,
/// in degrees: atan2(z, sqrt(x^2 + y^2)). Positive is up.
pub fn elevation_angle(p: &LidarPoint) -> Result<f64> {
    let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
    if x == 0.0 && y == 0.0 && z == 0.0 {
        return Err(Error::OriginPoint);
    }
    Ok(z.atan2((x * x + y * y).sqrt()).to_degrees())
}

/// Beam bins start at -23.6 degrees in 0.4 degree steps.
pub const BIN_START_DEG: f64 = -23.6;
pub const BIN_STEP_DEG: f64 = 0.4;
pub const BIN_COUNT: usize = 64;

/// A set of half-open elevation-angle intervals [lo, hi), each aligned to the
/// 0.4 degree bin grid; points whose elevation falls in any interval are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSelection {
    pub bin_start_deg: f64,
    pub bin_step_deg: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl BeamSelection {
    pub fn from_intervals(intervals: Vec<(f64, f64)>) -> Self {
        Self { bin_start_deg: BIN_START_DEG, bin_step_deg: BIN_STEP_DEG, intervals }
    }

    /// Select whole bins by index (bin i spans [start + i*step, start + (i+1)*step)).
    pub fn from_bins(bins: &[usize]) -> Self {
        let intervals = bins
            .iter()
            .map(|&i| {
                let lo = BIN_START_DEG + BIN_STEP_DEG * i as f64;
                (lo, lo + BIN_STEP_DEG)
            })
            .collect();
        Self::from_intervals(intervals)
    }

    /// 4-beam preset: [-2.4,-2.0) u [-1.6,-1.2) u [-0.8,-0.4) u [0.0,0.4).
    pub fn four_beam() -> Self {
        Self::from_intervals(vec![(-2.4, -2.0), (-1.6, -1.2), (-0.8, -0.4), (0.0, 0.4)])
    }

    /// 2-beam preset: [-2.4,-2.0) u [-0.8,-0.4).
    pub fn two_beam() -> Self {
        Self::from_intervals(vec![(-2.4, -2.0), (-0.8, -0.4)])
    }

    /// All 64 bins: keeps every return within the sensor's vertical field.
    pub fn full() -> Self {
        let lo = BIN_START_DEG;
        let hi = BIN_START_DEG + BIN_STEP_DEG * BIN_COUNT as f64;
        Self::from_intervals(vec![(lo, hi)])
    }

    pub fn contains(&self, angle_deg: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| angle_deg >= lo && angle_deg < hi)
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Keep exactly the returns whose elevation angle lies in a selected interval,
/// preserving order and reflectance. Returns at the sensor origin are dropped.
pub fn sparsify(scan: &LidarScan, selection: &BeamSelection) -> LidarScan {
    let points = scan
        .points
        .iter()
        .filter(|p| matches!(elevation_angle(p), Ok(a) if selection.contains(a)))
        .copied()
        .collect();
    LidarScan { points }
}

/// Rigid transform applied to LiDAR points to express them in another frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Pure axis permutation from the LiDAR frame (x front, y left, z up)
    /// into the camera frame (x right, y down, z forward), sensors co-located.
    pub fn camera_axes() -> Self {
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            0.0, -1.0, 0.0,
            0.0, 0.0, -1.0,
            1.0, 0.0, 0.0,
        );
        Self { rotation, translation: Vector3::zeros() }
    }

    pub fn from_rows(rows: &[[f64; 4]; 3]) -> Self {
        let rotation = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2],
            rows[1][0], rows[1][1], rows[1][2],
            rows[2][0], rows[2][1], rows[2][2],
        );
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self { rotation, translation }
    }

    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn compose(&self, other: &Extrinsics) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Transform a scan into the camera frame and drop points behind the image
/// plane (camera-frame z <= 0).
pub fn lidar_to_camera(scan: &LidarScan, extrinsics: &Extrinsics) -> PointCloud {
    let mut points = Vec::with_capacity(scan.len());
    for p in &scan.points {
        let q = extrinsics.apply(Vector3::new(p.x as f64, p.y as f64, p.z as f64));
        if q.z > 0.0 {
            points.push(Point3::new(q.x, q.y, q.z));
        }
    }
    PointCloud { points }
}
