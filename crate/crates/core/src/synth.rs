//! Deterministic synthetic scenes: procedurally textured fronto-parallel
//! rectangles over a ground plane, rendered into a consistent stereo pair,
//! ground-truth depth map, and ray-cast LiDAR scan. Everything is a pure
//! function of the scene spec, so identical seeds give identical bytes.

use image::GrayImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{CameraCalib, DepthMap, DepthRange};
use crate::lidar::{LidarPoint, LidarScan, BIN_COUNT, BIN_START_DEG, BIN_STEP_DEG};

/// Fronto-parallel textured rectangle in the camera frame (x right, y down,
/// z forward), plus the depth corruption applied to its pixels.
#[derive(Debug, Clone, Copy)]
pub struct RectObject {
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub depth_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub texture_seed: u64,
    pub bias_m: f64,
    pub noise_sigma_m: f64,
}

/// Horizontal plane below the camera at y = height_m (y points down).
#[derive(Debug, Clone, Copy)]
pub struct GroundPlane {
    pub height_m: f64,
    pub texture_seed: u64,
    pub bias_m: f64,
    pub noise_sigma_m: f64,
}

impl Default for GroundPlane {
    fn default() -> Self {
        Self { height_m: 1.65, texture_seed: 1, bias_m: 0.0, noise_sigma_m: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub calib: CameraCalib,
    pub objects: Vec<RectObject>,
    pub ground: Option<GroundPlane>,
    pub depth_range: DepthRange,
    /// LiDAR azimuth sweep: (min_deg, max_deg, step_deg).
    pub lidar_azimuth_deg: (f64, f64, f64),
    pub seed: u64,
}

impl SceneSpec {
    /// Camera with KITTI-like focal length scaled to the raster size.
    pub fn basic(width: usize, height: usize, seed: u64) -> Self {
        let calib = CameraCalib::new(
            721.0 * width as f64 / 1242.0,
            721.0 * width as f64 / 1242.0,
            width as f64 / 2.0,
            height as f64 / 2.0,
            0.54,
        )
        .expect("valid calib");
        Self {
            width,
            height,
            calib,
            objects: Vec::new(),
            ground: Some(GroundPlane::default()),
            depth_range: DepthRange::default(),
            lidar_azimuth_deg: (-40.0, 40.0, 0.08),
            seed,
        }
    }
}

/// Per-pixel surface label: object index, or one of the sentinels below.
pub const LABEL_GROUND: i32 = -1;
pub const LABEL_NONE: i32 = -2;

#[derive(Debug, Clone)]
pub struct Scene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub depth: DepthMap,
    /// Row-major per-pixel surface labels (length width * height).
    pub labels: Vec<i32>,
    pub scan: LidarScan,
}

fn hash01(seed: u64, ix: i64, iy: i64) -> f64 {
    let mut h = seed
        ^ (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear lattice value noise in [0, 1).
fn value_noise(seed: u64, x: f64, y: f64, cell: f64) -> f64 {
    let fx = x / cell;
    let fy = y / cell;
    let ix = fx.floor();
    let iy = fy.floor();
    let tx = smoothstep(fx - ix);
    let ty = smoothstep(fy - iy);
    let (ix, iy) = (ix as i64, iy as i64);
    let v00 = hash01(seed, ix, iy);
    let v10 = hash01(seed, ix + 1, iy);
    let v01 = hash01(seed, ix, iy + 1);
    let v11 = hash01(seed, ix + 1, iy + 1);
    let a = v00 + (v10 - v00) * tx;
    let b = v01 + (v11 - v01) * tx;
    a + (b - a) * ty
}

/// Three-octave procedural texture, quantized to 8 bits at the call site.
fn texture(seed: u64, x: f64, y: f64) -> f64 {
    0.5 * value_noise(seed, x, y, 0.8)
        + 0.3 * value_noise(seed.wrapping_add(101), x, y, 0.2)
        + 0.2 * value_noise(seed.wrapping_add(202), x, y, 0.05)
}

struct Hit {
    z: f64,
    label: i32,
    shade: f64,
}

/// Closest surface along the pixel ray of a camera whose origin sits at
/// world x = origin_x (left camera at 0). Textures are functions of world
/// position, so both views sample the same values at corresponding points.
fn cast_pixel(spec: &SceneSpec, origin_x: f64, u: f64, v: f64) -> Option<Hit> {
    let xr = (u - spec.calib.c_u) / spec.calib.f_u;
    let yr = (v - spec.calib.c_v) / spec.calib.f_v;
    let mut best: Option<Hit> = None;

    for (i, obj) in spec.objects.iter().enumerate() {
        let z = obj.depth_m;
        let x = origin_x + xr * z;
        let y = yr * z;
        if (x - obj.center_x_m).abs() <= obj.width_m / 2.0
            && (y - obj.center_y_m).abs() <= obj.height_m / 2.0
            && best.as_ref().map_or(true, |h| z < h.z)
        {
            best = Some(Hit { z, label: i as i32, shade: texture(obj.texture_seed, x, y) });
        }
    }

    if let Some(g) = spec.ground {
        if yr > 1e-9 {
            let z = g.height_m / yr;
            if z > 0.0 && best.as_ref().map_or(true, |h| z < h.z) {
                let x = origin_x + xr * z;
                best = Some(Hit {
                    z,
                    label: LABEL_GROUND,
                    shade: texture(g.texture_seed, x, z),
                });
            }
        }
    }
    best
}

/// Closest surface hit by a LiDAR ray with elevation theta and azimuth phi
/// (degrees), sensor co-located with the left camera. Returns the camera-frame
/// range multiplier t; the lidar-frame point is t * dir_lidar.
fn cast_ray(spec: &SceneSpec, theta_deg: f64, phi_deg: f64) -> Option<f64> {
    let theta = theta_deg.to_radians();
    let phi = phi_deg.to_radians();
    // camera-frame direction of the lidar ray
    let dir_x = -theta.cos() * phi.sin();
    let dir_y = -theta.sin();
    let dir_z = theta.cos() * phi.cos();
    if dir_z <= 1e-9 {
        return None;
    }
    let mut best_t: Option<f64> = None;

    for obj in &spec.objects {
        let t = obj.depth_m / dir_z;
        let x = t * dir_x;
        let y = t * dir_y;
        if (x - obj.center_x_m).abs() <= obj.width_m / 2.0
            && (y - obj.center_y_m).abs() <= obj.height_m / 2.0
            && best_t.map_or(true, |b| t < b)
        {
            best_t = Some(t);
        }
    }
    if let Some(g) = spec.ground {
        if dir_y > 1e-9 {
            let t = g.height_m / dir_y;
            if best_t.map_or(true, |b| t < b) {
                best_t = Some(t);
            }
        }
    }
    // drop hits beyond the working range
    best_t.filter(|t| {
        let z = t * dir_z;
        z > 0.1 && z <= spec.depth_range.max_m
    })
}

/// Render the scene: stereo pair, true depth, per-pixel labels, and a 64-beam
/// LiDAR scan ray-cast against the same geometry. The second camera sits at
/// world x = -b so that content at left pixel u reappears at right pixel
/// u + d with d = f_u b / z.
pub fn render(spec: &SceneSpec) -> Scene {
    let (w, h) = (spec.width, spec.height);
    let mut left = GrayImage::new(w as u32, h as u32);
    let mut right = GrayImage::new(w as u32, h as u32);
    let mut depth = DepthMap::new(w, h);
    let mut labels = vec![LABEL_NONE; w * h];

    for v in 0..h {
        for u in 0..w {
            let l = cast_pixel(spec, 0.0, u as f64, v as f64);
            let shade_l = match &l {
                Some(hit) => hit.shade,
                None => 0.5,
            };
            left.put_pixel(u as u32, v as u32, image::Luma([(shade_l * 255.0) as u8]));
            if let Some(hit) = l {
                if spec.depth_range.contains(hit.z) {
                    depth.grid.set(u, v, hit.z);
                    labels[v * w + u] = hit.label;
                }
            }

            let shade_r = cast_pixel(spec, -spec.calib.baseline_m, u as f64, v as f64)
                .map_or(0.5, |hit| hit.shade);
            right.put_pixel(u as u32, v as u32, image::Luma([(shade_r * 255.0) as u8]));
        }
    }

    let mut scan = LidarScan::default();
    let (az_min, az_max, az_step) = spec.lidar_azimuth_deg;
    let steps = ((az_max - az_min) / az_step).floor() as usize;
    for beam in 0..BIN_COUNT {
        let theta = BIN_START_DEG + BIN_STEP_DEG * beam as f64 + BIN_STEP_DEG / 2.0;
        for s in 0..=steps {
            let phi = az_min + az_step * s as f64;
            if let Some(t) = cast_ray(spec, theta, phi) {
                let th = theta.to_radians();
                let ph = phi.to_radians();
                scan.points.push(LidarPoint {
                    x: (t * th.cos() * ph.cos()) as f32,
                    y: (t * th.cos() * ph.sin()) as f32,
                    z: (t * th.sin()) as f32,
                    reflectance: 1.0,
                });
            }
        }
    }

    Scene { left, right, depth, labels, scan }
}

/// Apply each surface's constant depth bias plus zero-mean Gaussian noise,
/// driven by the scene seed. Pixels without a surface label pass through.
pub fn corrupt(true_depth: &DepthMap, labels: &[i32], spec: &SceneSpec) -> DepthMap {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_C0DE_D15E_A5E5);
    let mut out = DepthMap::new(true_depth.grid.width(), true_depth.grid.height());
    let w = true_depth.grid.width();
    for (u, v, z) in true_depth.grid.iter_valid() {
        let (bias, sigma) = match labels[v * w + u] {
            LABEL_GROUND => spec
                .ground
                .map_or((0.0, 0.0), |g| (g.bias_m, g.noise_sigma_m)),
            LABEL_NONE => (0.0, 0.0),
            i => {
                let o = &spec.objects[i as usize];
                (o.bias_m, o.noise_sigma_m)
            }
        };
        let noise = if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma > 0");
            normal.sample(&mut rng)
        } else {
            0.0
        };
        out.grid.set(u, v, (z + bias + noise).max(0.01));
    }
    out
}

/// Corrupt depths through disparity-domain noise: d' = d + N(0, sigma_px),
/// z' = f_u b / d'. The induced depth error grows as z^2 (the stereo
/// quantization error model). Disparity is floored so depths stay finite.
pub fn corrupt_disparity_noise(
    true_depth: &DepthMap,
    calib: &CameraCalib,
    sigma_px: f64,
    seed: u64,
) -> DepthMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15F_A11E_D0_u64);
    let normal = Normal::new(0.0, sigma_px).expect("sigma > 0");
    let fub = calib.f_u * calib.baseline_m;
    let mut out = DepthMap::new(true_depth.grid.width(), true_depth.grid.height());
    for (u, v, z) in true_depth.grid.iter_valid() {
        let d = (fub / z + normal.sample(&mut rng)).max(fub / 500.0);
        out.grid.set(u, v, fub / d);
    }
    out
}

/// Corrupt depths through a smooth disparity-domain bias field:
/// d' = d + bias_px * s(u, v) with s a low-frequency seeded field in
/// [0.5, 1.5). The induced depth error grows as z^2 like stereo's, and its
/// spatial smoothness mimics the systematic (not per-pixel) nature of
/// far-range stereo degradation. Disparity is floored so depths stay finite.
pub fn corrupt_disparity_bias(
    true_depth: &DepthMap,
    calib: &CameraCalib,
    bias_px: f64,
    seed: u64,
) -> DepthMap {
    let fub = calib.f_u * calib.baseline_m;
    let mut out = DepthMap::new(true_depth.grid.width(), true_depth.grid.height());
    for (u, v, z) in true_depth.grid.iter_valid() {
        let s = 0.5 + value_noise(seed, u as f64, v as f64, 48.0);
        let d = (fub / z + bias_px * s).max(fub / 500.0);
        out.grid.set(u, v, fub / d);
    }
    out
}

/// One biased object on a textured ground plane; the stock scene used by the
/// CLI and the end-to-end tests.
pub fn demo_scene(width: usize, height: usize, seed: u64, object_bias_m: f64) -> SceneSpec {
    let mut spec = SceneSpec::basic(width, height, seed);
    spec.objects.push(RectObject {
        center_x_m: 0.0,
        center_y_m: 0.4,
        depth_m: 20.0,
        width_m: 3.0,
        height_m: 1.8,
        texture_seed: 7,
        bias_m: object_bias_m,
        noise_sigma_m: 0.0,
    });
    if let Some(g) = spec.ground.as_mut() {
        g.noise_sigma_m = 0.05;
    }
    spec
}
