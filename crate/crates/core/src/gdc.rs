//! Graph-based depth correction: match sparse exact LiDAR depths onto the
//! stereo depth map (landmarks), then solve the diffusion problem that pins
//! landmark depths and minimizes the graph reconstruction residual over the
//! remaining points.

use std::collections::HashMap;

use log::info;

use crate::error::{Error, Result};
use crate::geometry::{backproject, project, CameraCalib, DepthMap, PointCloud};
use crate::knn::{build_knn, solve_weights, KnnWeights};
use crate::lidar::{lidar_to_camera, sparsify, BeamSelection, Extrinsics, LidarScan};

/// LiDAR depths matched to stereo pixels. `point_indices` refer to the
/// pseudo-LiDAR point ordering produced by [`backproject`] (row-major over
/// valid pixels); `depths` are the corresponding exact LiDAR values.
#[derive(Debug, Clone, Default)]
pub struct LandmarkSet {
    pub pixels: Vec<(usize, usize)>,
    pub depths: Vec<f64>,
    pub point_indices: Vec<usize>,
    /// Count of pseudo-LiDAR points without a landmark.
    pub unmatched: usize,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

/// Project LiDAR points (camera frame) onto the stereo depth map and bind
/// them to valid pixels. Pixels are assigned by nearest-integer rounding;
/// when several LiDAR returns land on one pixel the smallest depth wins
/// (closest surface). Points off-image or on invalid stereo pixels are
/// dropped. An empty result is not an error; the caller decides to skip.
pub fn match_landmarks(
    lidar_cam: &PointCloud,
    z_map: &DepthMap,
    calib: &CameraCalib,
) -> LandmarkSet {
    let width = z_map.grid.width();
    let height = z_map.grid.height();

    // rank of each valid pixel in row-major order = pseudo-LiDAR point index
    let mut rank = vec![usize::MAX; width * height];
    for (idx, (u, v, _)) in z_map.grid.iter_valid().enumerate() {
        rank[v * width + u] = idx;
    }
    let total_points = z_map.grid.valid_count();

    let proj = project(lidar_cam, calib, (width, height));
    let mut best: HashMap<(usize, usize), f64> = HashMap::new();
    for pp in &proj.points {
        let u = pp.u.round() as usize;
        let v = pp.v.round() as usize;
        if u >= width || v >= height || !z_map.grid.is_valid(u, v) {
            continue;
        }
        best.entry((u, v))
            .and_modify(|z| {
                if pp.z < *z {
                    *z = pp.z;
                }
            })
            .or_insert(pp.z);
    }

    let mut entries: Vec<((usize, usize), f64)> = best.into_iter().collect();
    entries.sort_by_key(|&((u, v), _)| (v, u));

    let mut out = LandmarkSet::default();
    for ((u, v), z) in entries {
        out.pixels.push((u, v));
        out.depths.push(z);
        out.point_indices.push(rank[v * width + u]);
    }
    out.unmatched = total_points - out.len();
    out
}

/// Result of a correction solve. Depths are in the pseudo-LiDAR point order;
/// `map` is the same result re-assembled onto pixels via each point's source
/// pixel. Landmark entries equal their LiDAR depths exactly.
#[derive(Debug, Clone)]
pub struct CorrectedDepth {
    pub depths: Vec<f64>,
    pub map: DepthMap,
    /// Final ||(I - W) z'||.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub landmark_flags: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative residual tolerance of the iterative solve.
    pub tol: f64,
    /// Iteration cap; defaults to 10 * (free point count) when None.
    pub max_iter: Option<usize>,
    /// Tikhonov damping on the correction: minimizes
    /// ||(I - W) z'||^2 + damp^2 ||z_free - z_stereo_free||^2.
    /// Zero gives the pure least-squares solution. On depth maps with large
    /// flat regions the graph has near-singular smooth modes, and the pure
    /// minimizer can ride them into huge global tilts; a small damp keeps the
    /// well-determined corrections near landmarks while suppressing those.
    pub damp: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: None, damp: 0.0 }
    }
}

/// (I - W) y over all points.
fn apply_a(w: &KnnWeights, y: &[f64], out: &mut [f64]) {
    for i in 0..w.n_points {
        let mut acc = y[i];
        for (&j, &wij) in w.neighbors[i].iter().zip(&w.weights[i]) {
            acc -= wij * y[j];
        }
        out[i] = acc;
    }
}

/// (I - W)^T r over all points.
fn apply_at(w: &KnnWeights, r: &[f64], out: &mut [f64]) {
    out.copy_from_slice(r);
    for i in 0..w.n_points {
        let ri = r[i];
        for (&j, &wij) in w.neighbors[i].iter().zip(&w.weights[i]) {
            out[j] -= wij * ri;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pin landmark depths and solve for the free depths minimizing
/// ||(I - W) [G; z_free]||^2, by (optionally damped) LSQR warm-started at the
/// uncorrected stereo depths. Non-convergence is reported through the flag,
/// never silently.
pub fn correct(
    z_map: &DepthMap,
    weights: &KnnWeights,
    landmarks: &LandmarkSet,
    opts: SolveOptions,
) -> Result<CorrectedDepth> {
    let n_total = weights.n_points;
    let z: Vec<f64> = z_map.grid.iter_valid().map(|(_, _, z)| z).collect();
    if z.len() != n_total {
        return Err(Error::DimensionMismatch(format!(
            "depth map has {} valid pixels but weights cover {} points",
            z.len(),
            n_total
        )));
    }
    if landmarks.is_empty() {
        return Err(Error::NoLandmarks);
    }

    let mut is_landmark = vec![false; n_total];
    for (&idx, &g) in landmarks.point_indices.iter().zip(&landmarks.depths) {
        if idx >= n_total {
            return Err(Error::DimensionMismatch(format!(
                "landmark index {idx} out of range ({n_total} points)"
            )));
        }
        is_landmark[idx] = true;
        let _ = g;
    }
    let free: Vec<usize> = (0..n_total).filter(|&i| !is_landmark[i]).collect();
    let m = free.len();

    // z' with landmarks pinned
    let mut z_pinned = z.clone();
    for (&idx, &g) in landmarks.point_indices.iter().zip(&landmarks.depths) {
        z_pinned[idx] = g;
    }

    let finish = |depths: Vec<f64>, residual, iterations, converged| {
        let mut map = DepthMap::new(z_map.grid.width(), z_map.grid.height());
        for ((u, v, _), &zc) in z_map.grid.iter_valid().zip(&depths) {
            map.grid.set(u, v, zc);
        }
        CorrectedDepth {
            depths,
            map,
            residual,
            iterations,
            converged,
            landmark_flags: is_landmark.clone(),
        }
    };

    if m == 0 {
        // fully constrained: output is exactly the LiDAR depths
        let mut r = vec![0.0; n_total];
        apply_a(weights, &z_pinned, &mut r);
        return Ok(finish(z_pinned, norm(&r), 0, true));
    }

    // LSQR (Golub-Kahan bidiagonalization) on min ||B d - r0||, where B is
    // (I-W) restricted to the free columns, r0 = -(I-W) z' is the residual of
    // the warm start, and the solution is x = z_free + d. LSQR is used rather
    // than CG on the normal equations: B is nearly rank-deficient (the graph
    // reconstruction leaves constant and depth-proportional modes almost
    // free), and squaring the conditioning makes CGNR step wildly along those
    // modes. The bidiagonalization keeps every update in range(B^T).
    let scatter = |x: &[f64], base: &mut [f64]| {
        for (xi, &i) in x.iter().zip(&free) {
            base[i] = *xi;
        }
    };
    let gather = |full: &[f64]| -> Vec<f64> { free.iter().map(|&i| full[i]).collect() };

    let mut tmp_full = vec![0.0; n_total];
    let mut tmp_full2 = vec![0.0; n_total];

    // B v: scatter the free vector, apply (I - W) over all rows
    let b_apply = |v: &[f64], tmp_full: &mut [f64], tmp_full2: &mut [f64]| -> Vec<f64> {
        tmp_full.iter_mut().for_each(|t| *t = 0.0);
        scatter(v, tmp_full);
        apply_a(weights, tmp_full, tmp_full2);
        tmp_full2.to_vec()
    };
    // B^T u: apply (I - W)^T, gather the free rows
    let bt_apply = |u: &[f64], tmp_full: &mut [f64]| -> Vec<f64> {
        apply_at(weights, u, tmp_full);
        gather(tmp_full)
    };

    let mut u = vec![0.0; n_total];
    apply_a(weights, &z_pinned, &mut u);
    u.iter_mut().for_each(|r| *r = -*r);
    let bnorm = norm(&u);

    let max_iter = opts.max_iter.unwrap_or(10 * m);
    let mut d = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;

    let mut beta = bnorm;
    if beta > 0.0 {
        u.iter_mut().for_each(|x| *x /= beta);
        let mut v = bt_apply(&u, &mut tmp_full);
        let mut alpha = norm(&v);
        if alpha > 0.0 {
            v.iter_mut().for_each(|x| *x /= alpha);
            let mut w = v.clone();
            let mut phibar = beta;
            let mut rhobar = alpha;
            let mut anorm2 = alpha * alpha;
            // accumulated squared residual of the damping rows
            let mut dampres2 = 0.0;

            while iterations < max_iter {
                // next left vector: u = B v - alpha u
                let bv = b_apply(&v, &mut tmp_full, &mut tmp_full2);
                for (ui, bvi) in u.iter_mut().zip(&bv) {
                    *ui = bvi - alpha * *ui;
                }
                beta = norm(&u);
                if beta > 0.0 {
                    u.iter_mut().for_each(|x| *x /= beta);
                }
                anorm2 += beta * beta;

                // next right vector: v = B^T u - beta v
                let btu = bt_apply(&u, &mut tmp_full);
                for (vi, btui) in v.iter_mut().zip(&btu) {
                    *vi = btui - beta * *vi;
                }
                alpha = norm(&v);
                if alpha > 0.0 {
                    v.iter_mut().for_each(|x| *x /= alpha);
                }
                anorm2 += alpha * alpha;

                // rotation absorbing the damping row before the main one
                let rhobar1 = rhobar.hypot(opts.damp);
                let psi = (opts.damp / rhobar1) * phibar;
                phibar *= rhobar / rhobar1;
                dampres2 += psi * psi;
                anorm2 += opts.damp * opts.damp;

                // plane rotation updating the QR of the bidiagonal system
                let rho = rhobar1.hypot(beta);
                let c = rhobar1 / rho;
                let s = beta / rho;
                let theta = s * alpha;
                rhobar = -c * alpha;
                let phi = c * phibar;
                phibar *= s;

                for (di, &wi) in d.iter_mut().zip(&w) {
                    *di += (phi / rho) * wi;
                }
                for (wi, &vi) in w.iter_mut().zip(&v) {
                    *wi = vi - (theta / rho) * *wi;
                }
                iterations += 1;

                // Paige-Saunders stopping rules with atol = btol = tol
                let rnorm = (phibar * phibar + dampres2).sqrt();
                let arnorm = alpha * (c * phibar).abs();
                let anorm = anorm2.sqrt();
                let dnorm = norm(&d);
                if rnorm <= opts.tol * (bnorm + anorm * dnorm)
                    || arnorm <= opts.tol * anorm * rnorm.max(f64::MIN_POSITIVE)
                {
                    converged = true;
                    break;
                }
                if alpha == 0.0 || beta == 0.0 {
                    // exact breakdown: the Krylov space is exhausted
                    converged = true;
                    break;
                }
            }
        } else {
            // warm-start residual is orthogonal to range(B): already optimal
            converged = true;
        }
    } else {
        converged = true;
    }

    let mut x = gather(&z);
    for (xi, di) in x.iter_mut().zip(&d) {
        *xi += di;
    }

    let mut depths = z_pinned;
    scatter(&x, &mut depths);
    let mut res_vec = vec![0.0; n_total];
    apply_a(weights, &depths, &mut res_vec);
    Ok(finish(depths, norm(&res_vec), iterations, converged))
}

/// Per-stage point counts of a full correction run.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageCounts {
    pub scan_points: usize,
    pub sparsified_points: usize,
    pub camera_frame_points: usize,
    pub pseudo_lidar_points: usize,
    pub landmarks: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub corrected: CorrectedDepth,
    pub counts: StageCounts,
    /// True when no landmarks matched and the input was passed through.
    pub skipped: bool,
}

/// Full correction pipeline: sparsify the scan, move it to the camera frame,
/// back-project the stereo depths, fit reconstruction weights, match
/// landmarks, and solve. An empty landmark set returns the input unchanged
/// with the `skipped` flag set.
pub fn gdc_pipeline(
    z_map: &DepthMap,
    calib: &CameraCalib,
    scan: &LidarScan,
    selection: &BeamSelection,
    extrinsics: &Extrinsics,
    k: usize,
    lambda: f64,
    opts: SolveOptions,
) -> Result<PipelineOutput> {
    let mut counts = StageCounts { scan_points: scan.len(), ..Default::default() };

    let sparse = sparsify(scan, selection);
    counts.sparsified_points = sparse.len();

    let lidar_cam = lidar_to_camera(&sparse, extrinsics);
    counts.camera_frame_points = lidar_cam.len();

    let pl = backproject(z_map, calib);
    counts.pseudo_lidar_points = pl.len();

    let landmarks = match_landmarks(&lidar_cam, z_map, calib);
    counts.landmarks = landmarks.len();
    info!(
        "gdc: scan {} -> sparsified {} -> camera {} | pl points {} | landmarks {}",
        counts.scan_points,
        counts.sparsified_points,
        counts.camera_frame_points,
        counts.pseudo_lidar_points,
        counts.landmarks
    );

    if landmarks.is_empty() {
        let depths: Vec<f64> = z_map.grid.iter_valid().map(|(_, _, z)| z).collect();
        let corrected = CorrectedDepth {
            landmark_flags: vec![false; depths.len()],
            depths,
            map: z_map.clone(),
            residual: 0.0,
            iterations: 0,
            converged: true,
        };
        return Ok(PipelineOutput { corrected, counts, skipped: true });
    }

    let graph = build_knn(&pl, k)?;
    let depths: Vec<f64> = z_map.grid.iter_valid().map(|(_, _, z)| z).collect();
    let weights = solve_weights(&depths, &graph, lambda);
    let corrected = correct(z_map, &weights, &landmarks, opts)?;
    info!(
        "gdc: solved in {} iterations, residual {:.3e}, converged {}",
        corrected.iterations, corrected.residual, corrected.converged
    );
    Ok(PipelineOutput { corrected, counts, skipped: false })
}
