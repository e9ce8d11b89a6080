//! Depth-error metrics: median absolute error binned by ground-truth depth,
//! and the smooth L1 loss over jointly valid pixels.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Grid};

/// Median absolute depth error per ground-truth depth bin. Empty bins carry
/// count 0 and a NaN median.
#[derive(Debug, Clone)]
pub struct BinnedErrorReport {
    pub bin_edges: Vec<f64>,
    pub median_abs_err_m: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BinnedErrorReport {
    pub fn bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `bin_lo,bin_hi,count,median_abs_err_m` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count,median_abs_err_m\n");
        for i in 0..self.bins() {
            let med = self.median_abs_err_m[i];
            let med_s = if med.is_nan() { String::from("") } else { format!("{med:.6}") };
            let _ = writeln!(
                s,
                "{},{},{},{}",
                self.bin_edges[i], self.bin_edges[i + 1], self.counts[i], med_s
            );
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>8} {:>8} {:>10} {:>16}", "bin_lo", "bin_hi", "count", "median_err_m");
        for i in 0..self.bins() {
            let med = self.median_abs_err_m[i];
            let med_s = if med.is_nan() { String::from("-") } else { format!("{med:.4}") };
            let _ = writeln!(
                s,
                "{:>8.1} {:>8.1} {:>10} {:>16}",
                self.bin_edges[i], self.bin_edges[i + 1], self.counts[i], med_s
            );
        }
        s
    }

    /// Minimal standalone SVG bar chart of the per-bin medians.
    pub fn to_svg(&self) -> String {
        let bins = self.bins();
        let (w, h, pad) = (60.0 * bins as f64 + 80.0, 320.0, 40.0);
        let max_med = self
            .median_abs_err_m
            .iter()
            .copied()
            .filter(|m| m.is_finite())
            .fold(0.0f64, f64::max)
            .max(1e-9);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n"
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"16\" font-size=\"13\">median |depth error| (m) by truth depth bin</text>",
            pad
        );
        for i in 0..bins {
            let med = self.median_abs_err_m[i];
            if !med.is_finite() {
                continue;
            }
            let bh = (h - 2.0 * pad) * med / max_med;
            let x = pad + 60.0 * i as f64;
            let y = h - pad - bh;
            let _ = writeln!(
                s,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"50\" height=\"{bh:.1}\" fill=\"#4477aa\"/>"
            );
            let _ = writeln!(
                s,
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\">{}-{}</text>",
                h - pad + 14.0,
                self.bin_edges[i],
                self.bin_edges[i + 1]
            );
            let _ = writeln!(
                s,
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\">{med:.2}</text>",
                y - 4.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Bin edges every 5 m over [0, 70] m.
pub fn default_bins() -> Vec<f64> {
    (0..=14).map(|i| 5.0 * i as f64).collect()
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-bin (by truth depth) median of |pred - truth| over pixels valid in
/// both maps. Pixels whose truth depth lies outside the bin range are not
/// evaluated; counts sum to the evaluated total.
pub fn binned_median_error(
    pred: &DepthMap,
    truth: &DepthMap,
    bin_edges: &[f64],
) -> Result<BinnedErrorReport> {
    if pred.grid.width() != truth.grid.width() || pred.grid.height() != truth.grid.height() {
        return Err(Error::DimensionMismatch(format!(
            "map sizes differ: {}x{} vs {}x{}",
            pred.grid.width(),
            pred.grid.height(),
            truth.grid.width(),
            truth.grid.height()
        )));
    }
    if bin_edges.len() < 2 || !bin_edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::DimensionMismatch("bin edges must be increasing".into()));
    }
    let bins = bin_edges.len() - 1;
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); bins];
    let mut any = false;
    for (u, v, zt) in truth.grid.iter_valid() {
        let Some(zp) = pred.grid.get(u, v) else { continue };
        any = true;
        if zt < bin_edges[0] || zt >= bin_edges[bins] {
            continue;
        }
        // contiguous increasing edges: linear scan is fine for ~dozens of bins
        let mut b = bins - 1;
        for i in 0..bins {
            if zt < bin_edges[i + 1] {
                b = i;
                break;
            }
        }
        per_bin[b].push((zp - zt).abs());
    }
    if !any {
        return Err(Error::NoValidPixels);
    }
    let counts: Vec<usize> = per_bin.iter().map(Vec::len).collect();
    let median_abs_err_m = per_bin
        .iter_mut()
        .map(|v| if v.is_empty() { f64::NAN } else { median(v) })
        .collect();
    Ok(BinnedErrorReport { bin_edges: bin_edges.to_vec(), median_abs_err_m, counts })
}

/// Mean smooth L1 loss over jointly valid pixels, with the standard unit
/// transition point: 0.5 r^2 for |r| < 1, |r| - 0.5 otherwise. Applies to
/// depth or disparity residuals alike.
pub fn smooth_l1(pred: &Grid, truth: &Grid) -> Result<f64> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch("smooth_l1 grids differ in size".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (u, v, t) in truth.iter_valid() {
        let Some(p) = pred.get(u, v) else { continue };
        let r = (p - t).abs();
        sum += if r < 1.0 { 0.5 * r * r } else { r - 0.5 };
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(sum / count as f64)
}
