//! Directed KNN graph over a 3D point cloud and the row-stochastic
//! reconstruction weights: each point's depth is expressed as a weighted
//! combination of its neighbors' depths, with the minimum-norm coefficients
//! subject to exact reconstruction and a unit row sum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // lexicographic (distance, index): the heap's max is the worst candidate
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Static kd-tree over 3D points, axis cycling by depth, median splits.
pub struct KdTree {
    points: Vec<[f64; 3]>,
    // flattened tree: node order is a permutation of point indices
    order: Vec<usize>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct KdNode {
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = vec![KdNode { axis: 0, left: None, right: None }; points.len()];
        let root = if points.is_empty() {
            None
        } else {
            let n = points.len();
            Some(Self::build_rec(points, &mut order, &mut nodes, 0, n, 0))
        };
        Self { points: points.to_vec(), order, nodes, root }
    }

    /// Builds the subtree over order[lo..hi]; returns the slot of its root.
    fn build_rec(
        points: &[[f64; 3]],
        order: &mut [usize],
        nodes: &mut [KdNode],
        lo: usize,
        hi: usize,
        depth: usize,
    ) -> usize {
        let axis = depth % 3;
        let mid = lo + (hi - lo) / 2;
        order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        nodes[mid] = KdNode { axis, left: None, right: None };
        if lo < mid {
            let l = Self::build_rec(points, order, nodes, lo, mid, depth + 1);
            nodes[mid].left = Some(l);
        }
        if mid + 1 < hi {
            let r = Self::build_rec(points, order, nodes, mid + 1, hi, depth + 1);
            nodes[mid].right = Some(r);
        }
        mid
    }

    /// The k nearest points to `query`, excluding `exclude`, sorted by
    /// (distance, index). Ties break toward the lower index; pruning keeps
    /// subtrees whose boundary distance equals the current worst, so the
    /// result matches an exhaustive scan exactly.
    pub fn k_nearest(&self, query: [f64; 3], k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if let Some(root) = self.root {
            self.search(root, query, k, exclude, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_by(|a, b| a.cmp(b));
        out.into_iter().map(|c| c.index).collect()
    }

    fn search(
        &self,
        slot: usize,
        query: [f64; 3],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let node = self.nodes[slot];
        let index = self.order[slot];
        let p = self.points[index];

        if Some(index) != exclude {
            let dx = p[0] - query[0];
            let dy = p[1] - query[1];
            let dz = p[2] - query[2];
            let cand = Candidate { dist2: dx * dx + dy * dy + dz * dz, index };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand.cmp(worst) == Ordering::Less {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }

        let delta = query[node.axis] - p[node.axis];
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, query, k, exclude, heap);
        }
        if let Some(f) = far {
            let boundary = delta * delta;
            let must_visit = heap.len() < k
                || heap.peek().map_or(true, |w| boundary <= w.dist2);
            if must_visit {
                self.search(f, query, k, exclude, heap);
            }
        }
    }
}

/// Directed neighbor lists: `neighbors[i]` holds the k nearest other points
/// to point i, ordered by (distance, index).
#[derive(Debug, Clone)]
pub struct KnnGraph {
    pub neighbors: Vec<Vec<usize>>,
    pub k: usize,
    /// True when the requested k exceeded point_count - 1 and was clamped.
    pub k_clamped: bool,
}

/// Build the directed KNN graph by 3D Euclidean distance. k is clamped to
/// point_count - 1 when the cloud is too small, with a warning flag.
pub fn build_knn(points: &PointCloud, k: usize) -> Result<KnnGraph> {
    let n = points.len();
    if n < 2 {
        return Err(crate::error::Error::EmptyInput("knn graph needs at least 2 points"));
    }
    if k < 1 {
        return Err(crate::error::Error::DimensionMismatch("k must be >= 1".into()));
    }
    let k_clamped = k > n - 1;
    let k_eff = k.min(n - 1);
    let coords: Vec<[f64; 3]> = points.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree = KdTree::build(&coords);
    let neighbors = (0..n)
        .map(|i| tree.k_nearest(coords[i], k_eff, Some(i)))
        .collect();
    Ok(KnnGraph { neighbors, k: k_eff, k_clamped })
}

/// Sparse row-stochastic reconstruction weights over point indices.
#[derive(Debug, Clone)]
pub struct KnnWeights {
    pub n_points: usize,
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    /// Rows where the reconstruction constraint was inconsistent with the
    /// row-sum constraint (all neighbor depths equal but differing from the
    /// point's own depth) and uniform weights were substituted.
    pub degenerate_rows: Vec<usize>,
}

impl KnnWeights {
    /// W z: reconstruct every depth from its neighbors.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n_points);
        let mut out = vec![0.0; self.n_points];
        for i in 0..self.n_points {
            let mut acc = 0.0;
            for (&j, &w) in self.neighbors[i].iter().zip(&self.weights[i]) {
                acc += w * z[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Text triplet dump (row col weight), one entry per line.
    pub fn write_triplets<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.n_points {
            for (&j, &w) in self.neighbors[i].iter().zip(&self.weights[i]) {
                writeln!(f, "{i} {j} {w:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Relative Tikhonov term on the reconstruction constraint. Nonzero lambda
/// pulls weights toward uniform where neighbor depths barely differ, which
/// is what lets the downstream correction smooth noise instead of exactly
/// interpolating it; the row sum stays exact regardless. Pass 0 to get the
/// exact minimum-norm constrained solution.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Solve the per-row minimum-norm weights: minimize ||w||^2 subject to
/// w . z_N = z_i and sum(w) = 1. The global problem decomposes row by row;
/// each row has the closed form
///   w_j = 1/k + (z_i - mean) (z_j - mean) / (spread + lambda * k * mean_sq)
/// where mean and spread are over the neighbor depths. Centering makes the
/// row sum exact independent of lambda. Rows whose neighbors all share one
/// depth different from z_i fall back to uniform weights and are flagged.
pub fn solve_weights(depths: &[f64], graph: &KnnGraph, lambda: f64) -> KnnWeights {
    let n = depths.len();
    assert_eq!(n, graph.neighbors.len(), "depths and graph must cover the same points");
    let mut weights = Vec::with_capacity(n);
    let mut degenerate_rows = Vec::new();

    for i in 0..n {
        let nbrs = &graph.neighbors[i];
        let k = nbrs.len();
        let zi = depths[i];
        let mean = nbrs.iter().map(|&j| depths[j]).sum::<f64>() / k as f64;
        let spread: f64 = nbrs.iter().map(|&j| (depths[j] - mean).powi(2)).sum();
        let mean_sq = nbrs.iter().map(|&j| depths[j] * depths[j]).sum::<f64>() / k as f64;

        let scale = 1.0 + mean * mean;
        if spread <= 1e-20 * scale * k as f64 {
            // neighbors are (numerically) all at one depth
            weights.push(vec![1.0 / k as f64; k]);
            if (zi - mean).abs() > 1e-9 * (1.0 + zi.abs()) {
                degenerate_rows.push(i);
            }
            continue;
        }

        let denom = spread + lambda * k as f64 * mean_sq;
        let gain = (zi - mean) / denom;
        let row = nbrs
            .iter()
            .map(|&j| 1.0 / k as f64 + gain * (depths[j] - mean))
            .collect();
        weights.push(row);
    }

    KnnWeights {
        n_points: n,
        k: graph.k,
        neighbors: graph.neighbors.clone(),
        weights,
        degenerate_rows,
    }
}
