//! Normalized spectral clustering of an affinity matrix, NJW style.

use std::fmt::Write as _;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Matrix};
use crate::solver::AffinityMatrix;

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITERS: usize = 300;

/// A partition of `N` items into labels `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Data(format!("label {bad} out of range for k = {k}")));
        }
        Ok(ClusterLabels { labels, k })
    }

    /// Infers `k` as one more than the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(1, |m| m + 1);
        ClusterLabels::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Output of [`spectral_cluster`] with its diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralClustering {
    pub labels: ClusterLabels,
    /// Row-normalized `N×k` spectral embedding.
    pub embedding: Matrix,
    /// The `k` largest eigenvalues of `D^{-1/2} M D^{-1/2}`.
    pub eigenvalues: Vec<f64>,
    /// Vertices with zero degree; their degree was replaced by 1.
    pub isolated_vertices: Vec<usize>,
}

impl SpectralClustering {
    pub fn has_isolated_vertices(&self) -> bool {
        !self.isolated_vertices.is_empty()
    }

    /// The embedding as CSV, one row per sample.
    pub fn embedding_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.embedding.cols).map(|c| format!("v{c}")).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for r in 0..self.embedding.rows {
            let row: Vec<String> = (0..self.embedding.cols)
                .map(|c| format!("{}", self.embedding.get(r, c)))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Spectral clustering into `k` groups.
///
/// Builds `D^{-1/2} M D^{-1/2}`, takes its `k` leading eigenvectors,
/// normalizes the rows of that embedding to unit length (zero rows stay
/// zero) and runs [`kmeans`] on them.
pub fn spectral_cluster(m: &AffinityMatrix, k: usize, seed: u64) -> Result<SpectralClustering> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must be in 1..={n}")));
    }
    let mut isolated = Vec::new();
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = (0..n).map(|j| m.get(i, j)).sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                isolated.push(i);
                1.0
            }
        })
        .collect();
    if !isolated.is_empty() {
        warn!("{} isolated vertices in affinity; degree set to 1", isolated.len());
    }
    let mut normalized = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            normalized.set(i, j, inv_sqrt_deg[i] * m.get(i, j) * inv_sqrt_deg[j]);
        }
    }
    let eig = sym_eigen(&normalized);
    let mut embedding = Matrix::zeros(n, k);
    for r in 0..n {
        let norm = (0..k).map(|c| eig.vectors.get(r, c).powi(2)).sum::<f64>().sqrt();
        for c in 0..k {
            let v = eig.vectors.get(r, c);
            embedding.set(r, c, if norm > 0.0 { v / norm } else { 0.0 });
        }
    }
    let labels = kmeans(&embedding, k, seed)?.labels;
    Ok(SpectralClustering {
        labels,
        embedding,
        eigenvalues: eig.values[..k].to_vec(),
        isolated_vertices: isolated,
    })
}

/// Result of one k-means run.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: ClusterLabels,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

/// k-means++ seeding, [`KMEANS_RESTARTS`] restarts of at most
/// [`KMEANS_MAX_ITERS`] Lloyd iterations, lowest inertia kept (earliest
/// restart on ties). Rows of `points` are the samples.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.rows;
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must be in 1..={n}")));
    }
    let mut best: Option<KMeansResult> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(points: &Matrix, r: usize, centroids: &Matrix, c: usize) -> f64 {
    (0..points.cols)
        .map(|j| (points.get(r, j) - centroids.get(c, j)).powi(2))
        .sum()
}

/// Nearest centroid, lowest index on ties.
fn nearest(points: &Matrix, r: usize, centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, sq_dist(points, r, centroids, 0));
    for c in 1..centroids.rows {
        let d = sq_dist(points, r, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let (n, dim) = (points.rows, points.cols);
    let mut centroids = Matrix::zeros(k, dim);
    let copy_row = |centroids: &mut Matrix, c: usize, r: usize| {
        for j in 0..dim {
            centroids.set(c, j, points.get(r, j));
        }
    };
    copy_row(&mut centroids, 0, rng.gen_range(0..n));
    let mut dist: Vec<f64> = (0..n).map(|r| sq_dist(points, r, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (r, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = r;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // every point coincides with a chosen centroid
            rng.gen_range(0..n)
        };
        copy_row(&mut centroids, c, pick);
        for (r, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, r, &centroids, c));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let (n, dim) = (points.rows, points.cols);
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    for iter in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        let mut inertia = 0.0;
        for (r, label) in labels.iter_mut().enumerate() {
            let (c, d) = nearest(points, r, &centroids);
            changed |= c != *label;
            *label = c;
            inertia += d;
        }
        trace.push(inertia);
        if iter > 0 && !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (r, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for j in 0..dim {
                sums.set(c, j, sums.get(c, j) + points.get(r, j));
            }
        }
        for c in 0..k {
            // empty clusters keep their previous centroid
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids.set(c, j, sums.get(c, j) / counts[c] as f64);
                }
            }
        }
    }
    let inertia = *trace.last().expect("at least one assignment");
    KMeansResult {
        labels: ClusterLabels { labels, k },
        centroids,
        inertia,
        inertia_trace: trace,
    }
}
