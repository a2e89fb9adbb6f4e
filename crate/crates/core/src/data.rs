//! Synthetic union-of-submodules data, image loaders and evaluation metrics.
//!
//! Images always enter a tensor with pixel rows along `H` and pixel columns
//! along depth `D`, one image per lateral slice. A circular shift of image
//! columns is then exactly a t-product with a shifted unit tube.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ClusterLabels;
use crate::t_algebra::tprod;
use crate::tensor::{OrientedMatrix, Tensor3, Tube};
use crate::theory::{is_generating_set, SubmoduleSample};

const MAX_GENERATOR_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub h: usize,
    /// Submodular dimension of each cluster.
    pub d_per_cluster: Vec<usize>,
    pub samples_per_cluster: Vec<usize>,
    pub depth: usize,
    pub noise_sigma: f64,
    pub affine: bool,
    /// Build each point as a circular depth shift of a cluster prototype.
    pub shift_model: bool,
    /// Standard deviation of the coefficient jitter added to the shift tube.
    #[serde(default)]
    pub shift_jitter: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// `clusters` clusters of equal dimension and size.
    pub fn uniform(h: usize, depth: usize, clusters: usize, dim: usize, per_cluster: usize, seed: u64) -> Self {
        SynthSpec {
            h,
            d_per_cluster: vec![dim; clusters],
            samples_per_cluster: vec![per_cluster; clusters],
            depth,
            noise_sigma: 0.0,
            affine: false,
            shift_model: false,
            shift_jitter: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_per_cluster.is_empty() || self.d_per_cluster.len() != self.samples_per_cluster.len() {
            return Err(Error::Parameter(
                "d_per_cluster and samples_per_cluster must be nonempty and of equal length".into(),
            ));
        }
        if self.h == 0 || self.depth == 0 {
            return Err(Error::Parameter("h and depth must be at least 1".into()));
        }
        if self.d_per_cluster.iter().chain(&self.samples_per_cluster).any(|&v| v == 0) {
            return Err(Error::Parameter("cluster dimensions and sizes must be at least 1".into()));
        }
        if let Some(&d) = self.d_per_cluster.iter().find(|&&d| d > self.h) {
            return Err(Error::Parameter(format!("submodule dimension {d} exceeds h = {}", self.h)));
        }
        if !(self.noise_sigma >= 0.0 && self.shift_jitter >= 0.0) {
            return Err(Error::Parameter("noise_sigma and shift_jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A data tensor with its ground-truth partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTensor {
    pub tensor: Tensor3,
    pub truth: ClusterLabels,
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<LabeledTensor> {
    Ok(generate_synthetic_samples(spec)?.0)
}

/// Generates the data and, per cluster, the generating set it was drawn from.
///
/// In the shift model each cluster is the one-generator submodule of its
/// prototype, so that prototype is reported as the generating set.
pub fn generate_synthetic_samples(spec: &SynthSpec) -> Result<(LabeledTensor, Vec<SubmoduleSample>)> {
    spec.validate()?;
    let (h, depth) = (spec.h, spec.depth);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts = Vec::new();
    let mut samples = Vec::new();
    let mut truth = Vec::new();

    for (cluster, (&dim, &m)) in spec.d_per_cluster.iter().zip(&spec.samples_per_cluster).enumerate() {
        let generators = (0..MAX_GENERATOR_DRAWS)
            .map(|_| Tensor3::random_normal(h, dim, depth, &mut rng))
            .find(is_generating_set)
            .ok_or_else(|| {
                Error::Generation(format!(
                    "no generating set for cluster {cluster} after {MAX_GENERATOR_DRAWS} draws"
                ))
            })?;

        let (generators, mut points) = if spec.shift_model {
            let coef = Tensor3::random_normal(dim, 1, depth, &mut rng);
            let prototype = tprod(&generators, &coef)?;
            let mut points = Tensor3::zeros(h, m, depth);
            for j in 0..m {
                let s = rng.gen_range(0..depth);
                let mut tube = Tube::unit(s, depth);
                if spec.shift_jitter > 0.0 {
                    for v in &mut tube.0 {
                        *v += spec.shift_jitter * rng.sample::<f64, _>(rand_distr::StandardNormal);
                    }
                }
                points.set_lateral_slice(j, &tprod(&prototype, &tube.to_tensor())?);
            }
            (prototype, points)
        } else {
            let coef = Tensor3::random_normal(dim, m, depth, &mut rng);
            let points = tprod(&generators, &coef)?;
            (generators, points)
        };

        let offset = if spec.affine {
            let off = Tensor3::random_normal(h, 1, depth, &mut rng);
            for j in 0..m {
                let moved = &points.lateral_slice(j) + &off;
                points.set_lateral_slice(j, &moved);
            }
            Some(off)
        } else {
            None
        };
        if spec.noise_sigma > 0.0 {
            let noise = Tensor3::random_normal(h, m, depth, &mut rng).scale(spec.noise_sigma);
            points = &points + &noise;
        }

        truth.extend(std::iter::repeat_n(cluster, m));
        parts.push(points.clone());
        samples.push(SubmoduleSample::new(generators, points, offset)?);
    }

    let refs: Vec<&Tensor3> = parts.iter().collect();
    let tensor = Tensor3::concat_columns(&refs)?;
    let truth = ClusterLabels::new(truth, spec.d_per_cluster.len())?;
    Ok((LabeledTensor { tensor, truth }, samples))
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(bytes.len(), "truncated IDX header"))
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Tensor3> {
    parse_idx_images(&fs::read(path)?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

/// Parses an IDX3 image file: each image becomes one lateral slice, scaled by `1/255`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Tensor3> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(0, format!("expected image magic 0x00000803, found 0x{magic:08x}")));
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    if n == 0 || rows == 0 || cols == 0 {
        return Err(Error::format(4, format!("empty image set {n}x{rows}x{cols}")));
    }
    let payload = &bytes[16..];
    let needed = n * rows * cols;
    if payload.len() < needed {
        return Err(Error::format(bytes.len(), format!("payload truncated: need {needed} bytes after header")));
    }
    if payload.len() > needed {
        return Err(Error::format(16 + needed, "trailing bytes after image payload"));
    }
    Ok(Tensor3::from_fn(rows, n, cols, |r, img, c| {
        f64::from(payload[img * rows * cols + r * cols + c]) / 255.0
    }))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(0, format!("expected label magic 0x00000801, found 0x{magic:08x}")));
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(Error::format(bytes.len(), format!("payload truncated: need {n} labels")));
    }
    if payload.len() > n {
        return Err(Error::format(8 + n, "trailing bytes after label payload"));
    }
    Ok(payload.to_vec())
}

/// Encodes row-major `n×rows×cols` pixels as an IDX3 image file.
pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), n * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Picks `per_class` random images of each listed class, grouped by class in
/// the given order. Truth labels are the class positions `0..classes.len()`.
pub fn select_classes(images: &Tensor3, labels: &[u8], classes: &[u8], per_class: usize, seed: u64) -> Result<LabeledTensor> {
    if labels.len() != images.n() {
        return Err(Error::Data(format!("{} labels for {} images", labels.len(), images.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::new();
    let mut truth = Vec::new();
    for (pos, &class) in classes.iter().enumerate() {
        let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if pool.len() < per_class {
            return Err(Error::Data(format!("class {class} has only {} images", pool.len())));
        }
        let picked = rand::seq::index::sample(&mut rng, pool.len(), per_class);
        columns.extend(picked.iter().map(|p| pool[p]));
        truth.extend(std::iter::repeat_n(pos, per_class));
    }
    Ok(LabeledTensor {
        tensor: images.select_columns(&columns),
        truth: ClusterLabels::new(truth, classes.len())?,
    })
}

/// Preprocessing for [`load_pgm_dir`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmOptions {
    /// Keep every `decimate`-th row and column (1 keeps everything).
    pub decimate: usize,
    /// Inclusive 1-based column range applied after decimation.
    pub crop: Option<(usize, usize)>,
}

impl Default for PgmOptions {
    fn default() -> Self {
        PgmOptions { decimate: 1, crop: None }
    }
}

/// A decoded grayscale image scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

/// Decodes a binary (P5) PGM.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::format(0, "not a binary PGM (P5)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos, "malformed PGM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, "PGM header number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::format(pos, "missing whitespace after PGM header"));
    }
    pos += 1;
    let [cols, rows, maxval] = fields;
    if cols == 0 || rows == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(2, format!("bad PGM geometry {cols}x{rows} maxval {maxval}")));
    }
    let bpp = if maxval < 256 { 1 } else { 2 };
    let needed = rows * cols * bpp;
    let payload = &bytes[pos..];
    if payload.len() < needed {
        return Err(Error::format(bytes.len(), format!("PGM payload truncated: need {needed} bytes")));
    }
    let max = maxval as f64;
    let pixels = (0..rows * cols)
        .map(|p| {
            let raw = if bpp == 1 {
                f64::from(payload[p])
            } else {
                f64::from(u16::from_be_bytes([payload[2 * p], payload[2 * p + 1]]))
            };
            raw / max
        })
        .collect();
    Ok(GrayImage { rows, cols, pixels })
}

/// Encodes 8-bit pixels as a P5 PGM with maxval 255.
pub fn encode_pgm(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), rows * cols);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn preprocess(img: &GrayImage, opts: &PgmOptions) -> Result<GrayImage> {
    let step = opts.decimate.max(1);
    let keep_rows: Vec<usize> = (0..img.rows).step_by(step).collect();
    let mut keep_cols: Vec<usize> = (0..img.cols).step_by(step).collect();
    if let Some((a, b)) = opts.crop {
        if a == 0 || a > b || b > keep_cols.len() {
            return Err(Error::Parameter(format!(
                "crop {a}:{b} outside 1..={} columns",
                keep_cols.len()
            )));
        }
        keep_cols = keep_cols[a - 1..b].to_vec();
    }
    let pixels = keep_rows
        .iter()
        .flat_map(|&r| keep_cols.iter().map(move |&c| img.pixels[r * img.cols + c]))
        .collect();
    Ok(GrayImage {
        rows: keep_rows.len(),
        cols: keep_cols.len(),
        pixels,
    })
}

/// Loads every `.pgm` file of a directory, sorted by file name, into an
/// `rows×files×cols` tensor. Returns the file names in tensor order.
pub fn load_pgm_dir(path: impl AsRef<Path>, opts: &PgmOptions) -> Result<(Tensor3, Vec<String>)> {
    let mut names: Vec<String> = fs::read_dir(path.as_ref())?
        .filter_map(|entry| entry.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".pgm"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Data(format!("no .pgm files in {}", path.as_ref().display())));
    }
    let mut images = Vec::with_capacity(names.len());
    for name in &names {
        let img = parse_pgm(&fs::read(path.as_ref().join(name))?)
            .map_err(|e| Error::Data(format!("{name}: {e}")))?;
        images.push(preprocess(&img, opts)?);
    }
    let (rows, cols) = (images[0].rows, images[0].cols);
    if let Some((i, img)) = images.iter().enumerate().find(|(_, im)| (im.rows, im.cols) != (rows, cols)) {
        return Err(Error::Data(format!(
            "{} is {}x{} but {} is {rows}x{cols}",
            names[i], img.rows, img.cols, names[0]
        )));
    }
    let tensor = Tensor3::from_fn(rows, images.len(), cols, |r, j, c| images[j].pixels[r * cols + c]);
    Ok((tensor, names))
}

/// Fraction of items misassigned under the best one-to-one matching of
/// predicted to true labels.
pub fn clustering_error(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Data(format!(
            "label lengths differ: {} predicted vs {} true",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let k = pred.k().max(truth.k());
    let mut counts = vec![vec![0i64; k]; k];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        counts[p][t] += 1;
    }
    let cost: Vec<Vec<i64>> = counts.iter().map(|row| row.iter().map(|&c| -c).collect()).collect();
    let assignment = hungarian(&cost);
    let matched: i64 = assignment.iter().enumerate().map(|(p, &t)| counts[p][t]).sum();
    Ok(1.0 - matched as f64 / pred.len() as f64)
}

/// Minimum-cost perfect matching on a square matrix (Kuhn-Munkres with
/// potentials). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Circularly shifts an oriented matrix along depth: `out[k] = x[k - s]`,
/// which equals `x ∗ e_s`.
pub fn circular_shift(x: &OrientedMatrix, s: i64) -> OrientedMatrix {
    let d = x.d();
    let s = s.rem_euclid(d as i64) as usize;
    let mut out = x.clone();
    for i in 0..x.h() {
        for j in 0..x.n() {
            let src = x.tube(i, j);
            let dst = out.tube_mut(i, j);
            for k in 0..d {
                dst[(k + s) % d] = src[k];
            }
        }
    }
    out
}

/// Shifts each lateral slice by an independent uniform amount in
/// `[-max_shift, max_shift]`.
pub fn shift_images(t: &Tensor3, max_shift: usize, seed: u64) -> Result<Tensor3> {
    Ok(shift_images_with_offsets(t, max_shift, seed)?.0)
}

pub fn shift_images_with_offsets(t: &Tensor3, max_shift: usize, seed: u64) -> Result<(Tensor3, Vec<i64>)> {
    if max_shift >= t.d() {
        return Err(Error::Parameter(format!(
            "max_shift {max_shift} must be below depth {}",
            t.d()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = max_shift as i64;
    let mut out = t.clone();
    let mut shifts = Vec::with_capacity(t.n());
    for j in 0..t.n() {
        let s = rng.gen_range(-m..=m);
        out.set_lateral_slice(j, &circular_shift(&t.lateral_slice(j), s));
        shifts.push(s);
    }
    Ok((out, shifts))
}
