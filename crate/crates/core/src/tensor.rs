//! Dense third-order tensors and their Fourier-domain counterparts.
//!
//! A [`Tensor3`] of shape `H×N×D` is stored tube-contiguous: the entry at
//! row `i`, column `j`, depth `k` lives at `(i * n + j) * d + k`. This is the
//! same order the TSR1 file format uses on disk, so reading and writing are
//! straight copies.

use std::fs;
use std::io::{Read, Write};
use std::ops::{Add, Index, IndexMut, Sub};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Real `H×N×D` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    h: usize,
    n: usize,
    d: usize,
    data: Vec<f64>,
}

/// An `H×1×D` lateral slice. Functions taking an oriented matrix check `n == 1`.
pub type OrientedMatrix = Tensor3;

fn check_dims(h: usize, n: usize, d: usize) -> Result<()> {
    if h == 0 || n == 0 || d == 0 {
        return Err(Error::Dimensions(format!(
            "all dimensions must be at least 1, got {h}x{n}x{d}"
        )));
    }
    Ok(())
}

impl Tensor3 {
    pub fn zeros(h: usize, n: usize, d: usize) -> Self {
        assert!(h > 0 && n > 0 && d > 0, "tensor dimensions must be positive");
        Tensor3 {
            h,
            n,
            d,
            data: vec![0.0; h * n * d],
        }
    }

    /// Builds a tensor from tube-contiguous values.
    pub fn from_vec(h: usize, n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(h, n, d)?;
        if data.len() != h * n * d {
            return Err(Error::Dimensions(format!(
                "expected {} values for {h}x{n}x{d}, got {}",
                h * n * d,
                data.len()
            )));
        }
        Ok(Tensor3 { h, n, d, data })
    }

    pub fn from_fn(h: usize, n: usize, d: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(h, n, d);
        for i in 0..h {
            for j in 0..n {
                for k in 0..d {
                    t[(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Builds a `D=1` tensor from a row-major matrix.
    pub fn from_matrix(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Tensor3::from_vec(rows, cols, 1, values.to_vec())
    }

    /// The multiplicative identity: identity matrix in the first frontal face.
    pub fn identity(n: usize, d: usize) -> Self {
        let mut t = Tensor3::zeros(n, n, d);
        for i in 0..n {
            t[(i, i, 0)] = 1.0;
        }
        t
    }

    /// Standard normal entries.
    pub fn random_normal<R: Rng + ?Sized>(h: usize, n: usize, d: usize, rng: &mut R) -> Self {
        let mut t = Tensor3::zeros(h, n, d);
        for v in &mut t.data {
            *v = rng.sample(StandardNormal);
        }
        t
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.n, self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.n + j) * self.d
    }

    /// The tube at row `i`, column `j`.
    pub fn tube(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.data[o..o + self.d]
    }

    pub fn tube_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        let d = self.d;
        &mut self.data[o..o + d]
    }

    /// Lateral slice `j` as an `H×1×D` oriented matrix.
    pub fn lateral_slice(&self, j: usize) -> OrientedMatrix {
        let mut out = Tensor3::zeros(self.h, 1, self.d);
        for i in 0..self.h {
            out.tube_mut(i, 0).copy_from_slice(self.tube(i, j));
        }
        out
    }

    pub fn set_lateral_slice(&mut self, j: usize, slice: &OrientedMatrix) {
        assert_eq!((slice.h, slice.n, slice.d), (self.h, 1, self.d));
        for i in 0..self.h {
            self.tube_mut(i, j).copy_from_slice(slice.tube(i, 0));
        }
    }

    /// Keeps the listed lateral slices, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Tensor3 {
        assert!(!columns.is_empty());
        let mut out = Tensor3::zeros(self.h, columns.len(), self.d);
        for i in 0..self.h {
            for (jj, &j) in columns.iter().enumerate() {
                out.tube_mut(i, jj).copy_from_slice(self.tube(i, j));
            }
        }
        out
    }

    /// Concatenates tensors along the lateral (column) direction.
    pub fn concat_columns(parts: &[&Tensor3]) -> Result<Tensor3> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimensions("nothing to concatenate".into()))?;
        let (h, d) = (first.h, first.d);
        let mut n = 0;
        for p in parts {
            if p.h != h || p.d != d {
                return Err(Error::shape("concat_columns", first.shape(), p.shape()));
            }
            n += p.n;
        }
        let mut out = Tensor3::zeros(h, n, d);
        let mut j0 = 0;
        for p in parts {
            for i in 0..h {
                for j in 0..p.n {
                    out.tube_mut(i, j0 + j).copy_from_slice(p.tube(i, j));
                }
            }
            j0 += p.n;
        }
        Ok(out)
    }

    /// Frontal face `k` as a row-major `H×N` matrix.
    pub fn frontal_face(&self, k: usize) -> Vec<f64> {
        let mut face = Vec::with_capacity(self.h * self.n);
        for i in 0..self.h {
            for j in 0..self.n {
                face.push(self[(i, j, k)]);
            }
        }
        face
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Reads a TSR1 file.
    pub fn read_tsr1(path: impl AsRef<Path>) -> Result<Tensor3> {
        let bytes = fs::read(path)?;
        Tensor3::decode_tsr1(&bytes)
    }

    pub fn write_tsr1(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.encode_tsr1())?;
        Ok(())
    }

    pub fn read_tsr1_from(mut reader: impl Read) -> Result<Tensor3> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Tensor3::decode_tsr1(&bytes)
    }

    /// Magic `TSR1`, three little-endian u32 (H, N, D), then the values as
    /// little-endian f64 in tube-contiguous order.
    pub fn encode_tsr1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.data.len());
        out.extend_from_slice(TSR1_MAGIC);
        for dim in [self.h, self.n, self.d] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode_tsr1(bytes: &[u8]) -> Result<Tensor3> {
        if bytes.len() < 16 {
            return Err(Error::format(bytes.len(), "truncated TSR1 header"));
        }
        if &bytes[0..4] != TSR1_MAGIC {
            return Err(Error::format(0, "bad TSR1 magic"));
        }
        let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (h, n, d) = (dim(4), dim(8), dim(12));
        if h == 0 || n == 0 || d == 0 {
            return Err(Error::format(4, format!("zero dimension in {h}x{n}x{d}")));
        }
        let count = h
            .checked_mul(n)
            .and_then(|x| x.checked_mul(d))
            .ok_or_else(|| Error::format(4, "dimension overflow"))?;
        let expected = 16 + 8 * count;
        if bytes.len() != expected {
            return Err(Error::format(
                bytes.len().min(expected),
                format!("expected {expected} bytes for {h}x{n}x{d}, file has {}", bytes.len()),
            ));
        }
        let data: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(16 + 8 * pos, "non-finite value"));
        }
        Tensor3::from_vec(h, n, d, data)
    }
}

const TSR1_MAGIC: &[u8; 4] = b"TSR1";

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        debug_assert!(i < self.h && j < self.n && k < self.d);
        &self.data[(i * self.n + j) * self.d + k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        debug_assert!(i < self.h && j < self.n && k < self.d);
        &mut self.data[(i * self.n + j) * self.d + k]
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
        out
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
        out
    }
}

/// A `1×1×D` tube: the scalar of the ring under circular convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube(pub Vec<f64>);

impl Tube {
    pub fn zeros(d: usize) -> Self {
        Tube(vec![0.0; d])
    }

    /// The unit tube `e_k` (0-indexed): a one at position `k`. `e_0` is the identity.
    pub fn unit(k: usize, d: usize) -> Self {
        let mut t = Tube::zeros(d);
        t.0[k] = 1.0;
        t
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Circular convolution, computed directly.
    pub fn conv(&self, other: &Tube) -> Tube {
        let d = self.len();
        assert_eq!(d, other.len());
        let mut out = vec![0.0; d];
        for (a, &x) in self.0.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in other.0.iter().enumerate() {
                out[(a + b) % d] += x * y;
            }
        }
        Tube(out)
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_vec(1, 1, self.len(), self.0.clone()).expect("nonempty tube")
    }

    pub fn from_tensor(t: &Tensor3) -> Result<Tube> {
        if t.h() != 1 || t.n() != 1 {
            return Err(Error::shape("tube", t.shape(), (1, 1, t.d())));
        }
        Ok(Tube(t.as_slice().to_vec()))
    }
}

/// Complex `H×N×D` array; tube `(i, j)` holds the DFT along depth.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTensor3 {
    h: usize,
    n: usize,
    d: usize,
    data: Vec<Complex64>,
}

impl FourierTensor3 {
    pub fn zeros(h: usize, n: usize, d: usize) -> Self {
        assert!(h > 0 && n > 0 && d > 0, "tensor dimensions must be positive");
        FourierTensor3 {
            h,
            n,
            d,
            data: vec![Complex64::new(0.0, 0.0); h * n * d],
        }
    }

    pub fn from_vec(h: usize, n: usize, d: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dims(h, n, d)?;
        if data.len() != h * n * d {
            return Err(Error::Dimensions(format!(
                "expected {} values for {h}x{n}x{d}, got {}",
                h * n * d,
                data.len()
            )));
        }
        Ok(FourierTensor3 { h, n, d, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.n, self.d)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn tube(&self, i: usize, j: usize) -> &[Complex64] {
        let o = (i * self.n + j) * self.d;
        &self.data[o..o + self.d]
    }

    pub fn tube_mut(&mut self, i: usize, j: usize) -> &mut [Complex64] {
        let o = (i * self.n + j) * self.d;
        let d = self.d;
        &mut self.data[o..o + d]
    }

    /// Largest deviation from `face k = conj(face D-k)`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for tube in self.data.chunks_exact(d) {
            worst = worst.max(tube[0].im.abs());
            for k in 1..d {
                worst = worst.max((tube[k] - tube[d - k].conj()).norm());
            }
        }
        worst
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize, usize)> for FourierTensor3 {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &Complex64 {
        &self.data[(i * self.n + j) * self.d + k]
    }
}

impl IndexMut<(usize, usize, usize)> for FourierTensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut Complex64 {
        &mut self.data[(i * self.n + j) * self.d + k]
    }
}
