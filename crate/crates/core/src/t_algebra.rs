//! The t-product and the free-module linear algebra built on it.
//!
//! Tensors are multiplied as matrices of tubes, with circular convolution
//! standing in for scalar multiplication. The DFT along depth turns that
//! convolution into face-wise matrix products, which is how [`tprod`] works;
//! [`tprod_bcirc_oracle`] materializes the block-circulant form instead and is
//! kept as an independent reference.
//!
//! DFT convention: unnormalized forward transform, `1/D` on the inverse.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Matrix};
use crate::tensor::{FourierTensor3, OrientedMatrix, Tensor3, Tube};

/// Largest `D·max(H, L)` the block-circulant oracle will materialize.
pub const BCIRC_ORACLE_LIMIT: usize = 4096;

const NON_REAL_TOL: f64 = 1e-12;

/// Unnormalized DFT of every tube.
pub fn fft3(t: &Tensor3) -> FourierTensor3 {
    let (h, n, d) = t.shape();
    let mut buf: Vec<Complex64> = t.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if d > 1 {
        let fft = FftPlanner::new().plan_fft_forward(d);
        fft.process(&mut buf);
    }
    FourierTensor3::from_vec(h, n, d, buf).expect("shape carried over")
}

/// Inverse DFT (scaled by `1/D`), returning the real part.
///
/// Fails with [`Error::NonRealInverse`] when the imaginary residue exceeds
/// `1e-12 · max(1, max |re|)`.
pub fn ifft3(f: &FourierTensor3) -> Result<Tensor3> {
    let (h, n, d) = f.shape();
    let mut buf = f.as_slice().to_vec();
    if d > 1 {
        let ifft = FftPlanner::new().plan_fft_inverse(d);
        ifft.process(&mut buf);
    }
    let scale = 1.0 / d as f64;
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    let data: Vec<f64> = buf
        .iter()
        .map(|z| {
            max_re = max_re.max((z.re * scale).abs());
            max_im = max_im.max((z.im * scale).abs());
            z.re * scale
        })
        .collect();
    if max_im > NON_REAL_TOL * max_re.max(1.0) {
        return Err(Error::NonRealInverse { residue: max_im });
    }
    Tensor3::from_vec(h, n, d, data)
}

/// Frontal face `k` of a Fourier tensor as an `H×N` matrix.
pub fn face(f: &FourierTensor3, k: usize) -> CMatrix {
    let (h, n, _) = f.shape();
    let mut m = CMatrix::zeros(h, n);
    for i in 0..h {
        for j in 0..n {
            m.set(i, j, f[(i, j, k)]);
        }
    }
    m
}

pub fn set_face(f: &mut FourierTensor3, k: usize, m: &CMatrix) {
    assert_eq!((m.rows, m.cols), (f.h(), f.n()));
    for i in 0..m.rows {
        for j in 0..m.cols {
            f[(i, j, k)] = m.get(i, j);
        }
    }
}

/// Copies `conj(face k)` into face `D-k` for `k` in `1..=(D-1)/2`, making the
/// tensor exactly conjugate symmetric. Faces above `D/2` are overwritten.
pub fn mirror_conjugate_faces(f: &mut FourierTensor3) {
    let d = f.d();
    for tube in f.as_mut_slice().chunks_exact_mut(d) {
        for k in 1..=(d - 1) / 2 {
            tube[d - k] = tube[k].conj();
        }
    }
}

/// Face-wise product of Fourier tensors, computed for the non-redundant
/// faces and mirrored.
pub fn face_product(a: &FourierTensor3, b: &FourierTensor3) -> FourierTensor3 {
    let (h, _, d) = a.shape();
    let k = b.n();
    let mut out = FourierTensor3::zeros(h, k, d);
    for f in 0..=d / 2 {
        let c = face(a, f).matmul(&face(b, f));
        set_face(&mut out, f, &c);
    }
    mirror_conjugate_faces(&mut out);
    out
}

fn check_product(op: &'static str, a: &Tensor3, b: &Tensor3) -> Result<()> {
    if a.d() != b.d() || a.n() != b.h() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

/// The t-product `a ∗ b` of an `H×L×D` and an `L×K×D` tensor.
pub fn tprod(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    check_product("tprod", a, b)?;
    let c = face_product(&fft3(a), &fft3(b));
    ifft3(&c)
}

/// Materializes the `HD×LD` block-circulant matrix; block `(r, c)` is frontal
/// face `(r - c) mod D`.
pub fn bcirc(a: &Tensor3) -> Matrix {
    let (h, l, d) = a.shape();
    let mut m = Matrix::zeros(h * d, l * d);
    for r in 0..d {
        for c in 0..d {
            let k = (r + d - c) % d;
            for i in 0..h {
                for j in 0..l {
                    m.set(r * h + i, c * l + j, a[(i, j, k)]);
                }
            }
        }
    }
    m
}

/// Stacks the frontal faces vertically: `LD×K`.
pub fn unfold(b: &Tensor3) -> Matrix {
    let (l, k, d) = b.shape();
    let mut m = Matrix::zeros(l * d, k);
    for f in 0..d {
        for i in 0..l {
            for j in 0..k {
                m.set(f * l + i, j, b[(i, j, f)]);
            }
        }
    }
    m
}

/// Inverse of [`unfold`] for an `HD×K` matrix.
pub fn fold(m: &Matrix, h: usize, d: usize) -> Result<Tensor3> {
    if m.rows != h * d {
        return Err(Error::Dimensions(format!(
            "cannot fold {} rows into H={h}, D={d}",
            m.rows
        )));
    }
    Ok(Tensor3::from_fn(h, m.cols, d, |i, j, f| m.get(f * h + i, j)))
}

fn oracle_guard(a: &Tensor3) -> Result<()> {
    let size = a.d() * a.h().max(a.n());
    if size > BCIRC_ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            size,
            limit: BCIRC_ORACLE_LIMIT,
        });
    }
    Ok(())
}

/// `fold(bcirc(a) · unfold(b))`. Reference path for tests; quadratic in `D`.
pub fn tprod_bcirc_oracle(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    check_product("tprod_bcirc_oracle", a, b)?;
    oracle_guard(a)?;
    fold(&bcirc(a).matmul(&unfold(b)), a.h(), a.d())
}

/// Transposes every frontal face and reverses the order of faces `2..D`.
pub fn ttranspose(a: &Tensor3) -> Tensor3 {
    let (h, l, d) = a.shape();
    Tensor3::from_fn(l, h, d, |j, i, k| a[(i, j, (d - k) % d)])
}

/// Sum of the Frobenius norms of all tubes.
pub fn norm_f1(a: &Tensor3) -> f64 {
    a.as_slice()
        .chunks_exact(a.d())
        .map(|t| t.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

/// Sum of the Frobenius norms of the horizontal slices `a(i, :, :)`.
pub fn norm_ff1(a: &Tensor3) -> f64 {
    a.as_slice()
        .chunks_exact(a.n() * a.d())
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

pub fn norm_fro(a: &Tensor3) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Tube-valued cosine `(aᵀ∗b + bᵀ∗a) / (2‖a‖_F‖b‖_F)` of two oriented matrices.
pub fn tubal_angle_cos(a: &OrientedMatrix, b: &OrientedMatrix) -> Result<Tube> {
    if a.n() != 1 || a.shape() != b.shape() {
        return Err(Error::shape("tubal_angle_cos", a.shape(), b.shape()));
    }
    let (na, nb) = (norm_fro(a), norm_fro(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("tubal angle of a zero oriented matrix".into()));
    }
    let ab = tprod(&ttranspose(a), b)?;
    let ba = tprod(&ttranspose(b), a)?;
    let denom = 2.0 * na * nb;
    Ok(Tube(
        ab.as_slice()
            .iter()
            .zip(ba.as_slice())
            .map(|(x, y)| (x + y) / denom)
            .collect(),
    ))
}

/// All singular values of `bcirc(a)`, sorted descending.
///
/// The DFT block-diagonalizes `bcirc(a)` into the Fourier faces, so this is
/// the union of the faces' singular values: `min(H, L) · D` values.
pub fn bcirc_singular_values(a: &Tensor3) -> Vec<f64> {
    let f = fft3(a);
    let mut values: Vec<f64> = (0..a.d())
        .flat_map(|k| linalg::singular_values(&face(&f, k)))
        .collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dft_small_cases() {
        let t = Tensor3::from_vec(1, 1, 1, vec![5.0]).unwrap();
        assert_eq!(fft3(&t)[(0, 0, 0)], Complex64::new(5.0, 0.0));
        let t = Tensor3::from_vec(1, 1, 2, vec![3.0, 1.0]).unwrap();
        let f = fft3(&t);
        assert_eq!(f.tube(0, 0), &[Complex64::new(4.0, 0.0), Complex64::new(2.0, 0.0)]);
    }

    #[test]
    fn ifft_rejects_non_real() {
        let mut f = FourierTensor3::zeros(1, 1, 4);
        f[(0, 0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(ifft3(&f), Err(Error::NonRealInverse { .. })));
    }

    #[test]
    fn tprod_depth_one_is_matmul() {
        let a = Tensor3::from_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor3::from_matrix(2, 1, &[1.0, 0.0]).unwrap();
        assert_eq!(tprod(&a, &b).unwrap().as_slice(), &[1.0, 3.0]);
    }

    #[test]
    fn tprod_shape_error_names_both() {
        let a = Tensor3::zeros(2, 3, 4);
        let b = Tensor3::zeros(2, 3, 4);
        let err = tprod(&a, &b).unwrap_err().to_string();
        assert!(err.contains("(2, 3, 4)"), "{err}");
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = Tensor3::random_normal(3, 2, 5, &mut rng);
        let out = tprod(&Tensor3::identity(3, 5), &b).unwrap();
        assert!(out.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn shift_tube_rotates() {
        let e2 = Tube::unit(1, 3).to_tensor();
        let x = Tensor3::from_vec(1, 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(tprod_bcirc_oracle(&e2, &x).unwrap().as_slice(), &[3.0, 1.0, 2.0]);
        let fast = tprod(&e2, &x).unwrap();
        assert!(fast.max_abs_diff(&Tensor3::from_vec(1, 1, 3, vec![3.0, 1.0, 2.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn zero_times_anything() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = Tensor3::random_normal(3, 2, 4, &mut rng);
        assert!(tprod_bcirc_oracle(&Tensor3::zeros(2, 3, 4), &b).unwrap().is_zero());
    }

    #[test]
    fn oracle_guard_trips() {
        let a = Tensor3::zeros(1, 2, 2049);
        let b = Tensor3::zeros(2, 1, 2049);
        assert!(matches!(tprod_bcirc_oracle(&a, &b), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn transpose_reverses_faces() {
        let a = Tensor3::from_fn(2, 2, 3, |i, j, k| (100 * k + 10 * i + j) as f64);
        let t = ttranspose(&a);
        assert_eq!(t[(1, 0, 0)], a[(0, 1, 0)]);
        assert_eq!(t[(1, 0, 1)], a[(0, 1, 2)]);
        assert_eq!(t[(1, 0, 2)], a[(0, 1, 1)]);
        assert_eq!(ttranspose(&t), a);
        let m = Tensor3::from_matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(ttranspose(&m).as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn norms_by_hand() {
        let a = Tensor3::from_vec(2, 1, 3, vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(norm_f1(&a), 5.0);
        let tube = Tensor3::from_vec(1, 1, 3, vec![1.0, 2.0, 2.0]).unwrap();
        assert_eq!(norm_f1(&tube), 3.0);
        assert_eq!(norm_ff1(&tube), 3.0);
        assert_eq!(norm_fro(&tube), 3.0);
    }

    #[test]
    fn angle_of_first_face_elements() {
        let mut a = Tensor3::zeros(3, 1, 4);
        a[(0, 0, 0)] = 0.6;
        a[(2, 0, 0)] = 0.8;
        assert_eq!(tubal_angle_cos(&a, &a).unwrap().0.iter().map(|v| (v * 1e12).round() / 1e12).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        let mut b = Tensor3::zeros(3, 1, 4);
        b[(1, 0, 0)] = 2.0;
        assert!(tubal_angle_cos(&a, &b).unwrap().norm() < 1e-15);
        assert!(matches!(tubal_angle_cos(&a, &Tensor3::zeros(3, 1, 4)), Err(Error::Domain(_))));
    }

    #[test]
    fn bcirc_svd_small_cases() {
        let t = Tensor3::from_vec(1, 1, 2, vec![3.0, -5.0]).unwrap();
        let s = bcirc_singular_values(&t);
        assert!((s[0] - 8.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
        let m = Tensor3::from_matrix(2, 2, &[3.0, 0.0, 0.0, -4.0]).unwrap();
        assert_eq!(bcirc_singular_values(&m), vec![4.0, 3.0]);
    }
}
