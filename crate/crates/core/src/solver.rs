//! Group-sparse self-representation by ADMM in the Fourier domain.
//!
//! Solves
//!
//! ```text
//! minimize   ‖C‖_F1 + λ_h ‖C‖_FF1 + λ_g ‖Y − Y∗C‖_F²
//! subject to C(i,i,:) = 0          (every diagonal tube)
//!            Σ_i C(i,j,:) = e₁      (only with `affine`)
//! ```
//!
//! with the splitting `C = A₁ = A₂`. The C-step is a per-face ridge solve
//! whose constraints are imposed exactly through a small KKT correction
//! using the same factorization, the A₁-step shrinks tubes and the A₂-step
//! shrinks horizontal slices. All iterates live in the Fourier domain;
//! spatial group norms are recovered with Parseval (`‖c‖ = D^{-1/2}‖ĉ‖`).

use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Cholesky, Matrix};
use crate::t_algebra::{face, fft3, ifft3, mirror_conjugate_faces, norm_f1, norm_ff1, norm_fro, tprod};
use crate::tensor::{FourierTensor3, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight on the reconstruction error.
    pub lambda_g: f64,
    /// Weight on the horizontal-slice group norm; zero disables the second split.
    pub lambda_h: f64,
    /// Constrain every column's tube sum to the identity tube.
    pub affine: bool,
    /// Fixed ADMM penalty.
    pub rho: f64,
    pub max_iters: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Divide each lateral slice by its Frobenius norm before solving.
    pub normalize_columns: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_g: 1.0,
            lambda_h: 0.0,
            affine: false,
            rho: 1.0,
            max_iters: 1000,
            tol_abs: 1e-6,
            tol_rel: 1e-4,
            normalize_columns: false,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda_g(lambda_g: f64) -> Self {
        SolverConfig {
            lambda_g,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda_g", self.lambda_g)?;
        positive("rho", self.rho)?;
        positive("tol_abs", self.tol_abs)?;
        positive("tol_rel", self.tol_rel)?;
        if !(self.lambda_h >= 0.0 && self.lambda_h.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda_h must be nonnegative, got {}",
                self.lambda_h
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Stopping threshold the primal residual was compared against.
    pub primal_threshold: f64,
    pub dual_threshold: f64,
    /// Objective at the returned tensor, evaluated in the spatial domain.
    pub objective: f64,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

/// Symmetric, nonnegative `N×N` affinity with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    /// Validates symmetry, nonnegativity and the zero diagonal.
    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n || n == 0 {
            return Err(Error::Dimensions(format!(
                "affinity needs {n}x{n} values, got {}",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Data(format!("affinity diagonal ({i},{i}) is nonzero")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v >= 0.0 && v.is_finite()) || v != values[j * n + i] {
                    return Err(Error::Data(format!(
                        "affinity must be symmetric, finite and nonnegative at ({i},{j})"
                    )));
                }
            }
        }
        Ok(AffinityMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n, self.n, self.values.clone())
    }

    /// Reorders rows and columns: entry `(a, b)` of the result is `(perm[a], perm[b])`.
    pub fn permuted(&self, perm: &[usize]) -> AffinityMatrix {
        let n = self.n;
        assert_eq!(perm.len(), n);
        let mut values = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                values[a * n + b] = self.get(perm[a], perm[b]);
            }
        }
        AffinityMatrix { n, values }
    }

    /// As an `N×N×1` tensor, for writing in TSR1.
    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_vec(self.n, self.n, 1, self.values.clone()).expect("n >= 1")
    }
}

/// `M(i,j) = ‖w(j,i,:)‖_F + ‖w(i,j,:)‖_F`, diagonal forced to zero.
pub fn affinity_from_tensor(w: &Tensor3) -> Result<AffinityMatrix> {
    let n = w.h();
    if w.n() != n {
        return Err(Error::shape("affinity_from_tensor", w.shape(), (n, n, w.d())));
    }
    let tube_norm = |i: usize, j: usize| w.tube(i, j).iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let m = tube_norm(i, j) + tube_norm(j, i);
            values[i * n + j] = m;
            values[j * n + i] = m;
        }
    }
    Ok(AffinityMatrix { n, values })
}

fn scaled_norm(v: &[Complex64], depth: usize) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / (depth as f64).sqrt()
}

/// Proximal operator of the spatial tube norm, applied to a Fourier tube:
/// `max(0, 1 − τ/‖v‖_s)·v` with `‖v‖_s = D^{-1/2}‖v‖₂`.
pub fn group_shrink_tube(v: &[Complex64], tau: f64) -> Vec<Complex64> {
    let mut out = v.to_vec();
    shrink_in_place(&mut out, v.len(), tau);
    out
}

/// Same shrinkage with the whole horizontal slice (`N` tubes of length
/// `depth`, concatenated) as the group.
pub fn group_shrink_row(row: &[Complex64], depth: usize, tau: f64) -> Vec<Complex64> {
    assert!(depth > 0 && row.len().is_multiple_of(depth));
    let mut out = row.to_vec();
    shrink_in_place(&mut out, depth, tau);
    out
}

fn shrink_in_place(v: &mut [Complex64], depth: usize, tau: f64) {
    let norm = scaled_norm(v, depth);
    if norm <= tau {
        v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    } else if tau > 0.0 {
        let factor = 1.0 - tau / norm;
        v.iter_mut().for_each(|z| *z *= factor);
    }
}

/// `‖C‖_F1 + λ_h‖C‖_FF1 + λ_g‖Y − Y∗C‖_F²`, evaluated in the spatial domain.
pub fn objective(y: &Tensor3, c: &Tensor3, lambda_g: f64, lambda_h: f64) -> Result<f64> {
    let fit = norm_fro(&(y - &tprod(y, c)?));
    Ok(norm_f1(c) + lambda_h * norm_ff1(c) + lambda_g * fit * fit)
}

/// Divides each lateral slice by its Frobenius norm; zero slices stay zero.
pub fn normalize_columns(y: &Tensor3) -> Tensor3 {
    let mut out = y.clone();
    for j in 0..y.n() {
        let norm = norm_fro(&y.lateral_slice(j));
        if norm > 0.0 {
            for i in 0..y.h() {
                out.tube_mut(i, j).iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    out
}

/// Per-face data for the C-step.
struct FaceSystem {
    kinv: CMatrix,
    /// `K⁻¹ · 2λ_g ŶᴴŶ`, the data-driven part of the ridge solution.
    base: CMatrix,
    /// `K⁻¹ 1`.
    kinv_ones: Vec<Complex64>,
    /// `1ᵀ K⁻¹ 1`.
    ones_kinv_ones: Complex64,
}

/// Solves the self-representation program and returns `(W, report)`.
///
/// `W` is `N×N×D` with exactly zero diagonal tubes. Hitting `max_iters`
/// is not an error; it shows up as `converged = false`.
pub fn solve_self_representation(y: &Tensor3, cfg: &SolverConfig) -> Result<(Tensor3, SolverReport)> {
    cfg.validate()?;
    let (_, n, d) = y.shape();
    if n < 2 {
        return Err(Error::Data("need at least two samples".into()));
    }
    if !y.is_finite() {
        return Err(Error::Data("input tensor has non-finite values".into()));
    }
    if y.is_zero() {
        return Err(Error::Data("input tensor is identically zero".into()));
    }
    let y = if cfg.normalize_columns {
        normalize_columns(y)
    } else {
        y.clone()
    };

    let two_splits = cfg.lambda_h > 0.0;
    let rho = cfg.rho;
    let kappa = if two_splits { 2.0 * rho } else { rho };
    let y_hat = fft3(&y);
    let half = d / 2;

    let mut systems = Vec::with_capacity(half + 1);
    for f in 0..=half {
        let yf = face(&y_hat, f);
        let mut gram = yf.adjoint_matmul(&yf);
        gram.data.iter_mut().for_each(|z| *z *= 2.0 * cfg.lambda_g);
        let mut k = gram.clone();
        for i in 0..n {
            let v = k.get(i, i) + kappa;
            k.set(i, i, v);
        }
        let chol = Cholesky::new(&k)
            .ok_or_else(|| Error::Data("ridge system is not positive definite".into()))?;
        let kinv = chol.inverse();
        let base = kinv.matmul(&gram);
        let kinv_ones: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| kinv.get(i, j)).sum()).collect();
        let ones_kinv_ones = kinv_ones.iter().sum();
        systems.push(FaceSystem {
            kinv,
            base,
            kinv_ones,
            ones_kinv_ones,
        });
    }

    let zero = || FourierTensor3::zeros(n, n, d);
    let mut c = zero();
    let mut a1 = zero();
    let mut u1 = zero();
    let mut a2 = zero();
    let mut u2 = zero();
    let mut a1_prev = zero();
    let mut a2_prev = zero();

    let sqrt_d = (d as f64).sqrt();
    let count = (n * n * d) as f64;
    let splits = if two_splits { 2.0 } else { 1.0 };
    let mut history = Vec::new();
    let mut report = SolverReport {
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        primal_threshold: 0.0,
        dual_threshold: 0.0,
        objective: f64::NAN,
        converged: false,
        objective_history: Vec::new(),
    };

    for iter in 1..=cfg.max_iters {
        // C-step, face by face.
        for (f, sys) in systems.iter().enumerate() {
            let mut r = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = rho * (a1[(i, j, f)] - u1[(i, j, f)]);
                    if two_splits {
                        v += rho * (a2[(i, j, f)] - u2[(i, j, f)]);
                    }
                    r.set(i, j, v);
                }
            }
            let mut cf = sys.kinv.matmul(&r);
            for (z, b) in cf.data.iter_mut().zip(&sys.base.data) {
                *z += b;
            }
            for j in 0..n {
                constrain_column(&mut cf, j, sys, cfg.affine);
            }
            for i in 0..n {
                for j in 0..n {
                    c[(i, j, f)] = cf.get(i, j);
                }
            }
        }
        mirror_conjugate_faces(&mut c);

        // A₁-step: tube shrinkage, diagonal pinned at zero.
        std::mem::swap(&mut a1, &mut a1_prev);
        for i in 0..n {
            for j in 0..n {
                let dst = a1.tube_mut(i, j);
                if i == j {
                    dst.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    continue;
                }
                for ((z, cv), uv) in dst.iter_mut().zip(c.tube(i, j)).zip(u1.tube(i, j)) {
                    *z = cv + uv;
                }
                shrink_in_place(dst, d, 1.0 / rho);
            }
        }

        // A₂-step: horizontal-slice shrinkage.
        if two_splits {
            std::mem::swap(&mut a2, &mut a2_prev);
            let row_len = n * d;
            let tau = cfg.lambda_h / rho;
            for i in 0..n {
                let range = i * row_len..(i + 1) * row_len;
                let dst = &mut a2.as_mut_slice()[range.clone()];
                for ((z, cv), uv) in dst
                    .iter_mut()
                    .zip(&c.as_slice()[range.clone()])
                    .zip(&u2.as_slice()[range])
                {
                    *z = cv + uv;
                }
                dst[i * d..(i + 1) * d]
                    .iter_mut()
                    .for_each(|z| *z = Complex64::new(0.0, 0.0));
                shrink_in_place(dst, d, tau);
            }
        }

        // Dual updates and residuals, in spatial units.
        let mut primal_sq = 0.0;
        let mut dual_vec_sq = 0.0;
        let mut c_sq = 0.0;
        let mut a_sq = 0.0;
        let mut u_sum_sq = 0.0;
        for idx in 0..c.as_slice().len() {
            let cv = c.as_slice()[idx];
            let r1 = cv - a1.as_slice()[idx];
            u1.as_mut_slice()[idx] += r1;
            primal_sq += r1.norm_sqr();
            c_sq += cv.norm_sqr();
            a_sq += a1.as_slice()[idx].norm_sqr();
            let mut delta = a1.as_slice()[idx] - a1_prev.as_slice()[idx];
            let mut usum = u1.as_slice()[idx];
            if two_splits {
                let r2 = cv - a2.as_slice()[idx];
                u2.as_mut_slice()[idx] += r2;
                primal_sq += r2.norm_sqr();
                c_sq += cv.norm_sqr();
                a_sq += a2.as_slice()[idx].norm_sqr();
                delta += a2.as_slice()[idx] - a2_prev.as_slice()[idx];
                usum += u2.as_slice()[idx];
            }
            dual_vec_sq += delta.norm_sqr();
            u_sum_sq += usum.norm_sqr();
        }
        let primal = primal_sq.sqrt() / sqrt_d;
        let dual = rho * dual_vec_sq.sqrt() / sqrt_d;
        let eps_pri = (splits * count).sqrt() * cfg.tol_abs + cfg.tol_rel * c_sq.sqrt().max(a_sq.sqrt()) / sqrt_d;
        let eps_dual = count.sqrt() * cfg.tol_abs + cfg.tol_rel * rho * u_sum_sq.sqrt() / sqrt_d;

        history.push(fourier_objective(&y_hat, &c, cfg));
        report.iterations = iter;
        report.primal_residual = primal;
        report.dual_residual = dual;
        report.primal_threshold = eps_pri;
        report.dual_threshold = eps_dual;
        if primal <= eps_pri && dual <= eps_dual {
            report.converged = true;
            break;
        }
    }
    debug!(
        "admm stopped after {} iterations (converged: {}, r={:e}, s={:e})",
        report.iterations, report.converged, report.primal_residual, report.dual_residual
    );

    let mut w = ifft3(&c)?;
    for i in 0..n {
        w.tube_mut(i, i).iter_mut().for_each(|v| *v = 0.0);
    }
    report.objective = objective(&y, &w, cfg.lambda_g, cfg.lambda_h)?;
    report.objective_history = history;
    Ok((w, report))
}

/// Moves column `j` of the unconstrained ridge solution onto the constraint
/// set via the KKT correction `c + K⁻¹Bμ`, `B = [e_j, 1]`.
fn constrain_column(cf: &mut CMatrix, j: usize, sys: &FaceSystem, affine: bool) {
    let n = cf.rows;
    let kinv = &sys.kinv;
    let cj = cf.get(j, j);
    if !affine {
        let mu = -cj / kinv.get(j, j);
        for i in 0..n {
            let v = cf.get(i, j) + mu * kinv.get(i, j);
            cf.set(i, j, v);
        }
    } else {
        let col_sum: Complex64 = (0..n).map(|i| cf.get(i, j)).sum();
        // Bᴴ K⁻¹ B
        let s11 = kinv.get(j, j);
        let s12 = sys.kinv_ones[j];
        let s21: Complex64 = (0..n).map(|i| kinv.get(i, j)).sum();
        let s22 = sys.ones_kinv_ones;
        let t1 = -cj;
        let t2 = Complex64::new(1.0, 0.0) - col_sum;
        let det = s11 * s22 - s12 * s21;
        let mu1 = (t1 * s22 - s12 * t2) / det;
        let mu2 = (s11 * t2 - s21 * t1) / det;
        for i in 0..n {
            let v = cf.get(i, j) + mu1 * kinv.get(i, j) + mu2 * sys.kinv_ones[i];
            cf.set(i, j, v);
        }
    }
    cf.set(j, j, Complex64::new(0.0, 0.0));
}

fn fourier_objective(y_hat: &FourierTensor3, c: &FourierTensor3, cfg: &SolverConfig) -> f64 {
    let (_, n, d) = c.shape();
    let mut f1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            f1 += scaled_norm(c.tube(i, j), d);
        }
    }
    let ff1 = if cfg.lambda_h > 0.0 {
        c.as_slice().chunks_exact(n * d).map(|row| scaled_norm(row, d)).sum()
    } else {
        0.0
    };
    let mut fit = 0.0;
    for f in 0..d {
        let yf = face(y_hat, f);
        let resid = yf.matmul(&face(c, f));
        fit += yf
            .data
            .iter()
            .zip(&resid.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    }
    f1 + cfg.lambda_h * ff1 + cfg.lambda_g * fit / d as f64
}
