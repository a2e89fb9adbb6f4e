//! Slow, independent reference implementations for tests.
//!
//! Nothing here shares code with the production paths it checks: the DFT is
//! evaluated directly, the sparse solvers work on real materialized
//! matrices instead of Fourier faces, and SVDs come from nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::t_algebra::bcirc;
use crate::tensor::{FourierTensor3, Tensor3};

/// Unnormalized DFT along depth by the O(D²) definition.
pub fn direct_dft(a: &Tensor3) -> FourierTensor3 {
    let (h, n, d) = a.shape();
    let mut data = vec![Complex64::new(0.0, 0.0); h * n * d];
    for i in 0..h {
        for j in 0..n {
            let tube = a.tube(i, j);
            for f in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &v) in tube.iter().enumerate() {
                    let angle = -2.0 * std::f64::consts::PI * ((f * k) % d) as f64 / d as f64;
                    acc += Complex64::from_polar(v, angle);
                }
                data[(i * n + j) * d + f] = acc;
            }
        }
    }
    FourierTensor3::from_vec(h, n, d, data).expect("consistent shape")
}

/// Singular values of the materialized block circulant, sorted descending.
pub fn bcirc_singular_values_nalgebra(a: &Tensor3) -> Result<Vec<f64>> {
    let b = bcirc(a);
    let m = DMatrix::from_fn(b.rows, b.cols, |r, c| b.get(r, c));
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Largest singular value of a real dense matrix given row-major.
fn spectral_norm(rows: usize, cols: usize, v: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(rows, cols, v);
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Column `j` of the data tensor unfolded into the stacked vector
/// `[Y(:,j,0); …; Y(:,j,D-1)]`, matching `bcirc` row blocks.
fn unfold_col(y: &Tensor3, j: usize) -> Vec<f64> {
    let (h, _, d) = y.shape();
    let mut out = vec![0.0; h * d];
    for k in 0..d {
        for i in 0..h {
            out[k * h + i] = y[(i, j, k)];
        }
    }
    out
}

/// Spatial minimizer of `min_c ‖c‖_{F1}` with `Y ∗ c = x`, by
/// Chambolle-Pock iterations on the materialized `bcirc(Y)`.
///
/// Returns the coefficient oriented matrix and the final constraint
/// residual `‖Y ∗ c − x‖_F`.
pub fn min_f1_pdhg(dict: &Tensor3, x: &Tensor3, iters: usize) -> Result<(Tensor3, f64)> {
    let (h, n, d) = dict.shape();
    let a = bcirc(dict);
    let (rows, cols) = (h * d, n * d);
    let mut dense = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            dense[r * cols + c] = a.get(r, c);
        }
    }
    let b = unfold_col(x, 0);
    let l = spectral_norm(rows, cols, &dense).max(1e-300);
    let (tau, sigma) = (0.99 / l, 0.99 / l);

    // c is stacked by face: c[k*n + j] = C(j,0,k)
    let mut c = vec![0.0; cols];
    let mut c_bar = c.clone();
    let mut p = vec![0.0; rows];
    for _ in 0..iters {
        for r in 0..rows {
            let ac: f64 = (0..cols).map(|q| dense[r * cols + q] * c_bar[q]).sum();
            p[r] += sigma * (ac - b[r]);
        }
        let prev = c.clone();
        for q in 0..cols {
            let atp: f64 = (0..rows).map(|r| dense[r * cols + q] * p[r]).sum();
            c[q] -= tau * atp;
        }
        for j in 0..n {
            let norm = (0..d).map(|k| c[k * n + j].powi(2)).sum::<f64>().sqrt();
            let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
            for k in 0..d {
                c[k * n + j] *= scale;
            }
        }
        for q in 0..cols {
            c_bar[q] = 2.0 * c[q] - prev[q];
        }
    }
    let coef = Tensor3::from_fn(n, 1, d, |j, _, k| c[k * n + j]);
    let mut res = 0.0;
    for r in 0..rows {
        let ac: f64 = (0..cols).map(|q| dense[r * cols + q] * c[q]).sum();
        res += (ac - b[r]).powi(2);
    }
    Ok((coef, res.sqrt()))
}

/// Proximal-gradient (FISTA) solution of the `D = 1` self-representation
/// problem `min λ‖Y − YC‖² + ‖C‖_1 (+ λ_h Σ row norms)` with zero diagonal,
/// computed column by column on plain matrices.
///
/// With `λ_h = 0` the columns decouple; otherwise the whole matrix is
/// iterated jointly. Returns `C` row-major `N×N`.
pub fn self_representation_fista(y: &Tensor3, lambda_g: f64, lambda_h: f64, iters: usize) -> Vec<f64> {
    let (h, n, d) = y.shape();
    assert_eq!(d, 1, "oracle covers the matrix case only");
    let ym = DMatrix::from_fn(h, n, |i, j| y[(i, j, 0)]);
    let gram = ym.transpose() * &ym;
    let l = 2.0 * lambda_g * gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    let step = 1.0 / l.max(1e-300);

    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut z = c.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad = (&gram * &z - &gram) * (2.0 * lambda_g);
        let mut next = &z - grad * step;
        // entrywise prox of the l1 term, diagonal pinned to zero
        for j in 0..n {
            for i in 0..n {
                let v = next[(i, j)];
                next[(i, j)] = if i == j { 0.0 } else { v.signum() * (v.abs() - step).max(0.0) };
            }
        }
        if lambda_h > 0.0 {
            for i in 0..n {
                let norm = next.row(i).norm();
                let scale = if norm > step * lambda_h { 1.0 - step * lambda_h / norm } else { 0.0 };
                for j in 0..n {
                    next[(i, j)] *= scale;
                }
            }
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + (&next - &c) * ((t - 1.0) / t_next);
        c = next;
        t = t_next;
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = c[(i, j)];
        }
    }
    out
}

/// Rotates every frontal face by the same `H×H` real matrix (row-major).
fn rotate_faces(q: &[f64], t: &Tensor3) -> Tensor3 {
    let h = t.h();
    Tensor3::from_fn(h, t.n(), t.d(), |i, j, k| (0..h).map(|r| q[i * h + r] * t[(r, j, k)]).sum())
}

/// Clusters on disjoint row blocks, perturbed by `eps` and then rotated by a
/// random orthogonal matrix. Small `eps` gives low pairwise coherence and
/// independent submodules; `eps = 0` gives exactly orthogonal ones.
///
/// `H` is the sum of `dims`. Points are `generators ∗ coef` with Gaussian
/// coefficients, grouped by cluster.
pub fn block_instance(
    dims: &[usize],
    per_cluster: usize,
    depth: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<crate::theory::SubmoduleSample>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h: usize = dims.iter().sum();
    let gauss = DMatrix::from_fn(h, h, |_, _| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
    let q_mat = gauss.qr().q();
    let q: Vec<f64> = (0..h * h).map(|p| q_mat[(p / h, p % h)]).collect();

    let mut out = Vec::with_capacity(dims.len());
    let mut row0 = 0;
    for &d in dims {
        let block = Tensor3::random_normal(d, d, depth, &mut rng);
        let noise = Tensor3::random_normal(h, d, depth, &mut rng);
        let gens = Tensor3::from_fn(h, d, depth, |i, j, k| {
            let base = if (row0..row0 + d).contains(&i) { block[(i - row0, j, k)] } else { 0.0 };
            base + eps * noise[(i, j, k)]
        });
        let gens = rotate_faces(&q, &gens);
        let coef = Tensor3::random_normal(d, per_cluster, depth, &mut rng);
        let points = crate::t_algebra::tprod(&gens, &coef)?;
        out.push(crate::theory::SubmoduleSample::new(gens, points, None)?);
        row0 += d;
    }
    Ok(out)
}

/// Fraction of `‖C‖_F1` carried by tubes whose row and column belong to the
/// same cluster.
pub fn in_block_f1_fraction(c: &Tensor3, truth: &[usize]) -> f64 {
    let (n, _, _) = c.shape();
    let (mut inside, mut total) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let norm = c.tube(i, j).iter().map(|v| v * v).sum::<f64>().sqrt();
            total += norm;
            if truth[i] == truth[j] {
                inside += norm;
            }
        }
    }
    if total > 0.0 {
        inside / total
    } else {
        1.0
    }
}
