//! Computable checks for the exact-clustering guarantees.
//!
//! Coherence between two submodules is a supremum over infinite sets; here it
//! is estimated by seeded Monte-Carlo, so the reported value is a lower bound
//! on the true coherence.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::t_algebra::{
    bcirc_singular_values, face, fft3, ifft3, mirror_conjugate_faces, norm_f1, norm_fro, tprod, tubal_angle_cos,
};
use crate::tensor::{FourierTensor3, OrientedMatrix, Tensor3};

/// Relative singular-value floor for full rank.
pub const FULL_RANK_RTOL: f64 = 1e-10;
pub const DEFAULT_SUBTENSOR_BUDGET: usize = 200;
pub const DEFAULT_COHERENCE_TRIALS: usize = 200;

/// Points drawn from one submodule, together with a generating set for it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmoduleSample {
    /// `H×d×D`.
    pub generators: Tensor3,
    /// `H×m×D`.
    pub points: Tensor3,
    /// Translation for affine submodules.
    pub affine_offset: Option<OrientedMatrix>,
}

impl SubmoduleSample {
    pub fn new(generators: Tensor3, points: Tensor3, affine_offset: Option<OrientedMatrix>) -> Result<Self> {
        let (h, d, depth) = generators.shape();
        if d > h {
            return Err(Error::Dimensions(format!("submodule dimension {d} exceeds H = {h}")));
        }
        if points.h() != h || points.d() != depth {
            return Err(Error::shape("SubmoduleSample", generators.shape(), points.shape()));
        }
        if let Some(off) = &affine_offset {
            if off.shape() != (h, 1, depth) {
                return Err(Error::shape("SubmoduleSample offset", off.shape(), (h, 1, depth)));
            }
        }
        Ok(SubmoduleSample {
            generators,
            points,
            affine_offset,
        })
    }

    /// Submodular dimension (number of generators).
    pub fn dim(&self) -> usize {
        self.generators.n()
    }

    /// Least-squares residual of the (offset-removed) points against the generators.
    pub fn residual(&self) -> f64 {
        let pts = match &self.affine_offset {
            Some(off) => {
                let mut p = self.points.clone();
                for j in 0..p.n() {
                    let shifted = &p.lateral_slice(j) - off;
                    p.set_lateral_slice(j, &shifted);
                }
                p
            }
            None => self.points.clone(),
        };
        submodule_residual(&self.generators, &pts).expect("shapes checked on construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Monte-Carlo lower bound on the largest coherence with another cluster.
    pub coherence_max: f64,
    /// Largest singular value of `bcirc` of the other clusters' points.
    pub sigma_max_rest: f64,
    /// Best smallest singular value over the searched full-rank subtensors.
    pub sigma_min_best: f64,
    pub subtensors_searched: usize,
    /// False when no searched subtensor was full rank (then `rhs = 0`).
    pub full_rank_found: bool,
}

/// True when every Fourier face has smallest singular value above
/// `1e-10 · max(1, largest singular value of that face)`.
pub fn is_generating_set(y: &Tensor3) -> bool {
    let f = fft3(y);
    (0..y.d()).all(|k| {
        let s = linalg::singular_values(&face(&f, k));
        let floor = FULL_RANK_RTOL * s.first().copied().unwrap_or(0.0).max(1.0);
        y.n() <= y.h() && s.len() == y.n() && s.last().is_some_and(|&m| m > floor)
    })
}

/// Spatial Frobenius norm of the face-wise least-squares residual of `x`
/// (any number of lateral slices) against the span of `dict`'s faces.
pub fn submodule_residual(dict: &Tensor3, x: &Tensor3) -> Result<f64> {
    if dict.h() != x.h() || dict.d() != x.d() {
        return Err(Error::shape("submodule_residual", dict.shape(), x.shape()));
    }
    let (fd, fx) = (fft3(dict), fft3(x));
    let mut total = 0.0;
    for k in 0..dict.d() {
        let svd = linalg::svd(&face(&fd, k));
        let r = svd.rank(FULL_RANK_RTOL);
        let xf = face(&fx, k);
        for col in 0..x.n() {
            let b: Vec<Complex64> = (0..x.h()).map(|i| xf.get(i, col)).collect();
            let mut resid = b.clone();
            for q in 0..r {
                let coef: Complex64 = (0..x.h()).map(|i| svd.u.get(i, q).conj() * b[i]).sum();
                for (i, ri) in resid.iter_mut().enumerate() {
                    *ri -= svd.u.get(i, q) * coef;
                }
            }
            total += resid.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    Ok((total / dict.d() as f64).sqrt())
}

fn random_unit_element(generators: &Tensor3, rng: &mut ChaCha8Rng) -> Option<OrientedMatrix> {
    let coef = Tensor3::random_normal(generators.n(), 1, generators.d(), rng);
    let v = tprod(generators, &coef).ok()?;
    let norm = norm_fro(&v);
    (norm > 0.0).then(|| v.scale(1.0 / norm))
}

/// Monte-Carlo estimate of the tubal coherence: the largest
/// `‖cos θ(Vᵢ, Vⱼ)‖_F` over `trials` random unit-norm t-linear combinations of
/// each side's generators. A lower bound on the true value; for a fixed seed
/// it is non-decreasing in `trials`.
pub fn coherence(si: &SubmoduleSample, sj: &SubmoduleSample, trials: usize, seed: u64) -> Result<f64> {
    if trials < 1 {
        return Err(Error::Parameter("coherence needs at least one trial".into()));
    }
    let (a, b) = (&si.generators, &sj.generators);
    if a.h() != b.h() || a.d() != b.d() {
        return Err(Error::shape("coherence", a.shape(), b.shape()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let vi = random_unit_element(a, &mut rng);
        let vj = random_unit_element(b, &mut rng);
        if let (Some(vi), Some(vj)) = (vi, vj) {
            best = best.max(tubal_angle_cos(&vi, &vj)?.norm());
        }
    }
    Ok(best)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for pos in (0..k).rev() {
        if comb[pos] < n - k + pos {
            comb[pos] += 1;
            for q in pos + 1..k {
                comb[q] = comb[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Evaluates the sufficient condition for cluster `i`:
///
/// `√dᵢ · maxⱼ cᵢⱼ · σ_max(bcirc(Y₋ᵢ)) < max over full-rank H×dᵢ×D subtensors Ỹ of Yᵢ of σ_min(bcirc(Ỹ))`.
///
/// Subtensors are enumerated exhaustively when there are at most
/// `subtensor_budget` of them, otherwise `subtensor_budget` distinct ones are
/// sampled with the given seed.
pub fn theorem3_check(data: &[SubmoduleSample], i: usize, subtensor_budget: usize, seed: u64) -> Result<TheoremReport> {
    theorem3_check_with_trials(data, i, subtensor_budget, DEFAULT_COHERENCE_TRIALS, seed)
}

pub fn theorem3_check_with_trials(
    data: &[SubmoduleSample],
    i: usize,
    subtensor_budget: usize,
    coherence_trials: usize,
    seed: u64,
) -> Result<TheoremReport> {
    let own = data
        .get(i)
        .ok_or_else(|| Error::Parameter(format!("cluster index {i} out of range ({} clusters)", data.len())))?;
    if subtensor_budget == 0 {
        return Err(Error::Parameter("subtensor budget must be at least 1".into()));
    }
    let di = own.dim();
    let mi = own.points.n();
    if di > mi {
        return Err(Error::Parameter(format!(
            "cluster {i} has {mi} points but submodular dimension {di}"
        )));
    }

    let others: Vec<&SubmoduleSample> = data.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| s).collect();
    let (coherence_max, sigma_max_rest) = if others.is_empty() {
        (0.0, 0.0)
    } else {
        let mut cmax: f64 = 0.0;
        for (idx, other) in data.iter().enumerate() {
            if idx != i {
                cmax = cmax.max(coherence(own, other, coherence_trials, seed.wrapping_add(idx as u64))?);
            }
        }
        let rest_points: Vec<&Tensor3> = others.iter().map(|s| &s.points).collect();
        let rest = Tensor3::concat_columns(&rest_points)?;
        (cmax, bcirc_singular_values(&rest)[0])
    };
    let lhs = (di as f64).sqrt() * coherence_max * sigma_max_rest;

    let total = binomial(mi, di);
    let mut best: Option<f64> = None;
    let mut searched = 0usize;
    let mut consider = |cols: &[usize]| {
        searched += 1;
        let sub = own.points.select_columns(cols);
        if is_generating_set(&sub) {
            let smin = *bcirc_singular_values(&sub).last().expect("nonempty");
            best = Some(best.map_or(smin, |b: f64| b.max(smin)));
        }
    };
    if total <= subtensor_budget as u128 {
        let mut comb: Vec<usize> = (0..di).collect();
        loop {
            consider(&comb);
            if !next_combination(&mut comb, mi) {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let mut seen = std::collections::BTreeSet::new();
        let mut attempts = 0;
        while seen.len() < subtensor_budget && attempts < 50 * subtensor_budget {
            attempts += 1;
            let mut cols = sample(&mut rng, mi, di).into_vec();
            cols.sort_unstable();
            if seen.insert(cols.clone()) {
                consider(&cols);
            }
        }
    }

    let rhs = best.unwrap_or(0.0);
    Ok(TheoremReport {
        lhs,
        rhs,
        holds: best.is_some() && lhs < rhs,
        coherence_max,
        sigma_max_rest,
        sigma_min_best: rhs,
        subtensors_searched: searched,
        full_rank_found: best.is_some(),
    })
}

const MIN_F1_MAX_ITERS: usize = 200_000;
const MIN_F1_RTOL: f64 = 1e-11;

/// `argmin ‖A‖_F1` subject to `dict ∗ A = x`, by ADMM: face-wise projection
/// onto the affine constraint set alternating with tube shrinkage.
///
/// Fails with [`Error::NotInSubmodule`] when the least-squares residual of
/// `x` against `dict` exceeds `tol`. The returned coefficients are the final
/// projected iterate, so they satisfy the constraint to roundoff.
pub fn min_f1_representation(dict: &Tensor3, x: &OrientedMatrix, tol: f64) -> Result<Tensor3> {
    if x.n() != 1 || x.h() != dict.h() || x.d() != dict.d() {
        return Err(Error::shape("min_f1_representation", dict.shape(), x.shape()));
    }
    let residual = submodule_residual(dict, x)?;
    if residual > tol {
        return Err(Error::NotInSubmodule { residual, tol });
    }
    let (_, m, d) = dict.shape();
    if x.is_zero() {
        return Ok(Tensor3::zeros(m, 1, d));
    }

    let (fd, fx) = (fft3(dict), fft3(x));
    let half = d / 2;
    // Per face: pseudo-inverse and the minimum-norm particular solution.
    let mut pinv = Vec::with_capacity(half + 1);
    let mut faces = Vec::with_capacity(half + 1);
    let mut particular = FourierTensor3::zeros(m, 1, d);
    for k in 0..=half {
        let yf = face(&fd, k);
        let svd = linalg::svd(&yf);
        let r = svd.rank(FULL_RANK_RTOL);
        let mut p = CMatrix::zeros(m, dict.h());
        for q in 0..r {
            for a in 0..m {
                for b in 0..dict.h() {
                    let v = p.get(a, b) + svd.v.get(a, q) * svd.u.get(b, q).conj() / svd.s[q];
                    p.set(a, b, v);
                }
            }
        }
        let xk: Vec<Complex64> = (0..dict.h()).map(|i| fx[(i, 0, k)]).collect();
        for (a, v) in p.matvec(&xk).into_iter().enumerate() {
            particular[(a, 0, k)] = v;
        }
        pinv.push(p);
        faces.push(yf);
    }
    mirror_conjugate_faces(&mut particular);

    // Project v onto {A : Ŷ_k A = x̂_k}: v - Y⁺(Y v - x).
    let project = |v: &FourierTensor3| -> FourierTensor3 {
        let mut out = v.clone();
        for k in 0..=half {
            let vk: Vec<Complex64> = (0..m).map(|a| v[(a, 0, k)]).collect();
            let yv = faces[k].matvec(&vk);
            let diff: Vec<Complex64> = yv.iter().enumerate().map(|(i, z)| z - fx[(i, 0, k)]).collect();
            let corr = pinv[k].matvec(&diff);
            for a in 0..m {
                out[(a, 0, k)] = vk[a] - corr[a];
            }
        }
        mirror_conjugate_faces(&mut out);
        out
    };

    let sqrt_d = (d as f64).sqrt();
    let start_f1: f64 = (0..m).map(|a| scaled(particular.tube(a, 0), sqrt_d)).sum();
    // Shrinkage threshold on the order of a typical coefficient tube.
    let tau = (start_f1 / m as f64).max(f64::MIN_POSITIVE);
    let mut a_var = particular.clone();
    let mut u = FourierTensor3::zeros(m, 1, d);
    let mut z = particular;
    for _ in 0..MIN_F1_MAX_ITERS {
        let mut v = a_var.clone();
        for (vi, ui) in v.as_mut_slice().iter_mut().zip(u.as_slice()) {
            *vi -= ui;
        }
        z = project(&v);
        let prev = a_var.clone();
        for a in 0..m {
            let zt = z.tube(a, 0).to_vec();
            let ut = u.tube(a, 0).to_vec();
            let dst = a_var.tube_mut(a, 0);
            for ((o, zv), uv) in dst.iter_mut().zip(&zt).zip(&ut) {
                *o = zv + uv;
            }
            let norm = scaled(dst, sqrt_d);
            let factor = if norm <= tau { 0.0 } else { 1.0 - tau / norm };
            dst.iter_mut().for_each(|c| *c *= factor);
        }
        let mut primal = 0.0;
        let mut dual = 0.0;
        let mut scale = 0.0;
        for idx in 0..u.as_slice().len() {
            let r = z.as_slice()[idx] - a_var.as_slice()[idx];
            u.as_mut_slice()[idx] += r;
            primal += r.norm_sqr();
            dual += (a_var.as_slice()[idx] - prev.as_slice()[idx]).norm_sqr();
            scale += z.as_slice()[idx].norm_sqr();
        }
        let scale = scale.sqrt().max(1e-300);
        if primal.sqrt() <= MIN_F1_RTOL * scale && dual.sqrt() <= MIN_F1_RTOL * scale {
            break;
        }
    }
    ifft3(&z)
}

fn scaled(t: &[Complex64], sqrt_d: f64) -> f64 {
    t.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / sqrt_d
}

/// `‖A‖_F1` of the minimal representation; convenience for the chain checks.
pub fn min_f1_norm(dict: &Tensor3, x: &OrientedMatrix, tol: f64) -> Result<f64> {
    Ok(norm_f1(&min_f1_representation(dict, x, tol)?))
}
