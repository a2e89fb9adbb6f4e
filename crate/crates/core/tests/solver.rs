use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssmc::oracles::{block_instance, in_block_f1_fraction, self_representation_fista};
use ssmc::solver::*;
use ssmc::t_algebra::{norm_f1, norm_ff1, norm_fro, tprod};
use ssmc::{Tensor3, Tube};

fn tensor(h: usize, n: usize, d: usize, seed: u64) -> Tensor3 {
    Tensor3::random_normal(h, n, d, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn tight(lambda_g: f64) -> SolverConfig {
    SolverConfig {
        max_iters: 20_000,
        tol_abs: 1e-10,
        tol_rel: 1e-10,
        ..SolverConfig::with_lambda_g(lambda_g)
    }
}

/// Objective of the matrix case written out entrywise.
fn matrix_objective(y: &Tensor3, c: &[f64], lambda_g: f64, lambda_h: f64) -> f64 {
    let (h, n, _) = y.shape();
    let mut fit = 0.0;
    for i in 0..h {
        for j in 0..n {
            let yc: f64 = (0..n).map(|q| y[(i, q, 0)] * c[q * n + j]).sum();
            fit += (y[(i, j, 0)] - yc).powi(2);
        }
    }
    let l1: f64 = c.iter().map(|v| v.abs()).sum();
    let rows: f64 = (0..n).map(|i| (0..n).map(|j| c[i * n + j].powi(2)).sum::<f64>().sqrt()).sum();
    l1 + lambda_h * rows + lambda_g * fit
}

#[test]
fn matrix_case_matches_proximal_gradient() {
    for seed in 0..5u64 {
        let y = tensor(8, 6, 1, 100 + seed);
        let lambda_g = 5.0;
        let (c, report) = solve_self_representation(&y, &tight(lambda_g)).unwrap();
        let reference = self_representation_fista(&y, lambda_g, 0.0, 100_000);
        let ours = matrix_objective(&y, c.as_slice(), lambda_g, 0.0);
        let theirs = matrix_objective(&y, &reference, lambda_g, 0.0);
        assert!((ours - report.objective).abs() <= 1e-8 * ours);
        let gap = (ours - theirs).abs() / theirs;
        assert!(gap < 1e-4, "seed {seed}: {ours} vs {theirs}");
    }
}

#[test]
fn row_penalty_matches_proximal_gradient() {
    let y = tensor(8, 6, 1, 7);
    let cfg = SolverConfig { lambda_h: 0.5, ..tight(5.0) };
    let (c, _) = solve_self_representation(&y, &cfg).unwrap();
    let reference = self_representation_fista(&y, 5.0, 0.5, 100_000);
    let ours = matrix_objective(&y, c.as_slice(), 5.0, 0.5);
    let theirs = matrix_objective(&y, &reference, 5.0, 0.5);
    assert!((ours - theirs).abs() / theirs < 1e-4, "{ours} vs {theirs}");
}

#[test]
fn duplicate_pair_links_both_ways() {
    let x = tensor(4, 1, 3, 5);
    let shift = Tube(vec![0.5, 1.0, -0.25]);
    let x2 = tprod(&x, &shift.to_tensor()).unwrap();
    let y = Tensor3::concat_columns(&[&x, &x2]).unwrap();
    let lambda_g = 100.0;
    let (c, report) = solve_self_representation(&y, &tight(lambda_g)).unwrap();
    let t01: f64 = c.tube(0, 1).iter().map(|v| v * v).sum();
    let t10: f64 = c.tube(1, 0).iter().map(|v| v * v).sum();
    assert!(t01 > 1e-6 && t10 > 1e-6);
    assert!(report.objective < lambda_g * norm_fro(&y).powi(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasibility_and_reported_objective(h in 2usize..=5, n in 2usize..=6, d in 1usize..=4, affine: bool, lambda_h in prop::sample::select(vec![0.0, 0.3]), seed: u64) {
        let y = tensor(h, n, d, seed);
        let cfg = SolverConfig { affine, lambda_h, max_iters: 300, ..SolverConfig::with_lambda_g(10.0) };
        let (c, report) = solve_self_representation(&y, &cfg).unwrap();
        for i in 0..n {
            prop_assert!(c.tube(i, i).iter().all(|&v| v == 0.0));
        }
        if affine {
            for j in 0..n {
                for k in 0..d {
                    let s: f64 = (0..n).map(|i| c[(i, j, k)]).sum();
                    let target = if k == 0 { 1.0 } else { 0.0 };
                    prop_assert!((s - target).abs() < 1e-6);
                }
            }
        }
        let fit = norm_fro(&(&y - &tprod(&y, &c).unwrap()));
        let recomputed = norm_f1(&c) + lambda_h * norm_ff1(&c) + 10.0 * fit * fit;
        prop_assert!((recomputed - report.objective).abs() <= 1e-8 * recomputed.max(1e-300));
        if report.converged {
            prop_assert!(report.primal_residual <= report.primal_threshold);
            prop_assert!(report.dual_residual <= report.dual_threshold);
        }
    }

    #[test]
    fn affine_translation_identity(h in 1usize..=5, n in 2usize..=6, d in 1usize..=6, seed: u64) {
        // any w whose column tube-sums are e_0
        let mut w = tensor(n, n, d, seed);
        for j in 0..n {
            for k in 0..d {
                let s: f64 = (0..n).map(|i| w[(i, j, k)]).sum();
                let target = if k == 0 { 1.0 } else { 0.0 };
                w[(0, j, k)] += target - s;
            }
        }
        let y = tensor(h, n, d, seed ^ 3);
        let m = tensor(h, 1, d, seed ^ 4);
        let mut shifted = y.clone();
        for j in 0..n {
            shifted.set_lateral_slice(j, &(&y.lateral_slice(j) + &m));
        }
        let lhs = tprod(&shifted, &w).unwrap();
        let yw = tprod(&y, &w).unwrap();
        for j in 0..n {
            let rhs = &yw.lateral_slice(j) + &m;
            prop_assert!(lhs.lateral_slice(j).max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn affinity_is_symmetric_nonnegative(n in 1usize..=7, d in 1usize..=4, seed: u64) {
        let w = tensor(n, n, d, seed);
        let m = affinity_from_tensor(&w).unwrap();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!(m.get(i, j) >= 0.0);
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                if i != j {
                    let ni: f64 = w.tube(i, j).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let nj: f64 = w.tube(j, i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    prop_assert!((m.get(i, j) - (ni + nj)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn independent_submodules_give_block_diagonal_support() {
    for (seed, lambda_g) in [(1u64, 1e2), (2, 1e3), (3, 1e4)] {
        let samples = block_instance(&[2, 2, 2], 6, 4, 0.0, seed).unwrap();
        let parts: Vec<&Tensor3> = samples.iter().map(|s| &s.points).collect();
        let y = Tensor3::concat_columns(&parts).unwrap();
        let truth: Vec<usize> = (0..3).flat_map(|c| std::iter::repeat_n(c, 6)).collect();
        let cfg = SolverConfig { max_iters: 5000, tol_abs: 1e-9, tol_rel: 1e-8, ..SolverConfig::with_lambda_g(lambda_g) };
        let (c, _) = solve_self_representation(&y, &cfg).unwrap();
        let purity = in_block_f1_fraction(&c, &truth);
        assert!(purity > 0.999, "seed {seed}, λ_g {lambda_g}: purity {purity}");
    }
}

#[test]
fn bad_configs_rejected() {
    let y = tensor(3, 3, 2, 0);
    for cfg in [
        SolverConfig { lambda_g: 0.0, ..Default::default() },
        SolverConfig { rho: -1.0, ..Default::default() },
        SolverConfig { max_iters: 0, ..Default::default() },
        SolverConfig { lambda_h: f64::NAN, ..Default::default() },
    ] {
        assert!(matches!(solve_self_representation(&y, &cfg), Err(ssmc::Error::Parameter(_))));
    }
}
