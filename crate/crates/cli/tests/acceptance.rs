//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Run with `cargo test -p ssmc-cli --test acceptance` (add `--release` for
//! realistic timings). Set `SSMC_MNIST_DIR` to a directory holding
//! `train-images-idx3-ubyte` and `train-labels-idx1-ubyte` to include the
//! optional digit experiment.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssmc::data::{self, clustering_error, SynthSpec};
use ssmc::oracles::{bcirc_singular_values_nalgebra, block_instance, in_block_f1_fraction, self_representation_fista};
use ssmc::solver::{affinity_from_tensor, solve_self_representation};
use ssmc::spectral::spectral_cluster;
use ssmc::t_algebra::*;
use ssmc::theory::{theorem3_check, SubmoduleSample};
use ssmc::{ClusterLabels, SolverConfig, Tensor3};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn pipeline_error(y: &Tensor3, truth: &ClusterLabels, cfg: &SolverConfig, seed: u64) -> ssmc::Result<f64> {
    let (c, _) = solve_self_representation(y, cfg)?;
    let labels = spectral_cluster(&affinity_from_tensor(&c)?, truth.k(), seed)?.labels;
    clustering_error(&labels, truth)
}

fn ac1_tprod_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (h, l, k, d) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=8));
        let a = Tensor3::random_normal(h, l, d, &mut rng);
        let b = Tensor3::random_normal(l, k, d, &mut rng);
        let fast = tprod(&a, &b).unwrap();
        let slow = tprod_bcirc_oracle(&a, &b).unwrap();
        worst = worst.max(norm_fro(&(&fast - &slow)) / norm_fro(&fast).max(1e-300));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-10 && secs < 5.0, format!("max rel err {worst:.2e}, {secs:.2} s"))
}

fn ac2_bcirc_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (h, n, d) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=8));
        let a = Tensor3::random_normal(h, n, d, &mut rng);
        let mut fast = bcirc_singular_values(&a);
        fast.sort_by(|x, y| y.total_cmp(x));
        let slow = bcirc_singular_values_nalgebra(&a).unwrap();
        if fast.len() != slow.len() {
            return outcome(false, format!("count {} vs {}", fast.len(), slow.len()));
        }
        for (x, y) in fast.iter().zip(&slow) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(worst < 1e-8, format!("max abs diff {worst:.2e}"))
}

fn ac3_norm_inequalities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut gram_violations, mut op_violations) = (0, 0);
    for _ in 0..1000 {
        let (h, n, d) = (rng.gen_range(1..=6), rng.gen_range(1..=5), rng.gen_range(1..=8));
        let x = Tensor3::random_normal(h, 1, d, &mut rng);
        let fro = norm_fro(&x);
        if fro * fro > norm_fro(&tprod(&ttranspose(&x), &x).unwrap()) * (1.0 + 1e-12) {
            gram_violations += 1;
        }
        let y = Tensor3::random_normal(h, n, d, &mut rng);
        let a = Tensor3::random_normal(n, rng.gen_range(1..=4), d, &mut rng);
        let smax = bcirc_singular_values(&y).into_iter().fold(0.0, f64::max);
        if norm_fro(&tprod(&y, &a).unwrap()) > smax * norm_fro(&a) * (1.0 + 1e-12) {
            op_violations += 1;
        }
    }
    outcome(
        gram_violations == 0 && op_violations == 0,
        format!("violations: gram {gram_violations}, operator norm {op_violations} (1000 each)"),
    )
}

fn ac4_affine_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (h, n, d) = (rng.gen_range(1..=6), rng.gen_range(2..=6), rng.gen_range(1..=8));
        let mut w = Tensor3::random_normal(n, n, d, &mut rng);
        for j in 0..n {
            for k in 0..d {
                let s: f64 = (0..n).map(|i| w[(i, j, k)]).sum();
                w[(0, j, k)] += if k == 0 { 1.0 } else { 0.0 } - s;
            }
        }
        let y = Tensor3::random_normal(h, n, d, &mut rng);
        let m = Tensor3::random_normal(h, 1, d, &mut rng);
        let mut moved = y.clone();
        for j in 0..n {
            moved.set_lateral_slice(j, &(&y.lateral_slice(j) + &m));
        }
        let lhs = tprod(&moved, &w).unwrap();
        let yw = tprod(&y, &w).unwrap();
        for j in 0..n {
            worst = worst.max(lhs.lateral_slice(j).max_abs_diff(&(&yw.lateral_slice(j) + &m)));
        }
    }
    outcome(worst < 1e-10, format!("max abs diff {worst:.2e}"))
}

fn ac5_synthetic_recovery() -> Outcome {
    let spec = SynthSpec::uniform(28, 28, 4, 2, 10, 5);
    let sample = data::generate_synthetic(&spec).unwrap();
    let mut parts = Vec::new();
    let mut ok = false;
    for lambda_g in [1e-2, 1.0, 1e2] {
        let start = Instant::now();
        let err = pipeline_error(&sample.tensor, &sample.truth, &SolverConfig::with_lambda_g(lambda_g), spec.seed).unwrap();
        let secs = start.elapsed().as_secs_f64();
        ok |= err == 0.0 && secs < 120.0;
        parts.push(format!("λ_g={lambda_g:e}: error {err:.3} in {secs:.1} s"));
    }
    outcome(ok, parts.join("; "))
}

/// Objective of the matrix case, written out entrywise.
fn matrix_objective(y: &Tensor3, c: &[f64], lambda_g: f64) -> f64 {
    let (h, n, _) = y.shape();
    let mut fit = 0.0;
    for i in 0..h {
        for j in 0..n {
            let yc: f64 = (0..n).map(|q| y[(i, q, 0)] * c[q * n + j]).sum();
            fit += (y[(i, j, 0)] - yc).powi(2);
        }
    }
    c.iter().map(|v| v.abs()).sum::<f64>() + lambda_g * fit
}

fn ac6_matrix_special_case() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let lambda_g = 5.0;
    let cfg = SolverConfig {
        max_iters: 20_000,
        tol_abs: 1e-10,
        tol_rel: 1e-10,
        ..SolverConfig::with_lambda_g(lambda_g)
    };
    for _ in 0..5 {
        let y = Tensor3::random_normal(8, 6, 1, &mut rng);
        let (c, _) = solve_self_representation(&y, &cfg).unwrap();
        let reference = self_representation_fista(&y, lambda_g, 0.0, 100_000);
        let ours = matrix_objective(&y, c.as_slice(), lambda_g);
        let theirs = matrix_objective(&y, &reference, lambda_g);
        worst = worst.max((ours - theirs).abs() / theirs);
    }
    outcome(worst < 1e-4, format!("max relative objective gap {worst:.2e}"))
}

/// Stacks depth into rows so each sample becomes a plain `H·D` vector.
fn vectorize(t: &Tensor3) -> Tensor3 {
    let (h, n, d) = t.shape();
    Tensor3::from_fn(h * d, n, 1, |r, j, _| t[(r % h, j, r / h)])
}

const SHIFT_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

const SHIFT_SEEDS: u64 = 10;

/// Mean clustering error over `SHIFT_SEEDS` shift-model draws for the tensor
/// pipeline at one λ_g, and for the vectorized pipeline at its best grid λ_g.
fn shift_surrogate() -> (f64, f64) {
    let (mut ours, mut vectorized) = (0.0, 0.0);
    for seed in 0..SHIFT_SEEDS {
        let mut spec = SynthSpec::uniform(4, 28, 3, 1, 10, seed);
        spec.shift_model = true;
        let sample = data::generate_synthetic(&spec).unwrap();
        let flat = vectorize(&sample.tensor);
        ours += pipeline_error(&sample.tensor, &sample.truth, &SolverConfig::with_lambda_g(100.0), seed).unwrap();
        vectorized += SHIFT_GRID
            .iter()
            .map(|&lg| pipeline_error(&flat, &sample.truth, &SolverConfig::with_lambda_g(lg), seed).unwrap())
            .fold(f64::INFINITY, f64::min);
    }
    (ours / SHIFT_SEEDS as f64, vectorized / SHIFT_SEEDS as f64)
}

fn ac7_shift_robustness() -> Outcome {
    let (ours, vector_best) = shift_surrogate();
    let mut pass = ours <= 0.1 && vector_best >= 0.3;
    let mut detail = format!(
        "surrogate over {SHIFT_SEEDS} seeds: tensor mean error {ours:.3}, vectorized mean best-grid error {vector_best:.3}"
    );
    match std::env::var_os("SSMC_MNIST_DIR") {
        Some(dir) => match mnist_digits(Path::new(&dir)) {
            Ok(mean) => {
                pass &= mean <= 0.4;
                detail.push_str(&format!("; digits 2/4/8 mean best-grid error {mean:.3}"));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("; digit data unusable: {e}"));
            }
        },
        None => detail.push_str("; digit part skipped (SSMC_MNIST_DIR unset)"),
    }
    outcome(pass, detail)
}

fn mnist_digits(dir: &Path) -> ssmc::Result<f64> {
    let images = data::load_idx_images(dir.join("train-images-idx3-ubyte"))?;
    let labels = data::load_idx_labels(dir.join("train-labels-idx1-ubyte"))?;
    let mut total = 0.0;
    for seed in 0..5 {
        let picked = data::select_classes(&images, &labels, &[2, 4, 8], 20, seed)?;
        let shifted = data::shift_images(&picked.tensor, 6, seed)?;
        let best = SHIFT_GRID
            .iter()
            .map(|&lg| pipeline_error(&shifted, &picked.truth, &SolverConfig::with_lambda_g(lg), seed))
            .collect::<ssmc::Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    Ok(total / 5.0)
}

fn stack(samples: &[SubmoduleSample]) -> (Tensor3, Vec<usize>) {
    let parts: Vec<&Tensor3> = samples.iter().map(|s| &s.points).collect();
    let truth = samples
        .iter()
        .enumerate()
        .flat_map(|(c, s)| std::iter::repeat_n(c, s.points.n()))
        .collect();
    (Tensor3::concat_columns(&parts).unwrap(), truth)
}

fn ac8_recovery_condition() -> Outcome {
    let cfg = SolverConfig {
        max_iters: 5000,
        tol_abs: 1e-9,
        tol_rel: 1e-8,
        ..SolverConfig::with_lambda_g(1e3)
    };
    let (mut holding, mut worst_purity, mut seed) = (0, 1.0f64, 0u64);
    while holding < 20 && seed < 200 {
        let samples = block_instance(&[2, 2, 2], 6, 4, 0.005, seed).unwrap();
        seed += 1;
        let holds = (0..samples.len()).all(|i| theorem3_check(&samples, i, 50, seed).unwrap().holds);
        if !holds {
            continue;
        }
        holding += 1;
        let (y, truth) = stack(&samples);
        let (c, _) = solve_self_representation(&y, &cfg).unwrap();
        worst_purity = worst_purity.min(in_block_f1_fraction(&c, &truth));
    }

    // duplicated submodules: coherence near one, no assertion
    let mut coherent_purity = Vec::new();
    for seed in 0..20u64 {
        let mut samples = block_instance(&[2, 2], 6, 4, 0.0, 500 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gens = samples[0].generators.clone();
        let pts = tprod(&gens, &Tensor3::random_normal(2, 6, 4, &mut rng)).unwrap();
        samples[1] = SubmoduleSample::new(gens, pts, None).unwrap();
        let (y, truth) = stack(&samples);
        let (c, _) = solve_self_representation(&y, &cfg).unwrap();
        coherent_purity.push(in_block_f1_fraction(&c, &truth));
    }
    let mean_coherent = coherent_purity.iter().sum::<f64>() / coherent_purity.len() as f64;
    outcome(
        holding == 20 && worst_purity > 0.999,
        format!(
            "{holding} instances satisfy the condition (searched {seed} seeds), min in-block F1 fraction {worst_purity:.6}; \
             coherent instances mean {mean_coherent:.3} (informational)"
        ),
    )
}

fn run_cli(cwd: &Path, args: &[String]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ssmc"))
        .current_dir(cwd)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

/// The four commands with fixed seeds, using paths relative to the run directory.
fn command_lists() -> Vec<Vec<String>> {
    let lists: [&[&str]; 4] = [
        &[
            "synth", "--h", "6", "--depth", "5", "--clusters", "3", "--per-cluster", "6", "--noise", "0.01",
            "--seed", "11", "--out", "synth.json", "--data-out", "data.tsr", "--truth-out", "truth.json",
        ],
        &[
            "cluster", "--input", "data.tsr", "--truth", "truth.json", "--k", "3", "--lambda-g", "50", "--seed",
            "4", "--out", "cluster.json", "--affinity-out", "affinity.tsr",
        ],
        &[
            "sweep", "--input", "data.tsr", "--truth", "truth.json", "--k", "3", "--grid", "1e-2,1,1e2", "--seed",
            "4", "--out", "sweep.json",
        ],
        &[
            "check", "--h", "6", "--depth", "4", "--clusters", "2", "--per-cluster", "5", "--seed", "3", "--out",
            "check.json",
        ],
    ];
    lists.iter().map(|l| l.iter().map(|s| s.to_string()).collect()).collect()
}

fn ac9_determinism() -> Outcome {
    let runs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for run in &runs {
        for cmd in command_lists() {
            if let Err(e) = run_cli(run.path(), &cmd) {
                return outcome(false, e);
            }
        }
    }
    let outputs = [
        "synth.json", "data.tsr", "truth.json", "cluster.json", "affinity.tsr", "sweep.json", "sweep.csv", "check.json",
    ];
    for name in outputs {
        let read = |dir: &tempfile::TempDir| std::fs::read(dir.path().join(name)).unwrap();
        if read(&runs[0]) != read(&runs[1]) {
            return outcome(false, format!("{name} differs between runs"));
        }
    }
    outcome(true, format!("{} output files identical across two runs of all four commands", outputs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("AC1 t-product oracle equivalence", ac1_tprod_oracle),
        ("AC2 bcirc spectrum", ac2_bcirc_spectrum),
        ("AC3 norm inequalities", ac3_norm_inequalities),
        ("AC4 affine translation identity", ac4_affine_identity),
        ("AC5 synthetic recovery", ac5_synthetic_recovery),
        ("AC6 matrix special case", ac6_matrix_special_case),
        ("AC7 shift robustness", ac7_shift_robustness),
        ("AC8 recovery condition", ac8_recovery_condition),
        ("AC9 CLI determinism", ac9_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let result = run();
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
