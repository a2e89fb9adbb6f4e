use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssmc::data::clustering_error;
use ssmc::linalg::{sym_eigen, Matrix};
use ssmc::spectral::{kmeans, spectral_cluster};
use ssmc::AffinityMatrix;

/// Noisy block affinity with strong within-block weights.
fn noisy_blocks(sizes: &[usize], seed: u64) -> (AffinityMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owner: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let n = owner.len();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let w = if owner[i] == owner[j] { 1.0 + rng.gen::<f64>() } else { 0.05 * rng.gen::<f64>() };
            v[i * n + j] = w;
            v[j * n + i] = w;
        }
    }
    (AffinityMatrix::from_vec(n, v).unwrap(), owner)
}

fn normalized(m: &AffinityMatrix) -> Matrix {
    let n = m.n();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).sum::<f64>().max(1e-300)).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, m.get(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn permutation_equivariance(a in 3usize..=6, b in 3usize..=6, c in 3usize..=6, seed: u64) {
        let (m, _) = noisy_blocks(&[a, b, c], seed);
        let n = m.n();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let base = spectral_cluster(&m, 3, 5).unwrap().labels;
        let moved = spectral_cluster(&m.permuted(&perm), 3, 5).unwrap().labels;
        let pulled: Vec<usize> = (0..n).map(|i| base.labels()[perm[i]]).collect();
        let pulled = ssmc::ClusterLabels::new(pulled, 3).unwrap();
        prop_assert_eq!(clustering_error(&moved, &pulled).unwrap(), 0.0);
    }

    #[test]
    fn eigenpairs_have_small_residuals(n in 2usize..=12, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w: f64 = rng.gen();
                v[i * n + j] = w;
                v[j * n + i] = w;
            }
        }
        let a = normalized(&AffinityMatrix::from_vec(n, v).unwrap());
        let eig = sym_eigen(&a);
        let scale = a.fro_norm();
        for (c, &lambda) in eig.values.iter().enumerate() {
            let vec: Vec<f64> = (0..n).map(|r| eig.vectors.get(r, c)).collect();
            let av = a.matvec(&vec);
            let res = av.iter().zip(&vec).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-8 * scale);
        }
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn lloyd_inertia_never_increases(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = Matrix::from_vec(30, 3, (0..90).map(|_| rng.gen::<f64>()).collect());
        let run = kmeans(&pts, 3, seed).unwrap();
        prop_assert!(run.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn noisy_blocks_are_recovered() {
    for seed in 0..10 {
        let (m, owner) = noisy_blocks(&[5, 7, 6], seed);
        let out = spectral_cluster(&m, 3, seed).unwrap();
        let truth = ssmc::ClusterLabels::new(owner, 3).unwrap();
        assert_eq!(clustering_error(&out.labels, &truth).unwrap(), 0.0);
        assert_eq!(out.eigenvalues.len(), 3);
        assert!((out.eigenvalues[0] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn same_seed_same_labels() {
    let (m, _) = noisy_blocks(&[4, 4, 4, 4], 3);
    let a = spectral_cluster(&m, 4, 17).unwrap();
    let b = spectral_cluster(&m, 4, 17).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.embedding_csv(), b.embedding_csv());
}
