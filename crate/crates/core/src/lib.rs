//! Sparse submodule clustering of third-order tensors.
//!
//! Samples are lateral slices `H×1×D` of a data tensor `Y ∈ ℝ^{H×N×D}`.
//! Tubes along depth act as scalars through the t-product, so a cluster is a
//! submodule: the set of t-linear combinations of a few generators. The
//! pipeline is
//!
//! 1. [`solver::solve_self_representation`] finds a tube-sparse coefficient
//!    tensor `C` with `Y ≈ Y ∗ C`,
//! 2. [`solver::affinity_from_tensor`] turns tube norms of `C` into a
//!    symmetric affinity,
//! 3. [`spectral::spectral_cluster`] partitions that affinity.
//!
//! ```
//! use ssmc::{data, solver, spectral};
//!
//! let mut spec = data::SynthSpec::uniform(6, 4, 2, 1, 5, 3);
//! spec.noise_sigma = 0.0;
//! let sample = data::generate_synthetic(&spec).unwrap();
//! let config = solver::SolverConfig::with_lambda_g(100.0);
//! let (c, _report) = solver::solve_self_representation(&sample.tensor, &config).unwrap();
//! let m = solver::affinity_from_tensor(&c).unwrap();
//! let labels = spectral::spectral_cluster(&m, 2, 0).unwrap().labels;
//! assert_eq!(data::clustering_error(&labels, &sample.truth).unwrap(), 0.0);
//! ```

pub mod data;
pub mod error;
pub mod linalg;
#[cfg(feature = "test-support")]
pub mod oracles;
pub mod solver;
pub mod spectral;
pub mod t_algebra;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use solver::{AffinityMatrix, SolverConfig, SolverReport};
pub use spectral::ClusterLabels;
pub use tensor::{FourierTensor3, OrientedMatrix, Tensor3, Tube};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/t-product.md")]
    mod t_product {}
    #[doc = include_str!("../../../book/src/self-representation.md")]
    mod self_representation {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/guarantees.md")]
    mod guarantees {}
    #[doc = include_str!("../../../book/src/data-and-cli.md")]
    mod data_and_cli {}
}
