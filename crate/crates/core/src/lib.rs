//! Sparse, community-structured networks of reciprocating temporal interactions.
//!
//! Each node `i` carries a sociability `w_i0` and `p` community scores
//! `β_ik ~ Gamma(a_k, b_k)`, giving affiliation weights `w_ik = w_i0 · β_ik`.
//! The sociabilities are the atoms of a generalized gamma process, so the
//! number of active nodes is random and the graph can be dense or sparse
//! depending on the tail index. Each directed pair interacts through a
//! mutually-exciting Hawkes process:
//!
//! ```text
//! λ_ij(t) = μ_ij + η Σ_{t_ji < t} exp(-δ (t - t_ji)),    μ_ij = Σ_k w_ik w_jk
//! ```
//!
//! so an event from `j` to `i` raises the rate of replies from `i` to `j`
//! (reciprocity), and the base rates inherit community structure from the
//! weights.
//!
//! The crate provides:
//!
//! - [`measures`]: generalized gamma process sampling (exact for `σ < 0`,
//!   truncated series for `σ ≥ 0`), community score sampling, and the Laplace
//!   exponent of the compound measure.
//! - [`hawkes`]: exact pair simulation by thinning, O(n) log-likelihood via
//!   the exponential-kernel recursion, and closed-form expected counts.
//! - [`generator`]: whole-network simulation over a fixed horizon.
//! - [`moments`]: closed-form / quadrature / Monte Carlo calculators for the
//!   expected number of interactions, edges, and active nodes.
//! - [`inference`]: two-stage MCMC — a Gibbs sampler (HMC + MH + latent
//!   counts) for weights and hyperparameters given the binary graph, then an
//!   MH sampler for the reciprocity kernel given the event times.
//! - [`predict`]: temporal train/test splitting, expected-count prediction
//!   (closed-form ODE solution or forward simulation), baseline models, and
//!   RMSE scoring.
//! - [`io`] / [`pipeline`]: edge-list ingestion, artifact emission, and the
//!   deterministic end-to-end runs behind the `hawkes-ccrm` binary.
//!
//! Everything is deterministic given a master seed: RNG streams are split per
//! pair / chain / replicate by the documented rule in [`rng`].

pub mod dataset;
pub mod error;
pub mod exec;
pub mod generator;
pub mod hawkes;
pub mod inference;
pub mod io;
pub mod measures;
pub mod moments;
pub mod pipeline;
pub mod predict;
pub mod quadrature;
pub mod rng;

pub use dataset::{BinaryGraph, Interaction, InteractionDataset};
pub use error::{Error, Result};
pub use generator::{generate, GeneratorConfig, SyntheticNetwork};
pub use hawkes::{KernelParams, PairHistory, PairRates};
pub use measures::{CcrmHyper, GgpHyper, LevyMoments, NodeAtom, TotalMass};
