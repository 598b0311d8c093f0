//! Strong data processing coefficients of finite discrete channels.
//!
//! The contraction coefficient of a channel `W` under an f-divergence `D_f` is
//!
//! ```text
//! η_f(W) = sup  D_f(W∘P ‖ W∘Q) / D_f(P ‖ Q)
//! ```
//!
//! over input pairs with `0 < D_f(P‖Q) < ∞`. The supremum is attained (or
//! approached) by pairs supported on two common input letters, so the
//! coefficient of an `n`-input channel is the largest coefficient among its
//! `n(n-1)/2` binary-input subchannels. This crate computes it that way:
//!
//! - [`model`]: distributions, channels, and the JSON channel file format.
//! - [`divergence`]: KL, total variation, χ², and squared Hellinger behind one
//!   interface, plus mutual information.
//! - [`binary`]: the two-row solver (grid search with zoom refinement and an
//!   explicit scan of the `q → p` limit).
//! - [`contraction`]: the pairwise reduction, Hellinger-diameter bounds, and the
//!   upper concave envelope of achievable `(D_in, D_out)` points.
//! - [`post_sdpi`]: a lower estimate of the reverse (post-SDPI) coefficient.
//! - [`oracle`]: brute-force sampling checks of the reduction and the envelope.
//!
//! All divergences are in nats.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod binary;
pub mod contraction;
pub mod divergence;
mod error;
pub mod model;
mod numeric;
pub mod oracle;
pub mod post_sdpi;
pub mod rng;

pub use binary::{solve_binary, BinaryProblem, BinarySolution, SolverConfig};
pub use contraction::{
    eta_f, eta_f_with, hellinger_diameter, sandwich_bounds, trace_envelope, ContractionResult,
    EnvelopeCurve, EnvelopeGrid, SandwichBounds,
};
pub use divergence::{df, df_binary, mutual_information, DivergenceKind};
pub use error::{Error, Result};
pub use model::{parse_channel, validate_pair, Channel, Distribution};
pub use oracle::OracleReport;
pub use post_sdpi::{post_eta, post_ratio, PostConfig, PostProblem, PostResult};
