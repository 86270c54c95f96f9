//! Linear sketches: k-sparse recovery, ℓ0 sampling and estimation,
//! p-stable norm estimation, and the random-variable generators they use.

pub mod exact;
pub mod exponential;
pub mod frame;
pub mod ksparse;
pub mod l0;
pub mod pstable;

pub use exact::{ExactSum, FixedTerm, Q_BITS};
pub use exponential::{exp_argmax_distribution_check, exp_from_uniform, ExpDraw};
pub use ksparse::{Decoded, KSparse, DEFAULT_FAIL};
pub use l0::{rounded_size, L0Estimator, L0Sampler};
pub use pstable::{gen_p_stable, median_abs, median_abs_monte_carlo, reps_for, PStableSketch};
