//! Deviation bounds for empirical frequencies of product binomial models.
//!
//! Given a nonincreasing success-probability sequence p(1) >= p(2) >= ...
//! observed through n independent draws per coordinate, this crate
//! computes three views of the expected maximal deviation
//! sup_j |p_hat(j) - p(j)| and its one-sided and l_q relatives:
//!
//! * closed-form rate certificates with regime labels (`bounds`),
//! * exact small-n reference values by CDF sweeps (`oracle`),
//! * seeded Monte Carlo estimators with deterministic parallelism (`sim`).
//!
//! Sequences are described by run-length blocks of equal probability and
//! may carry astronomically many coordinates; counts then live in log
//! scale and every computation stays in the log domain (`seq`,
//! `binomial`).

pub mod binomial;
pub mod error;
pub(crate) mod numeric;
pub mod bounds;
pub mod oracle;
pub mod seq;
pub mod sim;

pub use error::{Error, Result};
