//! Partition-function estimation for Pauli-sum Hamiltonians.
//!
//! The pipeline builds a cooling schedule from Clifford-shadow overlap
//! estimates, prepares Gibbs purifications variationally, and combines
//! Chebyshev-expanded mean values into a telescoping product for `Z(β)`.
//! Every stochastic stage has a dense oracle counterpart in [`exactsim`].

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clifford;
pub mod error;
pub mod exactsim;
pub mod mvcs;
pub mod pauli;
pub mod pipeline;
pub mod pvgs;
pub mod schedule;
pub mod shadows;

pub use error::{Error, Result};
