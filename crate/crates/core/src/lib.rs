//! Polynomial feedback synthesis for quadratic-in-state control systems by
//! Al'Brekht's method, in Kronecker-product form.

pub mod albrekht;
pub mod error;
pub mod kron;
pub mod kronsum;
pub mod problems;
pub mod riccati;
pub mod simulate;

pub use error::{QqrError, Result};
pub use kron::{CoeffVector, Matrix};
