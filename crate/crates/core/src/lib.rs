//! Dolbeault calculus for unitary connections on Hermitian bundles over flat
//! Kähler tori: the Yang-Mills bar functional `½∫‖F^{0,2}_A‖²`, its gradient
//! flow, and the Hodge-Kähler, Weitzenböck and integrability identities that
//! go with it, discretized spectrally.

// `!(x > 0.0)` is the intended NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod calculus;
pub mod cli;
pub mod connection;
pub mod flow;
pub mod forms;
pub mod functional;
pub mod geometry;
pub mod par;
pub mod spectral;

pub use connection::{gauge_complex_hat, gauge_unitary, Background, Connection, Curvature, GaugeTransform};
pub use error::{Error, Result};
pub use field::{MatrixField, C64};
pub use forms::{CoeffRule, FormPQ};
pub use geometry::{l2_inner, wirtinger, TangentVector, TorusGeometry};
