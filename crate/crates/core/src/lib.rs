//! Space-time mutual information (STMI) of finite-dimensional quantum and
//! classical systems.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The type
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! command-line harness uses.

// `!(x > 0.0)` rejects NaN; index loops follow the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod space;
pub mod state;
pub mod tolerance;
pub mod variational;
pub mod ansatz;
pub mod bounds;
pub mod markov;
pub mod models;
pub mod classical;

pub use channel::{channel_from_unitary, ChannelSpec, KrausChannel, MatrixSpec, NamedChannel};
pub use entropy::{
    conditional_mutual_information, matrix_log_support, mutual_information, relative_entropy,
    von_neumann_entropy, EntropyValue,
};
pub use error::{Error, Result};
pub use scalar::Real;
pub use space::TensorSpace;
pub use state::{random_density_matrix, DensityMatrix, HermitianObservable};

/// Complex `f64` matrix.
pub type Matrix = linalg::CMat<f64>;
/// `f64` density matrix.
pub type Density = DensityMatrix<f64>;
/// `f64` observable.
pub type Observable = HermitianObservable<f64>;
/// `f64` Kraus channel.
pub type Channel = KrausChannel<f64>;
/// `f64` extended entropy value.
pub type Entropy = EntropyValue<f64>;
