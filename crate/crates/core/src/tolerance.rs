//! Numerical thresholds shared across modules.

/// Eigenvalues at or below `TAU_RANK · λmax` are treated as zero.
pub const TAU_RANK: f64 = 1e-12;
/// Leaked mass above which a relative entropy is declared infinite.
pub const TAU_SUPPORT: f64 = 1e-9;
/// Relative Hermiticity tolerance accepted without comment.
pub const TAU_HERM: f64 = 1e-12;
/// Largest Hermiticity defect that is healed by symmetrization.
pub const HEAL_LIMIT: f64 = 1e-8;
/// Most negative eigenvalue accepted for a positive semidefinite matrix.
pub const TAU_PSD: f64 = 1e-10;
/// Unit-trace tolerance.
pub const TAU_TRACE: f64 = 1e-10;
/// Kraus completeness and isometry tolerance.
pub const TAU_COMPLETE: f64 = 1e-10;
/// Natural-log to bits.
pub const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;
