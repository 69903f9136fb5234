//! Conjugacy toolkit: trigonometric series, Bloch vectors from dual
//! eigenvectors, `SL(2,R)` completion, homological solvers, one KAM step and
//! the gap-opening certificate.

pub mod bloch;
pub mod homological;
pub mod kam;
pub mod pipeline;
pub mod trig;
pub mod wronskian;

pub use bloch::{bloch_vector, complete_to_sl2, realify, rotation_residual, BlochVector, Realified, RotationResidual, TrigCol};
pub use homological::{matrix_homological_solve, scalar_homological_solve, DivisorStats, ParabolicForm};
pub use kam::{
    expm_pade6, gap_certificate, kam_step, kam_step_synthetic, rational_edge_certificate, EdgeCertificate, GapKind,
    GapVerdict, KamStepReport,
};
pub use pipeline::{reduce_pipeline, LedgerEntry, NormalForm, ReduceConfig, Reduction};
pub use trig::{Period, TrigMat, TrigSeries};
pub use wronskian::{wronskian, WronskianReport};
