//! Numerical engine for implicit Lagrangian systems on Lie algebroids.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`]: expression parsing and exact second-order jets,
//! * [`algebroid`]: anchor and structure functions, structure equations,
//!   the algebroid differential, the linear Poisson bracket and constraint
//!   subbundles,
//! * [`prolong`]: coordinate maps on the prolongations over `E` and `E*`,
//! * [`dirac`]: the almost Dirac structure induced by a subbundle,
//! * [`dynamics`]: implicit Lagrangian equations and their integrators,
//! * [`hj`]: Hamilton-Jacobi sections,
//! * [`models`] and [`config`]: built-in systems and the JSON model format.

pub mod algebroid;
pub mod config;
pub mod dirac;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod hj;
pub mod linalg;
pub mod models;
pub mod prolong;
pub mod sampling;

pub use algebroid::{BasePoint, DualPoint, FiberPoint, LieAlgebroid, Subbundle};
pub use dynamics::{ImplicitSystem, State, Trajectory};
pub use expr::{parse, Expr};
pub use prolong::Lagrangian;
