//! Numerical engine for pointwise Hermitian geometry.
//!
//! The crate evaluates explicit Hermitian metrics on chart domains and
//! computes, at individual chart points, the Chern, Levi-Civita, and Bismut
//! connections together with their torsion and curvature. Everything is
//! driven by exact forward-mode differentiation (second-order Wirtinger
//! jets), so structure equations and tensor identities can be verified to
//! near machine precision.
//!
//! Main pieces:
//!
//! * [`jets`] — Wirtinger jets of smooth (not necessarily holomorphic)
//!   chart functions, up to second order.
//! * [`expr`] — a small expression language for closed-form coframe
//!   entries, evaluated through jets.
//! * [`forms`] — pointwise exterior algebra of complex differential forms
//!   with jet-valued coefficients.
//! * [`connection`] — the connection/torsion/curvature pipeline over a
//!   unitary coframe.
//! * [`catalog`] — built-in metric models (Hopf, exponentially twisted
//!   flat metrics, Riemannian-flat families, seeded perturbations).
//! * [`lie`] — Lie algebras with bi-invariant inner products, compatible
//!   complex structures, and exponential-chart export.
//! * [`suite`] — the registry of named identity checks and the seeded
//!   verification runner.

// Tensor code indexes several arrays by shared i/j/k/l indices; iterator
// rewrites of those loops obscure the math.
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod connection;
pub mod error;
pub mod exec;
pub mod expr;
pub mod forms;
pub mod jets;
pub mod lie;
pub mod linalg;
pub mod suite;

pub use error::{Error, Result};
pub use jets::{ChartPoint, Jet2, C64};
