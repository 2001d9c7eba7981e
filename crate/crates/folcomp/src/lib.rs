//! Geometry of homogeneous Riemannian foliations with minimal leaves.
//!
//! A model is a metric Lie algebra `g = H (+) V` with `V` a subalgebra. The
//! crate evaluates the adapted connection, its torsion and curvature, the
//! Ricci-like tensor `𝔯` and its lower bound `K`, solves geodesics and
//! distances on the group, and audits the horizontal Laplacian comparison
//! theorems and their stochastic consequences numerically.

pub mod algebra;
pub mod bundled;
pub mod comparison;
pub mod connection;
pub mod error;
pub mod geodesy;
pub mod group;
pub mod model;
pub mod report;
pub mod stochastic;
pub mod suite;

pub use connection::{ConnectionKind, TensorReport};
pub use error::{CertificateName, Error, Result};
pub use geodesy::{GeodesicRecord, MinimalCertificate, TransportKind};
pub use group::GroupPoint;
pub use model::{AlgebraVector, Certificates, FoliatedModel, ModelSpec};
