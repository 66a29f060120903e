//! Curvature of contact sub-Riemannian manifolds from adapted frames.
//!
//! Geometry is evaluated pointwise from structure functions, differential
//! operators are evaluated with truncated Taylor arithmetic, and the
//! resulting bounds feed curvature-dimension certificates.

#![no_std]

extern crate alloc;

pub mod cd;
pub mod frame;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod models;
pub mod operators;

pub use cd::{CdConstants, CdParams, CertificateReport, Objective};
pub use frame::{ContactModel, FrameError, StructureData};
pub use geometry::GeometryData;
pub use jets::{Jet, JetSpace, Point, Polynomial, ScalarField};
pub use operators::OperatorContext;
