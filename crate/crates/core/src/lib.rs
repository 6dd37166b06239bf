//! Constructive non-identifiability for blind linear deconvolution.
//!
//! The crate builds pairs `(x, y)` and `(x', y')` that are not scalar
//! rescalings of each other yet produce the same linear convolution, for
//! canonical-sparse, repetition-coded and cooperatively-coded feasible cones.
//! Every generated witness can be audited independently with
//! [`verification::verify_instance`], and the dimension of each generated
//! family can be measured with a finite-difference Jacobian rank probe.

pub mod cones;
pub mod conv;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod quotient;
pub mod reference;
pub mod rng;
pub mod verification;

pub use cones::{ConeSpec, IndexSet, PairType, PairTypeKind};
pub use error::{Error, Result};
pub use generators::{AdversarialInstance, AngleParams, InstanceParams, SignalPair};
pub use quotient::QuotientElement;
pub use verification::{DimProbeResult, Family, SideSpec, VerificationReport};

/// Default tolerance for numerical rank, membership and collinearity tests.
pub const DEFAULT_TOL: f64 = 1e-9;
