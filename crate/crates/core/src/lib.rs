//! Numerical laboratory for indefinite inhomogeneous quadratic forms at
//! integer points: counting against volume asymptotics, exceptional and
//! quasinull subspaces, Diophantine diagnostics, geometry of numbers, and
//! pair correlation for flat tori with flux.
//!
//! The form algebra is generic over [`Scalar`]; the aliases below name the
//! instantiations used throughout.

pub mod counting;
pub mod diophantine;
pub mod enumerate;
pub mod error;
pub mod forms;
pub mod io;
pub mod latgeo;
pub mod linalg;
pub mod regions;
pub mod scalar;
pub mod spectra;
pub mod subspaces;
pub mod volume;

pub use error::{Error, Result};
pub use forms::{InhomForm, RationalityClass, Signature, SymmetricForm};
pub use scalar::{Rational, Real, Scalar};

pub type FloatForm = SymmetricForm<f64>;
pub type ExactForm = SymmetricForm<Rational>;
pub type TaggedForm = SymmetricForm<Real>;
pub type FloatInhomForm = InhomForm<f64>;
pub type ExactInhomForm = InhomForm<Rational>;
pub type TaggedInhomForm = InhomForm<Real>;
