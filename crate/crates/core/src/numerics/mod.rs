//! Small numerical kernels: adaptive quadrature, symmetric eigenvalues,
//! bisection and golden-section search.

pub mod eigen;
pub mod golden;
pub mod quadrature;
pub mod roots;

pub use eigen::{symmetric_eigenvalues, symmetric_eigenvalues_dyn};
pub use golden::{golden_max, Maximum};
pub use quadrature::{Estimate, Quadrature};
pub use roots::bisect;
