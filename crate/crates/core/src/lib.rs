//! Energy-conserving Crank–Nicolson mixed finite element solver for the
//! Maxwell–Schrödinger equations in the Coulomb gauge on the unit cube.
//!
//! The library is generic over the real scalar type (`f32` or `f64`); the
//! `*64` aliases below fix it to `f64`, which is what the CLI uses.

pub mod assembly;
pub mod diagnostics;
pub mod fespace;
pub mod manufactured;
pub mod mesh;
pub mod scalar;
pub mod sparse;
pub mod stepper;

pub use num_complex::Complex;
pub use scalar::{Field, Real};

pub type Complex64 = Complex<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type FeSpace64 = fespace::FeSpace<f64>;
pub type SparseMatrix64 = sparse::CsrMatrix<f64>;
pub type ComplexMatrix64 = sparse::CsrMatrix<Complex64>;
pub type State64 = stepper::State<f64>;
pub type Simulation64 = stepper::Simulation<f64>;
