//! Numerical laboratory for adjointable operators on finite-dimensional
//! Hilbert C*-modules.
//!
//! The coefficient algebra is a finite direct sum A = ⊕_i M_{n_i}(ℂ)
//! ([`algebra`]), the module is the standard X = A^k with its A-valued
//! inner product, and operators are k×k matrices over A ([`module_space`]).
//! On top of a self-contained Jacobi kernel layer ([`numkernel`]) the crate
//! builds the polar decomposition with its equivalent conditions
//! ([`decomposition`]), the unitary factorizations T = U·|T| and T = U·T*
//! characterizing normality together with the Fuglede-Putnam theorem and
//! the product-normality criterion ([`normality`]), and the bounded
//! transform of regular operators ([`regular`]). The [`harness`] runs
//! deterministic randomized suites over all of it and emits JSON reports
//! whose failing instances replay bit for bit.

pub mod algebra;
pub mod cmatrix;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod module_space;
pub mod normality;
pub mod numkernel;
pub mod regular;
pub mod report;
pub mod rng;
pub mod tol;

pub use algebra::{AlgebraElement, AlgebraShape};
pub use decomposition::PolarParts;
pub use error::{Error, Result};
pub use module_space::{ModuleVector, OperatorMatrix};
pub use regular::RegularOp;
pub use tol::Tolerances;
