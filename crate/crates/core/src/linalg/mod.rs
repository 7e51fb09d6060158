//! Sparse symmetric matrices, a fill-reducing LDLᵀ direct solver, and Krylov
//! methods with a caller-defined inner product.

mod krylov;
mod ldl;
mod ordering;
mod sparse;

pub use krylov::{conjugate_gradient, gmres, KrylovReport};
pub use ldl::{LdlFactor, PivotFailure, SymbolicLdl};
pub use ordering::nested_dissection;
pub use sparse::{SparseSymMatrix, SparsityPattern};
