//! Exact-arithmetic engine for deciding whether a morphism of graded algebras
//! over an operad lifts to a morphism of homotopy algebras at a finite
//! truncation, and whether two such lifts are homotopic.
//!
//! The engine works over Q or GF(p), represents homotopy structures as sparse
//! structure maps on a tree-shaped comodule basis, and reduces every stage of
//! the lifting induction to an exact sparse linear solve.  Obstructions come
//! back as certified cocycles: a witness vector proves unsolvability, and the
//! ambient cohomology block dimensions are reported alongside.

pub mod bar;
pub mod chain;
pub mod coalg;
pub mod cyl;
pub mod dercx;
pub mod error;
pub mod etuple;
pub mod field;
pub mod linalg;
pub mod operad;
pub mod perm;
pub mod sigma;
pub mod solver;
#[cfg(test)]
pub mod testutil;
pub mod tree;

pub use error::Error;
pub use field::{Field, Scalar};
