//! Certified constructions and checkers for weighted badly approximable points.

pub mod exact;
pub mod poly;
pub mod certify;
pub mod lattice;
pub mod dangerous;
pub mod cantor;
pub mod algebraic;
