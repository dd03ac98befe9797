//! Minimization-based belief revision over finite partial preorders.

pub mod logic;
pub mod modeltheory;
pub mod mso;
pub mod order;
pub mod postulate;
pub mod revision;
pub mod selftest;
pub mod syntax;
