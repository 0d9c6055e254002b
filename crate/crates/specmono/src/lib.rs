//! Spectral monodromy of weakly non-selfadjoint two-degree-of-freedom
//! semiclassical systems.
//!
//! The pipeline has two independent legs that meet at an integer matrix:
//!
//! * the *quantum* leg: a graded Weyl-symbol calculus ([`symbolcalc`]), a
//!   Birkhoff normal form over a Diophantine torus ([`birkhoff`]), synthesis
//!   of the asymptotic eigenvalue lattice in good rectangles ([`quantize`]),
//!   and recovery of the lattice structure plus its GL(2,Z) Čech cocycle and
//!   loop holonomy from bare point clouds ([`latticemono`]);
//! * the *classical* leg: period lattices of Liouville tori for an explicit
//!   focus-focus system and their continuation around loops ([`classical`]).
//!
//! The two legs are compared through
//! [`classical::compare_monodromies`], which checks the spectral holonomy
//! class against the transpose-inverse of the classical monodromy class.
//!
//! All file formats consumed or produced by the CLI live in [`io`].

pub mod birkhoff;
pub mod classical;
pub mod io;
pub mod latticemono;
pub mod quantize;
pub mod symbolcalc;
