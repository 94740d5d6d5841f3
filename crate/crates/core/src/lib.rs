//! Distance concentration for Wigner matrices: samplers, exact linear-algebra
//! identities, spectral statistics, least common denominators and the
//! Monte-Carlo experiments that tie them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensembles;
pub mod experiments;
pub mod identities;
pub mod lcd;
pub mod linalg;
pub mod numeric;
pub mod spectral;
