//! Planar medial axes of closed sets and empirical certification of their
//! stability under small C^{1,1} ambient deformations.

// `!(x > 0.0)` is the NaN-rejecting form throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod diffeo;
pub mod geom;
pub mod harness;
pub mod image;
pub mod medial;
pub mod projection;
