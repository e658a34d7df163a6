//! Constructive positive paths: block primitives and route planning.
//!
//! Planning is limited to 2n ≤ 4; the block primitives work on 2×2 (or 4×4
//! boundary) blocks and are dimension-agnostic once placed by a conjugator.

pub(crate) mod blocks;
mod builder;
mod plan;

pub use blocks::{exit_enter_via_n, real_slide, bifurcation_generator, rotate_block, CrossingDirection};
pub use builder::{Leg, LegKind, Route};
pub use plan::{
    audit_crossings, connect, connect_with_route, extend_to_u, extend_to_u_with_route, short_path_to,
    short_path_to_with_route,
};
