//! Map families charted on partition regions, their global extensions and
//! the triangulation-based builders.

mod builders;
mod family;
mod presets;

pub use builders::{best_correspondence, build_expanding_family, build_mostly_expanding_family, subdivision_pieces};
pub use family::{
    extend_map, Branch, Extension, FamilySpec, Hoelder, MapFamily, MapSpec, SmoothMap, DEFAULT_DITHER,
};
pub use presets::{
    doubling, doubling_inverse, doubling_torus2, identity_det_one, identity_family, perturbed_doubling,
    rational_rotations, triangle_expanding, triangle_mostly_expanding, two_arc_control,
};
