//! Flat phase spaces, convex polytopes, regions and partitions.

mod exact;
mod linear;
mod polytope;
mod region;
mod simplex;
mod space;

pub use exact::{affine_onto_exact, barycenter, qvalue, QAffine, QPoint, Q};
pub use linear::{cross, point1, AffineMap, Linear, Point};
pub use polytope::{sample_triangle, segment_distance, Polygon, Polytope};
pub use region::{
    closure_inner_diameter, geodesic_distance, inner_diameter, Location, Partition, Region, BOUNDARY_TOL,
};
pub use simplex::{affine_onto, barycentric_subdivision, permutations, Simplex};
pub use space::{validate_triangulation, PhaseSpace, SpaceSpec};
