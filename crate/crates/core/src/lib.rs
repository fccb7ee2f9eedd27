//! Mapper construction, mapper composition and topological gains.
//!
//! The crate builds univariate mappers `M(f, U)` and bivariate mappers
//! `M((f, g), U × V)` over point clouds, stitches two univariate mappers into
//! a bivariate one ([`composition::compose`]), checks the stitched result
//! against direct construction, and measures what the second filter adds
//! within each interval of the first (Betti numbers, Euler characteristics
//! and graph entropies, see [`gains`]).

pub mod composition;
pub mod cover;
pub mod dataset;
pub mod gains;
pub mod interface;
pub mod mapper;

pub use composition::{compose, verify_equivalence, CompositionTrace, Equivalence};
pub use cover::{Cover, Interval, ProductCover};
pub use dataset::{generate_shape, FilterFunction, FilterKind, PointCloud, Shape};
pub use gains::{gain_report, GainReport, Measure, RestrictionMode};
pub use interface::{compute_matrix, MatrixResult, MatrixSpec};
pub use mapper::{
    build_bivariate_mapper, build_mapper, CoverElement, MapperComplex, NeighborhoodGraph, Origin, Simplex,
};
