//! Flat translation surfaces and the Poisson translation plane.
//!
//! The geometric primitives in [`geom`] are generic over the scalar type; the
//! surface models and the explorer work in `f64`, re-exported here as the
//! default aliases.

pub mod flat_complex;
pub mod explorer;
pub mod geom;
pub mod poisson_plane;
pub mod rng;
pub mod square_tiled;
pub mod stats;

pub use geom::Scalar;

pub type Vec2 = geom::Vec2<f64>;
pub type Ray = geom::Ray<f64>;
pub type Segment = geom::Segment<f64>;
pub type AngularInterval = geom::AngularInterval<f64>;
