//! Streaming estimation of the l1 minimum spanning tree cost over turnstile
//! point streams.
//!
//! The crate is organised bottom-up: integer geometry and the randomly
//! shifted grids, exact component-based estimators, reusable linear
//! sketches, the α-pass and one-pass sketch pipelines, and a harness with
//! brute-force oracles and instance generators.

pub mod components;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hash;
pub mod lsh;
pub mod multipass;
pub mod onepass;
pub mod quadtree;
pub mod recsampler;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};
pub use geometry::{l1_distance, apply_stream, Point, PointMultiset, Sign, StreamUpdate};
pub use harness::report::EstimateReport;
pub use quadtree::{LevelStructure, Quadtree, QuadtreeConfig};
