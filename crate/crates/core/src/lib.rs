//! Desk-scale computational laboratory for the bilinear Hilbert transform,
//! paraproducts, and their tensor hybrid.
//!
//! The crate models functions as band-limited samples on periodic tori and
//! provides five layers that build on each other:
//!
//! * [`grid`] — exact-rational shifted dyadic meshes, tiles, tri-tiles,
//!   product tri-tiles, order relations, sparsity and rank checks;
//! * [`wavepacket`] — Littlewood-Paley families, frequency projections,
//!   wave packets adapted to tiles, lattice maximal functions;
//! * [`operators`] — discrete bilinear multiplier evaluation (1D and 2D
//!   tensor forms), single-scale pieces, kernel truncation families, and
//!   tile model sums with their trilinear form;
//! * [`timefreq`] — tree sizes, greedy size decompositions, single-tree
//!   estimates, scale-sum bounds, exceptional sets;
//! * [`regions`] — exact rational exponent calculus on the Holder simplex:
//!   admissibility, named theorem ranges, convex hulls, interpolation;
//! * [`normprobe`] — mixed-norm evaluation and empirical operator-norm
//!   probes with stable/growing classification.

pub mod error;
pub mod grid;
pub mod normprobe;
pub mod operators;
pub mod regions;
pub mod sampled;
pub mod timefreq;
pub mod wavepacket;

pub use error::CoreError;
pub use grid::{
    DyadicInterval, ProductTriTile, RankTag, ShiftPreset, Tile, TileCollection, TileOrder, TriTile,
};
pub use normprobe::{
    GrowthClass, MixedNormSpec, NormExponent, ProbeGrid, ProbeOperator, ProbeResult,
    ScalarProbeSpec, TestFamily, VectorProbeSpec,
};
pub use operators::{BilinearSymbol, KernelFamily, ModelSum};
pub use regions::{
    Classification, ExponentTriple, MixedTuple, PointLocation, Region, RegionId, RegionPolygon,
};
pub use sampled::SampledFunction;
pub use timefreq::{Decomposition, SizeReport, Tree};
pub use wavepacket::{LpFamily, WavePacket};
