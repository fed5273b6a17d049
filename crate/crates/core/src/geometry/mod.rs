//! Sub-Riemannian structures given by frames, their Riemannian extensions and
//! the pointwise tensors built from them.

mod fields;
mod metric;
mod structure;

pub use fields::{interior_d, lie_derivative_covector, Jet, OneFormField, ScalarJet, VectorField};
pub use metric::{christoffel_from, Christoffel, MetricField, PointGeometry, Projections, MEMBERSHIP_TOL};
pub use structure::{
    halton_points, CurveSample, Filtration, FrameJet, StructureBuilder, SubRiemannianStructure, DEFAULT_PROBE_COUNT,
};
