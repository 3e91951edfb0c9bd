//! Boundary curves, distance to the boundary and collar charts.

pub mod chart;
pub mod curve;
pub mod domain;

pub use chart::{
    build_collar_chart, build_profile_chart, laplacian_distance, ChartSource, CollarChart,
    CurvatureProfile, Grading,
};
pub use curve::{
    arclength_reparametrize, curvature, signed_distance, BoundaryCurve, FourierCurve, Frame, Point,
};
pub use domain::{DomainFile, GeometryInfo};
