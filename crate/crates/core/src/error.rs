use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is not regular: min |gamma'| = {min_speed:e}")]
    NonRegularCurve { min_speed: f64 },

    #[error("curve is not simple: samples {first} and {second} intersect")]
    SelfIntersecting { first: usize, second: usize },

    #[error("ambiguous foot point: distance {distance} attained at arclengths {feet:?}")]
    AmbiguousFoot { distance: f64, feet: Vec<f64> },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("degenerate chart: metric factor J = {jacobian} at T = {t}, Y = {y}")]
    DegenerateChart { t: f64, y: f64, jacobian: f64 },

    #[error("collar too deep: delta = {delta}, reach = {reach}")]
    CollarTooDeep { delta: f64, reach: f64 },

    #[error("grid too coarse: nT = {n_t}, nY = {n_y} (need nT >= 4, nY >= 8)")]
    GridTooCoarse { n_t: usize, n_y: usize },

    #[error("degenerate exponent fit: all seminorms below {floor:e}")]
    DegenerateFit { floor: f64 },

    #[error("exponential overflow: 2u = {two_u} at node {node}")]
    Overflow { node: usize, two_u: f64 },

    #[error("Newton diverged at boundary level {level} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        level: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("maximal solution not converged after {levels} levels (last change {last_change:e})")]
    NotConverged { levels: usize, last_change: f64 },

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("vanishing denominator: 2 + T w = {value:e} at node (iT = {i_t}, iY = {i_y})")]
    VanishingDenominator { i_t: usize, i_y: usize, value: f64 },

    #[error("fixed-point iteration diverged after {iterations} iterations (update {update:e})")]
    FixedPointDiverged { iterations: usize, update: f64 },

    #[error("perturbation iteration diverged after {iterations} iterations (update {update:e})")]
    PerturbationDiverged { iterations: usize, update: f64 },

    #[error("non-positive barrier argument {value:e} at node (iT = {i_t}, iY = {i_y})")]
    NonPositiveArgument { i_t: usize, i_y: usize, value: f64 },

    #[error("no admissible A up to {a_max} ({kind}); worst node (iT = {i_t}, iY = {i_y}) defect {defect:e}")]
    NoAdmissibleA {
        kind: &'static str,
        a_max: f64,
        i_t: usize,
        i_y: usize,
        defect: f64,
    },

    #[error("insufficient dyadic layers: J = {layers} (need >= 3)")]
    InsufficientLayers { layers: usize },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors that come from domain geometry or an invalid run
    /// configuration (as opposed to numerical failures).
    pub fn is_geometry_or_config(&self) -> bool {
        matches!(
            self,
            Error::NonRegularCurve { .. }
                | Error::SelfIntersecting { .. }
                | Error::CollarTooDeep { .. }
                | Error::DegenerateChart { .. }
                | Error::GridTooCoarse { .. }
                | Error::Config { .. }
        )
    }
}
