use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point was queried outside the region where a model is defined.
    #[error("point {point:?} lies outside the model domain ({what})")]
    Domain { point: Vec<f64>, what: String },

    /// A model violates a physical constraint (non-positive speed or modulus).
    #[error("invalid model: {0}")]
    Model(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An iterative or spectral routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ill-posed input: {0}")]
    IllPosed(String),

    #[error("unsupported geometry: {0}")]
    Unsupported(String),

    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    #[error("foliation is degenerate at {point:?}: |grad kappa| = {grad_norm:e}")]
    DegenerateFoliation { point: Vec<f64>, grad_norm: f64 },

    /// A convexity check required by an operation did not pass.
    #[error("{} check failed: verdict {:?}, margin {:e}", .0.test, .0.verdict, .0.margin)]
    NotConvex(Box<crate::convexity::ConvexityReport>),

    /// Travel times imply a speed that does not increase with depth.
    #[error("speed does not increase with depth below z = {top}{}: {detail}", .bottom.map(|b| format!(" (down to about z = {b})")).unwrap_or_default())]
    LowVelocityZone { top: f64, bottom: Option<f64>, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain<const D: usize>(x: &[f64; D], what: impl Into<String>) -> Self {
        Error::Domain {
            point: x.to_vec(),
            what: what.into(),
        }
    }
}
