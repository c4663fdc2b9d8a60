//! Mode separation, arrival picking, lens extraction from boundary traces
//! and recovery of Cauchy data from Neumann data.

mod cauchy;
mod extract;
mod modes;
mod picking;

pub use cauchy::{neumann_to_cauchy, traction_from_cauchy, FlatSurface, SurfaceGeometry};
pub use extract::{exit_ell, extract_lens, ExtractConfig, ExtractedLens, ExtractionSummary};
pub use modes::{difference_matrix, project_modes, ModeFields, ModeProjector};
pub use picking::{
    detect_events, envelope, pick_first_arrival, pick_series, reference_pick, ArrivalPick, Event, PickConfig,
    PickMode,
};
