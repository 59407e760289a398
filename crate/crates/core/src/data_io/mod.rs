//! Dataset ingestion, synthetic generators, and export of embeddings,
//! pressure reports, optimizer traces and plots.
//!
//! File formats:
//!
//! * datasets and embeddings: delimited text, one point per row, numbers
//!   written with 17 significant digits; datasets may carry a trailing
//!   integer label column.
//! * pressure reports: JSON lines, one object per point
//!   `{"index", "pressure", "pressured", "method", "warning"?}`.
//! * traces: JSON lines, one [`TraceRecord`](crate::TraceRecord) per iteration.
//! * plots: SVG.

mod delimited;
mod generate;
mod records;
mod svg;

pub use delimited::{load_delimited, load_embedding, save_dataset, save_embedding};
pub use generate::{
    generate_clusters, generate_rings, generate_swissroll, swissroll_point, RingsConfig,
};
pub use records::{load_report, load_trace, save_report, save_trace};
pub use svg::{render_convergence, render_scatter};
