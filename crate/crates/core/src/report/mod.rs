//! Record files, summary tables and scatter plots.

mod jsonl;
mod summary;
mod svg;

pub use jsonl::{read_jsonl, write_jsonl, RUN_SCHEMA, STUDY_SCHEMA};
pub use summary::{format_sig, read_summary_csv, summarize, write_summary_csv, SummaryRow};
pub use svg::{emit_scatter_svg, render_scatter_svg, study_scatter_points, AxesConfig, ScatterPoint};
