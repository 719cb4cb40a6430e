//! Quality refinement and dataset preparation for continuous glucose
//! monitoring (CGM) and heart-rate series.
//!
//! The pipeline aligns raw readings to a 5-minute grid, masks zeros and
//! outliers, fills short gaps linearly and medium gaps with Stineman
//! interpolation, labels each sample by time to the next hypoglycemic
//! reading, and cuts balanced, chronologically split windows for a
//! downstream classifier.

pub mod analysis;
pub mod config;
pub mod impute;
pub mod ingest;
pub mod label;
pub mod pipeline;
pub mod quality;
pub mod series;
pub mod synthetic;
pub mod window_file;
pub mod windows;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, Artifacts, PipelineError, Stage, Target};
pub use series::{Channel, SubjectSeries};
