//! File formats, synthetic data and image output.

mod artifact;
mod exacells;
mod image;
mod structured;
mod synthetic;

pub use artifact::{load_artifact, save_artifact};
pub use exacells::{load_cells, parse_cells, save_cells, write_cells, FormatError, MAX_LEVEL};
pub use image::{decode_png, encode_png, write_png, write_raw};
pub use structured::import_structured;
pub use synthetic::{generate_synthetic, AnalyticField, FieldKind, SyntheticSpec};
