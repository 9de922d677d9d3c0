//! File formats: `RALN` binary and CSV representations, canonical JSON
//! reports and synthetic-spec configuration.

mod config;
mod csv;
pub mod raln;
mod report;

pub use self::config::{parse_synthetic_config, read_synthetic_config, SyntheticConfig};
pub use self::csv::{read_csv_matrix, read_csv_repr, write_csv_matrix, write_csv_repr};
pub use self::raln::{read_repr, write_repr};
pub use self::report::{canonical_value, to_canonical_json, write_report};

use std::path::Path;

use crate::error::Result;
use crate::types::RepresentationSet;

/// Reads `.csv` files as CSV without a header and anything else as `RALN`.
pub fn read_repr_auto(path: impl AsRef<Path>) -> Result<RepresentationSet> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv_repr(path, false),
        _ => read_repr(path),
    }
}
