//! Reading and writing every file the toolkit exchanges.

mod corpus;
mod grid;
mod json;
mod raster;

use std::fs;
use std::path::Path;

pub use corpus::{branch_corpus, detection_set, load_text_lines, pair_branches, save_synth_corpus};
pub use grid::{grid_csv_string, heatmap_svg_string, save_grid_csv, save_heatmap_svg};
pub use json::*;
pub use raster::{load_glyph_dir, load_pgm, pgm_bytes, save_pgm, symbol_dir_name};

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}
