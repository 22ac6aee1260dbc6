use std::collections::BTreeMap;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::synth::GlyphSet;

use super::write_bytes;

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Binary graymap (P5, maxval 255) bytes.
pub fn pgm_bytes(img: &GrayImage) -> Vec<u8> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
        .expect("in-memory encoding of a valid gray image");
    buf
}

pub fn save_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    write_bytes(path, &pgm_bytes(img))
}

/// Reads any PNM file as 8-bit grayscale.
pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let img = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| image_err(path, e))?
        .decode()
        .map_err(|e| image_err(path, e))?;
    Ok(img.to_luma8())
}

/// Directory name used for a symbol's glyphs: the symbol itself when it is
/// ASCII alphanumeric, `U+XXXX` otherwise.
pub fn symbol_dir_name(symbol: char) -> String {
    if symbol.is_ascii_alphanumeric() {
        symbol.to_string()
    } else {
        format!("U+{:04X}", symbol as u32)
    }
}

fn parse_symbol_dir(name: &str) -> Option<char> {
    if let Some(hex) = name.strip_prefix("U+") {
        return u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
    }
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

/// Loads `dir/<symbol>/*.pgm`, one subdirectory per symbol (named by the
/// symbol or `U+XXXX`), variants in file-name order.
pub fn load_glyph_dir(dir: &Path) -> Result<GlyphSet> {
    let mut glyphs = BTreeMap::new();
    for sub in sorted_entries(dir)? {
        if !sub.is_dir() {
            continue;
        }
        let name = sub.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let symbol = parse_symbol_dir(name).ok_or_else(|| {
            Error::contract(format!(
                "{}: glyph directory name must be one symbol or U+XXXX",
                sub.display()
            ))
        })?;
        let mut variants = Vec::new();
        for file in sorted_entries(&sub)? {
            let is_pgm = file
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
            if is_pgm {
                variants.push(load_pgm(&file)?);
            }
        }
        if !variants.is_empty() {
            glyphs.insert(symbol, variants);
        }
    }
    if glyphs.is_empty() {
        return Err(Error::contract(format!("{}: no glyphs found", dir.display())));
    }
    GlyphSet::new(glyphs)
}
