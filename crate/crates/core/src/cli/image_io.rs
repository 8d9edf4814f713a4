//! 8-bit grayscale image files (PNG or PGM, chosen by extension).

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, GrayImage, ImageReader};

use crate::error::{Error, Result};
use crate::image::Image;

const EXTENSIONS: &[&str] = &["png", "pgm", "pnm"];

/// Loads an 8-bit grayscale file, mapping byte `b` to `b / 255`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format { path: path.to_path_buf(), detail: other.to_string() },
    })?;
    if decoded.color() != ColorType::L8 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("expected 8-bit grayscale, found {:?}", decoded.color()),
        });
    }
    let gray = decoded.into_luma8();
    Image::from_bytes(gray.height() as usize, gray.width() as usize, gray.as_raw())
}

/// Saves as 8-bit grayscale with `round(x · 255)`, clamped.
pub fn save_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "parent directory does not exist")));
        }
    }
    let gray = GrayImage::from_raw(image.width() as u32, image.height() as u32, image.to_bytes()).expect("buffer size matches");
    gray.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format { path: path.to_path_buf(), detail: other.to_string() },
    })
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().and_then(|e| e.to_str()).is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// A single file, or every image in a directory.
pub fn expand_inputs(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    if path.is_dir() {
        list_images(path)
    } else if path.exists() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}
