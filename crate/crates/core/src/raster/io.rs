use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Raster, RasterError};

/// Writes an 8-bit RGBA PNG. Encoder settings are fixed so identical rasters
/// produce identical files.
pub fn write_png(path: impl AsRef<Path>, img: &Raster) -> Result<(), RasterError> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, img.width(), img.height());
    enc.set_color(png::ColorType::Rgba);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Balanced);
    let mut w = enc.write_header().map_err(|e| RasterError::Png(e.to_string()))?;
    w.write_image_data(&img.to_bytes()).map_err(|e| RasterError::Png(e.to_string()))?;
    w.finish().map_err(|e| RasterError::Png(e.to_string()))?;
    Ok(())
}

/// Reads a PNG, expanding grayscale/RGB/palette images to 8-bit RGBA.
pub fn read_png(path: impl AsRef<Path>) -> Result<Raster, RasterError> {
    let mut dec = png::Decoder::new(BufReader::new(File::open(path)?));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| RasterError::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| RasterError::Png("image too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| RasterError::Png(e.to_string()))?;
    let bytes = &buf[..info.buffer_size()];
    let (w, h) = (info.width, info.height);
    let n = w as usize * h as usize;
    let pixels = match info.color_type {
        png::ColorType::Rgba => bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
        png::ColorType::Rgb => bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2], 255]).collect(),
        png::ColorType::GrayscaleAlpha => bytes.chunks_exact(2).map(|c| [c[0], c[0], c[0], c[1]]).collect(),
        png::ColorType::Grayscale => bytes.iter().map(|&g| [g, g, g, 255]).collect(),
        png::ColorType::Indexed => return Err(RasterError::Png("palette was not expanded".into())),
    };
    let pixels: Vec<_> = pixels;
    debug_assert_eq!(pixels.len(), n);
    Raster::from_pixels(w, h, pixels)
}

/// Debug dump: little-endian `u32` width, `u32` height, then raw RGBA bytes.
pub fn write_raw(path: impl AsRef<Path>, img: &Raster) -> Result<(), RasterError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&img.width().to_le_bytes())?;
    f.write_all(&img.height().to_le_bytes())?;
    f.write_all(&img.to_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Raster, RasterError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 {
        return Err(RasterError::Invalid("raw dump shorter than its header".into()));
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    Raster::from_bytes(w, h, &bytes[8..])
}
