//! RGBA rasters, binary masks, source-over compositing and the pixel
//! metrics shared by the reward and the evaluation harness.
//!
//! Rasters hold 8-bit straight (non-premultiplied) alpha. All arithmetic is
//! done in `f64` on channels normalized to `[0, 1]`.

mod io;

pub use io::{read_png, read_raw, write_png, write_raw};

/// Added to denominators wherever a zero-size mask would otherwise divide by zero.
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("png error: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Rgba = [u8; 4];

pub const TRANSPARENT: Rgba = [0, 0, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<Rgba>,
}

impl Raster {
    /// A fully transparent raster.
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, TRANSPARENT)
    }

    pub fn filled(width: u32, height: u32, px: Rgba) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be positive");
        Self { width, height, pixels: vec![px; width as usize * height as usize] }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgba>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Invalid(format!("zero-sized raster {width}x{height}")));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(RasterError::Invalid(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_bytes(width: u32, height: u32, bytes: &[u8]) -> Result<Self, RasterError> {
        if bytes.len() % 4 != 0 {
            return Err(RasterError::Invalid("byte length is not a multiple of 4".into()));
        }
        let pixels = bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        Self::from_pixels(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgba] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgba] {
        &mut self.pixels
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn get(&self, x: u32, y: u32) -> Rgba {
        self.pixels[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, px: Rgba) {
        let i = self.index(x, y);
        self.pixels[i] = px;
    }

    fn index(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
        y as usize * self.width as usize + x as usize
    }

    pub fn is_transparent(&self) -> bool {
        self.pixels.iter().all(|p| p[3] == 0)
    }

    fn check_same(&self, other_w: u32, other_h: u32) -> Result<(), RasterError> {
        if (self.width, self.height) != (other_w, other_h) {
            return Err(RasterError::DimensionMismatch(self.width, self.height, other_w, other_h));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width as usize * height as usize {
            return Err(RasterError::Invalid(format!("{} bits for a {width}x{height} mask", bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    /// Sets the pixels of an axis-aligned rectangle, clipped to the mask.
    pub fn fill_rect(&mut self, x0: u32, y0: u32, w: u32, h: u32) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                self.set(x, y, true);
            }
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight bounding box `(x0, y0, x1, y1)`, exclusive on the max side.
    pub fn bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bb: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x + 1, y + 1),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x + 1), d.max(y + 1)),
                    });
                }
            }
        }
        bb
    }

    fn check_same(&self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.dims() != other.dims() {
            return Err(RasterError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }
}

#[inline]
fn unit(c: u8) -> f64 {
    f64::from(c) / 255.0
}

/// Round-half-up quantization of a `[0, 1]` value to 8 bits.
#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Source-over for a single pixel.
///
/// A fully transparent top returns the bottom verbatim, and a fully opaque
/// top (or a transparent bottom) returns the top verbatim; everything else
/// goes through the float formula and is quantized once.
#[inline]
pub fn over_pixel(top: Rgba, bottom: Rgba) -> Rgba {
    if top[3] == 0 {
        return bottom;
    }
    if top[3] == 255 || bottom[3] == 0 {
        return top;
    }
    let ta = unit(top[3]);
    let ba = unit(bottom[3]);
    let oa = ta + ba * (1.0 - ta);
    let mut out = [0u8; 4];
    for c in 0..3 {
        out[c] = quantize((unit(top[c]) * ta + unit(bottom[c]) * ba * (1.0 - ta)) / oa);
    }
    out[3] = quantize(oa);
    out
}

/// Composites `top` over `bottom` (source-over, straight alpha).
pub fn alpha_over(top: &Raster, bottom: &Raster) -> Result<Raster, RasterError> {
    top.check_same(bottom.width, bottom.height)?;
    let pixels = top.pixels.iter().zip(&bottom.pixels).map(|(&t, &b)| over_pixel(t, b)).collect();
    Ok(Raster { width: top.width, height: top.height, pixels })
}

/// Bit set iff alpha is strictly greater than `threshold`.
pub fn mask_from_alpha(img: &Raster, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|p| p[3] > threshold).collect(),
    }
}

#[inline]
fn premultiplied(px: Rgba) -> [f64; 3] {
    let a = unit(px[3]);
    [unit(px[0]) * a, unit(px[1]) * a, unit(px[2]) * a]
}

/// Masked per-channel L1 between the masked input and a rendered layer.
///
/// The numerator runs over every pixel: inside the mask it compares the input
/// RGB with the layer's premultiplied RGB, outside it measures the layer's
/// premultiplied RGB against zero. The denominator is `3·|mask| + ε`.
pub fn masked_l1(img: &Raster, layer: &Raster, mask: &BinaryMask) -> Result<f64, RasterError> {
    img.check_same(layer.width, layer.height)?;
    img.check_same(mask.width, mask.height)?;
    let mut num = 0.0;
    for ((&i, &l), &m) in img.pixels.iter().zip(&layer.pixels).zip(&mask.bits) {
        let lp = premultiplied(l);
        for c in 0..3 {
            let masked = if m { unit(i[c]) } else { 0.0 };
            num += (masked - lp[c]).abs();
        }
    }
    Ok(num / (3.0 * mask.count() as f64 + EPSILON))
}

/// Intersection over union; two empty masks score 1.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, RasterError> {
    a.check_same(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean absolute difference of premultiplied RGB over all pixels and channels.
pub fn rgb_l1(a: &Raster, b: &Raster) -> Result<f64, RasterError> {
    a.check_same(b.width, b.height)?;
    let mut sum = 0.0;
    for (&p, &q) in a.pixels.iter().zip(&b.pixels) {
        let (p, q) = (premultiplied(p), premultiplied(q));
        sum += (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs();
    }
    Ok(sum / (3.0 * a.pixels.len() as f64))
}
