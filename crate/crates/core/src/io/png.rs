//! 16-bit depth PNGs (`depth_m = raw · scale / 1000`, raw 0 = missing) and
//! 8-bit mask PNGs (value ≥ 128 = set).

use std::io::Cursor;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::{Grid, ValidityMask};

/// Encoded depth PNG plus the number of valid pixels whose raw value had to
/// be clamped into `1..=65535`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDepth {
    pub bytes: Vec<u8>,
    pub clamped: usize,
}

fn decode(bytes: &[u8]) -> Result<DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::BadImage(e.to_string()))
}

fn check_scale(scale_mm_per_unit: f64) -> Result<()> {
    if !(scale_mm_per_unit > 0.0 && scale_mm_per_unit.is_finite()) {
        return Err(Error::NonPositiveScale(scale_mm_per_unit));
    }
    Ok(())
}

pub fn read_depth_png16(bytes: &[u8], scale_mm_per_unit: f64) -> Result<DepthMap> {
    check_scale(scale_mm_per_unit)?;
    let img = match decode(bytes)? {
        DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(Error::BadImage(format!(
                "expected 16-bit single-channel PNG, got {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img
        .into_raw()
        .into_iter()
        .map(|raw| (raw as f64 * scale_mm_per_unit / 1000.0) as f32)
        .collect();
    DepthMap::from_sentinel_grid(Grid::new(w, h, values)?)
}

/// Quantizes to `round_half_even(depth_m · 1000 / scale)`. Valid pixels that
/// would land on 0 or above 65535 are clamped and counted.
pub fn write_depth_png16(map: &DepthMap, scale_mm_per_unit: f64) -> Result<EncodedDepth> {
    check_scale(scale_mm_per_unit)?;
    let (w, h) = map.dims();
    let mut clamped = 0;
    let raw: Vec<u16> = (0..w * h)
        .map(|i| {
            if !map.mask().at(i) {
                return 0;
            }
            let q = (map.depth().at(i) as f64 * 1000.0 / scale_mm_per_unit).round_ties_even();
            if q < 1.0 || q > u16::MAX as f64 {
                clamped += 1;
            }
            q.clamp(1.0, u16::MAX as f64) as u16
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to image");
    Ok(EncodedDepth {
        bytes: encode(DynamicImage::ImageLuma16(img))?,
        clamped,
    })
}

pub fn read_mask_png(bytes: &[u8]) -> Result<ValidityMask> {
    let img = match decode(bytes)? {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(Error::BadImage(format!(
                "expected 8-bit single-channel PNG, got {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    ValidityMask::new(w, h, img.into_raw().into_iter().map(|v| v >= 128).collect())
}

pub fn write_mask_png(mask: &ValidityMask) -> Result<Vec<u8>> {
    let (w, h) = mask.dims();
    let raw = mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to image");
    encode(DynamicImage::ImageLuma8(img))
}

/// 8-bit grayscale rendering of `grid`, linearly mapping `[0, max]` to `[0, 255]`.
pub fn write_gray_png(grid: &Grid, max: f32) -> Result<Vec<u8>> {
    let (w, h) = grid.dims();
    let max = if max > 0.0 { max } else { 1.0 };
    let raw = grid
        .values()
        .iter()
        .map(|&v| ((v / max).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to image");
    encode(DynamicImage::ImageLuma8(img))
}

fn encode(img: DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::BadImage(e.to_string()))?;
    Ok(out.into_inner())
}
