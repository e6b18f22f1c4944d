//! 8-bit grayscale export (PGM and PNG) and reading back.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

/// `round(p·255)` after clamping to `[0, 1]`.
pub fn quantize(pixels: &[f64]) -> Vec<u8> {
    pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn export_image(pixels: &[f64], rows: usize, cols: usize, path: &Path, format: ImageFormat) -> Result<()> {
    if rows * cols != pixels.len() {
        return Err(softhebb_core::Error::DimensionMismatch {
            expected: rows * cols,
            found: pixels.len(),
        }
        .into());
    }
    let bytes = quantize(pixels);
    match format {
        ImageFormat::Pgm => {
            let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
            out.extend_from_slice(&bytes);
            fs::write(path, out).map_err(|e| Error::io(path, e))
        }
        ImageFormat::Png => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut enc = png::Encoder::new(BufWriter::new(file), cols as u32, rows as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let to_io = |e: png::EncodingError| Error::format(path, e.to_string());
            let mut w = enc.write_header().map_err(to_io)?;
            w.write_image_data(&bytes).map_err(to_io)?;
            w.finish().map_err(to_io)
        }
    }
}

/// Reads a file written by [`export_image`]: `(rows, cols, pixels in [0, 1])`.
pub fn read_image(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (rows, cols, data) = if bytes.starts_with(b"P5") {
        let text = String::from_utf8_lossy(&bytes[..bytes.len().min(64)]);
        let fields: Vec<&str> = text.split_ascii_whitespace().take(4).collect();
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, "bad PGM header"));
        if fields.len() < 4 || parse(fields[3])? != 255 {
            return Err(Error::format(path, "only 8-bit PGM is supported"));
        }
        let (cols, rows) = (parse(fields[1])?, parse(fields[2])?);
        let header = format!("P5\n{cols} {rows}\n255\n").len();
        (rows, cols, bytes[header..].to_vec())
    } else {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::format(path, "only 8-bit grayscale PNG is supported"));
        }
        buf.truncate(info.buffer_size());
        (info.height as usize, info.width as usize, buf)
    };
    if data.len() != rows * cols {
        return Err(Error::TruncatedFile {
            path: path.into(),
            needed: rows * cols,
            found: data.len(),
        });
    }
    Ok((rows, cols, data.iter().map(|&b| b as f64 / 255.0).collect()))
}

/// Lays out equally sized images on a grid, each rescaled to its own
/// min..max range. For weight rows, which are not pixel intensities.
pub fn tile(images: &[&[f64]], rows: usize, cols: usize, grid_cols: usize) -> (usize, usize, Vec<f64>) {
    let grid_cols = grid_cols.max(1);
    let grid_rows = images.len().div_ceil(grid_cols);
    let (h, w) = (grid_rows * (rows + 1), grid_cols * (cols + 1));
    let mut out = vec![0.0; h * w];
    for (i, img) in images.iter().enumerate() {
        let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (gy, gx) = (i / grid_cols * (rows + 1), i % grid_cols * (cols + 1));
        for r in 0..rows {
            for c in 0..cols {
                out[(gy + r) * w + gx + c] = (img[r * cols + c] - lo) / span;
            }
        }
    }
    (h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantization_fixture() {
        assert_eq!(quantize(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]), vec![0, 85, 170, 255]);
    }

    #[test]
    fn black_image_and_pgm_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.pgm");
        export_image(&[0.0; 6], 2, 3, &p, ImageFormat::Pgm).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert!(bytes[11..].iter().all(|&b| b == 0));
        assert!(export_image(&[0.0; 5], 2, 3, &p, ImageFormat::Pgm).is_err());
    }

    #[test]
    fn tiles_rescale_each_image() {
        let a = [0.0, 2.0];
        let b = [-1.0, -1.0];
        let (h, w, px) = tile(&[&a, &b], 1, 2, 2);
        assert_eq!((h, w), (2, 6));
        assert_eq!(&px[..6], &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_within_half_quantum(px in proptest::collection::vec(0.0f64..=1.0, 12), png in proptest::bool::ANY) {
            let dir = tempfile::tempdir().unwrap();
            let fmt = if png { ImageFormat::Png } else { ImageFormat::Pgm };
            let p = dir.path().join(format!("x.{}", fmt.extension()));
            export_image(&px, 3, 4, &p, fmt).unwrap();
            let (r, c, back) = read_image(&p).unwrap();
            prop_assert_eq!((r, c), (3, 4));
            for (a, b) in px.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
            }
        }
    }
}
