//! Binary PGM (P5) / PPM (P6) codec and the 8-bit grayscale PNG decoder.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::{BinaryMask, GrayImage, RgbImage};
use crate::error::{Error, Result};

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Upper bound on decoded payload size, so hostile headers cannot force huge allocations.
const MAX_DECODED_BYTES: usize = 1 << 30;

/// A decoded netpbm raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u32::from(b - b'0')))
                .ok_or_else(|| Error::MalformedHeader(format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return match self.bytes.get(self.pos) {
                None => Err(Error::UnexpectedEof),
                Some(_) => Err(Error::MalformedHeader(format!("expected {what}"))),
            };
        }
        Ok(value)
    }
}

/// Decodes a binary P5 or P6 file held in memory.
///
/// Comments are accepted anywhere whitespace is allowed in the header. Exactly
/// one whitespace byte separates the maxval from the payload; trailing bytes
/// beyond the payload are ignored.
pub fn decode_pnm(bytes: &[u8]) -> Result<PnmImage> {
    if bytes.len() < 2 {
        return Err(Error::UnexpectedEof);
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        [b'P', d] if (b'1'..=b'7').contains(d) => {
            return Err(Error::UnsupportedFormat(format!(
                "netpbm variant P{} (only binary P5/P6 are supported)",
                *d as char
            )))
        }
        _ => return Err(Error::MalformedHeader("missing P5/P6 magic".into())),
    };
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.number("width")? as usize;
    let height = reader.number("height")? as usize;
    let maxval = reader.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    match bytes.get(reader.pos) {
        None => return Err(Error::UnexpectedEof),
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        Some(_) => {
            return Err(Error::MalformedHeader(
                "maxval must be followed by a single whitespace byte".into(),
            ))
        }
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|&n| n <= MAX_DECODED_BYTES)
        .ok_or_else(|| Error::MalformedHeader(format!("{width}x{height} is too large")))?;
    let payload = &bytes[reader.pos..];
    if payload.len() < needed {
        return Err(Error::UnexpectedEof);
    }
    let data = payload[..needed].to_vec();
    Ok(if channels == 1 {
        PnmImage::Gray(GrayImage::new(width, height, data)?)
    } else {
        PnmImage::Rgb(RgbImage::new(width, height, data)?)
    })
}

/// Decodes an 8-bit grayscale PNG. Any other color type or bit depth is rejected.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let limits = png::Limits {
        bytes: MAX_DECODED_BYTES,
    };
    let mut decoder = png::Decoder::new_with_limits(Cursor::new(bytes), limits);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Eight {
        return Err(Error::NotGrayscale(format!("{color:?} at {depth:?} bits")));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;
    let mut data = Vec::with_capacity(width * height);
    for row in buf[..frame.buffer_size()].chunks(stride).take(height) {
        data.extend_from_slice(&row[..width]);
    }
    GrayImage::new(width, height, data)
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::UnexpectedEof
        }
        other => Error::Png(other.to_string()),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads a grayscale raster from a P5 or 8-bit grayscale PNG file, preserving
/// the stored intensities exactly.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = read_bytes(path.as_ref())?;
    if bytes.starts_with(PNG_SIGNATURE) {
        return decode_png(&bytes);
    }
    match decode_pnm(&bytes)? {
        PnmImage::Gray(g) => Ok(g),
        PnmImage::Rgb(_) => Err(Error::UnsupportedFormat(
            "P6 color image where grayscale was expected".into(),
        )),
    }
}

/// Loads a P5 file and checks that every pixel is 0 or 255.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let g = load_image(path)?;
    let (w, h) = g.dims();
    BinaryMask::new(w, h, g.into_raw())
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    match decode_pnm(&read_bytes(path.as_ref())?)? {
        PnmImage::Rgb(c) => Ok(c),
        PnmImage::Gray(_) => Err(Error::UnsupportedFormat(
            "P5 grayscale image where P6 color was expected".into(),
        )),
    }
}

/// Rasters that can be written as binary netpbm.
pub trait PnmEncode {
    fn encode_pnm(&self) -> Vec<u8>;
}

fn encode(magic: &str, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    let header = format!("{magic}\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + payload.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(payload);
    out
}

impl PnmEncode for GrayImage {
    fn encode_pnm(&self) -> Vec<u8> {
        encode("P5", self.width(), self.height(), self.data())
    }
}

impl PnmEncode for BinaryMask {
    fn encode_pnm(&self) -> Vec<u8> {
        encode("P5", self.width(), self.height(), self.data())
    }
}

impl PnmEncode for RgbImage {
    fn encode_pnm(&self) -> Vec<u8> {
        encode("P6", self.width(), self.height(), self.data())
    }
}

/// Writes gray images and masks as P5, color images as P6.
pub fn save_image<R: PnmEncode + ?Sized>(image: &R, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, image.encode_pnm()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn png_bytes(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, width, height);
            enc.set_color(color);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(data).unwrap();
        }
        out
    }

    #[test]
    fn decodes_minimal_p5() {
        let img = decode_pnm(b"P5\n2 1\n255\n\x07\xfa").unwrap();
        assert_eq!(img, PnmImage::Gray(GrayImage::new(2, 1, vec![7, 250]).unwrap()));
    }

    #[test]
    fn accepts_comments_in_header() {
        let img = decode_pnm(b"P5\n# made by hand\n2 # width\n1\n255\n\x07\xfa").unwrap();
        assert_eq!(img, PnmImage::Gray(GrayImage::new(2, 1, vec![7, 250]).unwrap()));
    }

    #[test]
    fn truncated_payload_is_eof() {
        let err = decode_pnm(b"P5\n2 2\n255\n\x07\xfa").unwrap_err();
        assert!(matches!(err, Error::UnexpectedEof));
        assert_eq!(err.to_string(), "unexpected end of data");
    }

    #[test]
    fn header_errors_are_distinct() {
        assert!(matches!(decode_pnm(b"P5\n2 1\n65535\n\0\0\0\0"), Err(Error::UnsupportedMaxval(65535))));
        assert!(matches!(decode_pnm(b"P2\n1 1\n255\n0"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode_pnm(b"GIF89a"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\n0 1\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\nx 1\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\n99999999999 1\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\n2 1"), Err(Error::UnexpectedEof)));
        assert!(matches!(decode_pnm(b"P5\n65536 65536\n255\n"), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn load_rejects_color_pnm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ppm");
        save_image(&RgbImage::new(1, 1, vec![1, 2, 3]).unwrap(), &path).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
        assert!(err.to_string().starts_with("unsupported format"));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_image("/nonexistent/nope.pgm"), Err(Error::Io { .. })));
    }

    #[test]
    fn encoders_write_exact_bytes() {
        let mask = BinaryMask::new(2, 2, vec![255; 4]).unwrap();
        assert_eq!(mask.encode_pnm(), b"P5\n2 2\n255\n\xff\xff\xff\xff".to_vec());
        let rgb = RgbImage::new(1, 1, vec![1, 2, 3]).unwrap();
        assert_eq!(rgb.encode_pnm(), b"P6\n1 1\n255\n\x01\x02\x03".to_vec());
    }

    #[test]
    fn save_then_load_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        let img = GrayImage::new(2, 1, vec![7, 250]).unwrap();
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn unwritable_path_errors() {
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        assert!(matches!(
            save_image(&img, "/nonexistent-dir/x.pgm"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn png_grayscale_decodes() {
        let bytes = png_bytes(3, 2, png::ColorType::Grayscale, &[0, 1, 2, 253, 254, 255]);
        let img = decode_png(&bytes).unwrap();
        assert_eq!(img.dims(), (3, 2));
        assert_eq!(img.data(), &[0, 1, 2, 253, 254, 255]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        fs::write(&path, &bytes).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn png_color_is_rejected() {
        let bytes = png_bytes(1, 1, png::ColorType::Rgb, &[1, 2, 3]);
        assert!(matches!(decode_png(&bytes), Err(Error::NotGrayscale(_))));
        let truncated = &bytes[..bytes.len() / 2];
        assert!(decode_png(truncated).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_all_raster_kinds(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let mut rng = crate::pso::Prng::new(seed);
            let gray = GrayImage::from_fn(w, h, |_, _| (rng.next_u64() >> 56) as u8).unwrap();
            let mask = crate::imaging::binarize(&gray, 128);
            let rgb = RgbImage::new(w, h, (0..3 * w * h).map(|_| (rng.next_u64() >> 56) as u8).collect()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_image(&gray, dir.path().join("g.pgm")).unwrap();
            save_image(&mask, dir.path().join("m.pgm")).unwrap();
            save_image(&rgb, dir.path().join("c.ppm")).unwrap();
            prop_assert_eq!(load_image(dir.path().join("g.pgm")).unwrap(), gray);
            prop_assert_eq!(load_mask(dir.path().join("m.pgm")).unwrap(), mask);
            prop_assert_eq!(load_rgb(dir.path().join("c.ppm")).unwrap(), rgb);
        }

        #[test]
        fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_pnm(&bytes);
            let _ = decode_png(&bytes);
        }
    }
}
