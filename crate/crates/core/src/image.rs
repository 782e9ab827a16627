//! 8-bit rasters and their binary PNM (P5/P6) encodings.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major interleaved RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, u: usize, v: usize) -> [u8; 3] {
        let i = 3 * (v * self.width + u);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, u: usize, v: usize, rgb: [u8; 3]) {
        let i = 3 * (v * self.width + u);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    /// Uncompressed 24-bit BMP, used to embed rasters in SVG overlays.
    pub fn to_bmp(&self) -> Vec<u8> {
        let row = (3 * self.width).div_ceil(4) * 4;
        let size = 54 + row * self.height;
        let mut out = Vec::with_capacity(size);
        out.extend_from_slice(b"BM");
        out.extend_from_slice(&(size as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&54u32.to_le_bytes());
        out.extend_from_slice(&40u32.to_le_bytes());
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&24u16.to_le_bytes());
        out.extend_from_slice(&[0u8; 24]);
        for v in (0..self.height).rev() {
            let start = out.len();
            for u in 0..self.width {
                let [r, g, b] = self.pixel(u, v);
                out.extend_from_slice(&[b, g, r]);
            }
            out.resize(start + row, 0);
        }
        out
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().flat_map(|g| [*g, *g, *g]).collect(),
        }
    }
}

/// Decoded PNM raster, before any channel conversion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pnm {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Pnm {
    pub fn into_rgb(self) -> RgbImage {
        match self {
            Pnm::Gray(g) => g.to_rgb(),
            Pnm::Rgb(c) => c,
        }
    }
}

/// Decodes binary P5 or P6 with `maxval <= 255`.
pub fn decode_pnm(bytes: &[u8]) -> Result<Pnm> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptHeader("header ends early".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::CorruptHeader("non-ASCII header".into()))?);
    }
    let channels = match fields[0] {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::UnsupportedFormat(format!("magic {other:?}; expected P5 or P6"))),
    };
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::CorruptHeader(format!("{what} {s:?} is not a number")))
    };
    let width = parse(fields[1], "width")?;
    let height = parse(fields[2], "height")?;
    let maxval = parse(fields[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval}; only 8-bit rasters are supported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::CorruptHeader(format!("empty {width}x{height} raster")));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::CorruptHeader("missing payload separator".into()));
    }
    pos += 1;
    let expected = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::CorruptHeader(format!(
            "payload holds {} bytes, header promises {expected}",
            payload.len()
        )));
    }
    let data = payload[..expected].to_vec();
    Ok(if channels == 1 {
        Pnm::Gray(GrayImage { width, height, data })
    } else {
        Pnm::Rgb(RgbImage { width, height, data })
    })
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

/// Loads a P6 or P5 image; grayscale is replicated into all three channels.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    read_pnm(path).map(Pnm::into_rgb)
}
