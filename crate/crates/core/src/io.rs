//! File formats: the TKGN tensor container, NPY v1.0 export, and binary
//! PGM (P5) / PPM (P6) rasters.
//!
//! TKGN layout, all integers little-endian:
//!
//! | offset | size | field                                      |
//! |--------|------|--------------------------------------------|
//! | 0      | 4    | magic `TKGN`                               |
//! | 4      | 2    | version (u16) = 1                          |
//! | 6      | 12   | height, width, channels (u32 each)         |
//! | 18     | 8    | seed (u64), `u64::MAX` = absent            |
//! | 26     | 4    | metadata length (u32)                      |
//! | 30     | m    | metadata, UTF-8 JSON (empty = none)        |
//! | 30 + m | 4n   | f32 payload, row-major channel-last        |
//!
//! Writers go through a temporary file in the destination directory and an
//! atomic rename, so a failed write never leaves a partial file behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};
use crate::mask::Mask;
use crate::scalar::Scalar;
use crate::tensor::NoiseTensor;

pub const TKGN_MAGIC: [u8; 4] = *b"TKGN";
pub const TKGN_VERSION: u16 = 1;
pub const TKGN_HEADER_LEN: usize = 30;
pub const SEED_ABSENT: u64 = u64::MAX;

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

/// A tensor together with its free-form JSON metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub tensor: NoiseTensor<f32>,
    pub metadata: Value,
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::format(format!("{what} {v} does not fit in u32")))
}

pub fn encode_tkgn(tensor: &NoiseTensor<f32>, metadata: &Value) -> Result<Vec<u8>> {
    let seed = match tensor.seed() {
        Some(SEED_ABSENT) => {
            return Err(Error::invalid(format!(
                "seed {SEED_ABSENT:#x} is reserved for derived tensors"
            )));
        }
        Some(s) => s,
        None => SEED_ABSENT,
    };
    let meta = if metadata.is_null() {
        Vec::new()
    } else {
        serde_json::to_vec(metadata)?
    };
    let meta_len = u32::try_from(meta.len()).map_err(|_| Error::format("metadata too large"))?;
    let mut out = Vec::with_capacity(TKGN_HEADER_LEN + meta.len() + 4 * tensor.values().len());
    out.extend_from_slice(&TKGN_MAGIC);
    out.extend_from_slice(&TKGN_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32(tensor.height(), "height")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(tensor.width(), "width")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(tensor.channels(), "channels")?.to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&meta);
    for v in tensor.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Little-endian field reader over a byte slice.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(format!("truncated file while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }
}

fn payload_len(dims: &[u64]) -> Result<usize> {
    dims.iter()
        .try_fold(4u64, |acc, &d| acc.checked_mul(d))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::format(format!("dimensions {dims:?} overflow")))
}

fn decode_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn decode_tkgn(bytes: &[u8]) -> Result<TensorFile> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.array::<4>("magic")? != TKGN_MAGIC {
        return Err(Error::format("not a TKGN file (bad magic)"));
    }
    let version = cur.u16("version")?;
    if version != TKGN_VERSION {
        return Err(Error::format(format!("unsupported TKGN version {version}")));
    }
    let h = cur.u32("height")?;
    let w = cur.u32("width")?;
    let c = cur.u32("channels")?;
    let seed = cur.u64("seed")?;
    let meta_len = cur.u32("metadata length")? as usize;
    let meta = cur.take(meta_len, "metadata")?;
    let n_bytes = payload_len(&[u64::from(h), u64::from(w), u64::from(c)])?;
    let payload = cur.take(n_bytes, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let metadata = if meta.is_empty() {
        Value::Null
    } else {
        let text = std::str::from_utf8(meta).map_err(|_| Error::format("metadata is not UTF-8"))?;
        serde_json::from_str(text)
            .map_err(|e| Error::format(format!("metadata is not JSON: {e}")))?
    };
    let seed = (seed != SEED_ABSENT).then_some(seed);
    let tensor = NoiseTensor::from_values(
        h as usize,
        w as usize,
        c as usize,
        decode_f32s(payload),
        seed,
    )
    .map_err(|e| Error::format(format!("invalid payload: {e}")))?;
    Ok(TensorFile { tensor, metadata })
}

pub fn write_tkgn(path: &Path, tensor: &NoiseTensor<f32>, metadata: &Value) -> Result<()> {
    atomic_write(path, &encode_tkgn(tensor, metadata)?)
}

pub fn read_tkgn(path: &Path) -> Result<TensorFile> {
    decode_tkgn(&fs::read(path)?)
}

/// NPY v1.0, dtype `<f4`, C order, shape `(h, w, c)`.
pub fn encode_npy(tensor: &NoiseTensor<f32>) -> Result<Vec<u8>> {
    let (h, w, c) = tensor.shape();
    let mut header =
        format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({h}, {w}, {c}), }}");
    // magic(6) + version(2) + header_len(2) + header, padded to 64 bytes, newline-terminated.
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let header_len =
        u16::try_from(header.len()).map_err(|_| Error::format("npy header too long"))?;
    let mut out = Vec::with_capacity(10 + header.len() + 4 * tensor.values().len());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in tensor.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Reads back NPY files of the form written by [`encode_npy`].
pub fn decode_npy(bytes: &[u8]) -> Result<NoiseTensor<f32>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if &cur.array::<6>("magic")? != NPY_MAGIC {
        return Err(Error::format("not an NPY file (bad magic)"));
    }
    let version = cur.array::<2>("version")?;
    if version != [1, 0] {
        return Err(Error::format(format!(
            "unsupported NPY version {}.{}",
            version[0], version[1]
        )));
    }
    let header_len = cur.u16("header length")? as usize;
    let header = std::str::from_utf8(cur.take(header_len, "header")?)
        .map_err(|_| Error::format("NPY header is not ASCII"))?;
    if !header.contains("'descr': '<f4'") || !header.contains("'fortran_order': False") {
        return Err(Error::format(
            "only little-endian f32 C-order NPY arrays are supported",
        ));
    }
    let shape_src = header
        .split("'shape': (")
        .nth(1)
        .and_then(|s| s.split(')').next())
        .ok_or_else(|| Error::format("NPY header has no shape"))?;
    let dims: Vec<u64> = shape_src
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map_err(|_| Error::format(format!("bad NPY dimension `{s}`")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::format(format!(
            "expected a 3-d array, got shape {dims:?}"
        )));
    }
    let payload = cur.take(payload_len(&dims)?, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::format("trailing bytes after NPY payload"));
    }
    NoiseTensor::from_values(
        dims[0] as usize,
        dims[1] as usize,
        dims[2] as usize,
        decode_f32s(payload),
        None,
    )
    .map_err(|e| Error::format(format!("invalid payload: {e}")))
}

/// Gray level `round(255 * A)` per pixel.
pub fn mask_to_gray<T: Scalar>(mask: &Mask<T>) -> GrayImage {
    let pixels = mask
        .values()
        .iter()
        .map(|a| (255.0 * a.as_f64()).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage {
        width: mask.width(),
        height: mask.height(),
        pixels,
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.pixels {
        out.extend_from_slice(px);
    }
    out
}

/// Parses a binary netpbm header; returns (width, height, offset of raster).
fn netpbm_header(bytes: &[u8], magic: &[u8; 2]) -> Result<(usize, usize, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::format(format!(
            "expected {} netpbm magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::format("truncated netpbm header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::format("malformed netpbm header field"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format("malformed netpbm header"));
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(format!(
            "only 8-bit netpbm supported (maxval {maxval})"
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::format("netpbm image has a zero dimension"));
    }
    Ok((w, h, pos + 1))
}

fn raster(bytes: &[u8], offset: usize, w: usize, h: usize, depth: usize) -> Result<&[u8]> {
    let n = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(depth))
        .ok_or_else(|| Error::format("netpbm dimensions overflow"))?;
    let rest = &bytes[offset..];
    match rest.len().cmp(&n) {
        std::cmp::Ordering::Less => Err(Error::format("truncated netpbm raster")),
        std::cmp::Ordering::Greater => Err(Error::format("trailing bytes after netpbm raster")),
        std::cmp::Ordering::Equal => Ok(rest),
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (w, h, off) = netpbm_header(bytes, b"P5")?;
    let data = raster(bytes, off, w, h, 1)?;
    GrayImage::new(w, h, data.to_vec())
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let (w, h, off) = netpbm_header(bytes, b"P6")?;
    let data = raster(bytes, off, w, h, 3)?;
    RgbImage::new(
        w,
        h,
        data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    )
}
