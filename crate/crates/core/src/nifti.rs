//! Minimal NIfTI-1 single-file reader and writer.
//!
//! Only scalar 3D images are supported. Orientation is checked, never
//! applied: the voxel grid is returned as stored, and any affine that is not
//! diagonal up to sign is rejected.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Volume3, VolumeKind};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

/// NIfTI-1 datatype codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(i16)]
pub enum Datatype {
    Uint8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
    Int8 = 256,
    Uint16 = 512,
    Uint32 = 768,
    Int64 = 1024,
    Uint64 = 1280,
}

impl Datatype {
    pub fn from_code(code: i16) -> Option<Datatype> {
        use Datatype::*;
        Some(match code {
            2 => Uint8,
            4 => Int16,
            8 => Int32,
            16 => Float32,
            64 => Float64,
            256 => Int8,
            512 => Uint16,
            768 => Uint32,
            1024 => Int64,
            1280 => Uint64,
            _ => return None,
        })
    }

    pub fn code(self) -> i16 {
        self as i16
    }

    pub fn size(self) -> usize {
        use Datatype::*;
        match self {
            Uint8 | Int8 => 1,
            Int16 | Uint16 => 2,
            Int32 | Uint32 | Float32 => 4,
            Float64 | Int64 | Uint64 => 8,
        }
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct HeaderReader<'a> {
    buf: &'a [u8],
    endian: Endian,
}

impl HeaderReader<'_> {
    fn bytes<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[off..off + N]);
        if let Endian::Big = self.endian {
            b.reverse();
        }
        b
    }

    fn i16(&self, off: usize) -> i16 {
        i16::from_le_bytes(self.bytes(off))
    }

    fn f32(&self, off: usize) -> f32 {
        f32::from_le_bytes(self.bytes(off))
    }

    fn value(&self, dt: Datatype, off: usize) -> f64 {
        use Datatype::*;
        match dt {
            Uint8 => self.buf[off] as f64,
            Int8 => self.buf[off] as i8 as f64,
            Int16 => i16::from_le_bytes(self.bytes(off)) as f64,
            Uint16 => u16::from_le_bytes(self.bytes(off)) as f64,
            Int32 => i32::from_le_bytes(self.bytes(off)) as f64,
            Uint32 => u32::from_le_bytes(self.bytes(off)) as f64,
            Float32 => f32::from_le_bytes(self.bytes(off)) as f64,
            Float64 => f64::from_le_bytes(self.bytes(off)),
            Int64 => i64::from_le_bytes(self.bytes(off)) as f64,
            Uint64 => u64::from_le_bytes(self.bytes(off)) as f64,
        }
    }
}

/// Reads a `.nii` or `.nii.gz` file (gzip is detected from the content).
pub fn load_nifti(path: impl AsRef<Path>, kind: VolumeKind) -> Result<Volume3> {
    let path = path.as_ref();
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    decode(&bytes, kind)
}

fn decode(buf: &[u8], kind: VolumeKind) -> Result<Volume3> {
    if buf.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "file has {} bytes, header needs {HEADER_SIZE}",
            buf.len()
        )));
    }
    let sizeof_hdr = [0, 1, 2, 3].map(|i| buf[i]);
    let endian = if i32::from_le_bytes(sizeof_hdr) == HEADER_SIZE as i32 {
        Endian::Little
    } else if i32::from_be_bytes(sizeof_hdr) == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(Error::MalformedHeader("sizeof_hdr is not 348".into()));
    };
    let h = HeaderReader { buf, endian };

    match &buf[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::MalformedHeader(
                "header/image file pairs are not supported".into(),
            ))
        }
        _ => return Err(Error::MalformedHeader("missing NIfTI-1 magic".into())),
    }

    let dim: Vec<i16> = (0..8).map(|i| h.i16(40 + 2 * i)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::MalformedHeader(format!("dim[0] = {ndim}")));
    }
    if ndim < 3 {
        return Err(Error::UnsupportedDimensionality(format!(
            "{ndim} spatial dims, need 3"
        )));
    }
    if dim[1..=ndim as usize].iter().any(|&d| d <= 0) {
        return Err(Error::MalformedHeader(format!("non-positive dim {dim:?}")));
    }
    if dim[4..=ndim as usize].iter().any(|&d| d != 1) {
        return Err(Error::UnsupportedDimensionality(format!(
            "only single-frame 3D images are supported, dim = {dim:?}"
        )));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let code = h.i16(70);
    let dt = Datatype::from_code(code).ok_or(Error::UnsupportedDatatype(code))?;
    let bitpix = h.i16(72);
    if bitpix as usize != dt.size() * 8 {
        return Err(Error::MalformedHeader(format!(
            "bitpix {bitpix} inconsistent with datatype {code}"
        )));
    }

    let pixdim: Vec<f64> = (0..8).map(|i| h.f32(76 + 4 * i) as f64).collect();
    let spacing = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
    if !spacing.iter().all(|&s| s > 0.0 && s.is_finite()) {
        return Err(Error::MalformedHeader(format!("invalid pixdim {pixdim:?}")));
    }

    let (linear, origin) = affine(&h, spacing, pixdim[0]);
    check_axis_aligned(&linear)?;

    let vox_offset = h.f32(108);
    if !vox_offset.is_finite() || vox_offset < DATA_OFFSET as f32 || vox_offset.fract() != 0.0 {
        return Err(Error::MalformedHeader(format!("vox_offset {vox_offset}")));
    }
    let offset = vox_offset as usize;
    let n = dims.iter().product::<usize>();
    let needed = offset + n * dt.size();
    if buf.len() < needed {
        return Err(Error::MalformedHeader(format!(
            "truncated image data: need {needed} bytes, have {}",
            buf.len()
        )));
    }

    let slope = h.f32(112) as f64;
    let inter = h.f32(116) as f64;
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);

    let data: Vec<f64> = (0..n)
        .map(|i| {
            let v = h.value(dt, offset + i * dt.size());
            if scaled {
                v * slope + inter
            } else {
                v
            }
        })
        .collect();

    Ok(Volume3::new(dims, spacing, data, kind)?.with_origin(origin))
}

/// Linear part (3×3, rows = world axes) and translation of the voxel-to-world map.
fn affine(h: &HeaderReader<'_>, spacing: [f64; 3], qfac: f64) -> ([[f64; 3]; 3], [f64; 3]) {
    let qform_code = h.i16(252);
    let sform_code = h.i16(254);
    if sform_code > 0 {
        let row = |off: usize| [0, 1, 2, 3].map(|i| h.f32(off + 4 * i) as f64);
        let rows = [row(280), row(296), row(312)];
        let linear = rows.map(|r| [r[0], r[1], r[2]]);
        (linear, [rows[0][3], rows[1][3], rows[2][3]])
    } else if qform_code > 0 {
        let b = h.f32(256) as f64;
        let c = h.f32(260) as f64;
        let d = h.f32(264) as f64;
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let rot = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let qfac = if qfac < 0.0 { -1.0 } else { 1.0 };
        let scale = [spacing[0], spacing[1], spacing[2] * qfac];
        let linear = rot.map(|r| [r[0] * scale[0], r[1] * scale[1], r[2] * scale[2]]);
        let origin = [h.f32(268) as f64, h.f32(272) as f64, h.f32(276) as f64];
        (linear, origin)
    } else {
        (
            [[spacing[0], 0.0, 0.0], [0.0, spacing[1], 0.0], [0.0, 0.0, spacing[2]]],
            [0.0; 3],
        )
    }
}

/// Each voxel axis must map onto the matching world axis (sign flips allowed).
#[allow(clippy::needless_range_loop)]
fn check_axis_aligned(m: &[[f64; 3]; 3]) -> Result<()> {
    for col in 0..3 {
        let norm = (0..3).map(|r| m[r][col] * m[r][col]).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::MalformedHeader("degenerate affine".into()));
        }
        for row in 0..3 {
            if row != col && m[row][col].abs() > 1e-4 * norm {
                return Err(Error::NonAxisAligned);
            }
        }
    }
    Ok(())
}

/// Datatype the writer picks for a volume.
///
/// Binary masks are stored as 8-bit integers. Everything else is float32
/// when every value survives the f32 round trip, float64 otherwise.
pub fn storage_datatype(vol: &Volume3) -> Datatype {
    if vol.kind() == VolumeKind::Binary {
        Datatype::Uint8
    } else if vol
        .data()
        .iter()
        .all(|&v| (v as f32) as f64 == v || v.is_nan())
    {
        Datatype::Float32
    } else {
        Datatype::Float64
    }
}

/// Writes a single-file NIfTI-1 image; gzip when the path ends in `.gz`.
pub fn save_nifti(vol: &Volume3, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if vol.dims().iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::InvalidVolume(format!(
            "dims {:?} exceed the NIfTI-1 limit of {}",
            vol.dims(),
            i16::MAX
        )));
    }
    let bytes = encode(vol);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let result = if gz {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::new(6));
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

fn encode(vol: &Volume3) -> Vec<u8> {
    let dt = storage_datatype(vol);
    let dims = vol.dims();
    let spacing = vol.spacing();
    let origin = vol.origin();

    let mut hdr = vec![0u8; DATA_OFFSET];
    let put_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());

    hdr[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    hdr[38] = b'r';
    let dim = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.into_iter().enumerate() {
        put_i16(&mut hdr, 40 + 2 * i, d);
    }
    put_i16(&mut hdr, 70, dt.code());
    put_i16(&mut hdr, 72, (dt.size() * 8) as i16);
    let pixdim = [1.0, spacing[0], spacing[1], spacing[2], 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.into_iter().enumerate() {
        put_f32(&mut hdr, 76 + 4 * i, p as f32);
    }
    put_f32(&mut hdr, 108, DATA_OFFSET as f32);
    put_f32(&mut hdr, 112, 1.0);
    put_f32(&mut hdr, 116, 0.0);
    // mm + seconds
    hdr[123] = 2 | 8;

    put_i16(&mut hdr, 252, 1);
    put_i16(&mut hdr, 254, 1);
    for (i, o) in origin.into_iter().enumerate() {
        put_f32(&mut hdr, 268 + 4 * i, o as f32);
    }
    for row in 0..3 {
        let mut r = [0.0f32; 4];
        r[row] = spacing[row] as f32;
        r[3] = origin[row] as f32;
        for (i, v) in r.into_iter().enumerate() {
            put_f32(&mut hdr, 280 + 16 * row + 4 * i, v);
        }
    }
    hdr[344..348].copy_from_slice(b"n+1\0");

    hdr.reserve(vol.len() * dt.size());
    for &v in vol.data() {
        match dt {
            Datatype::Uint8 => hdr.push(v as u8),
            Datatype::Float32 => hdr.extend_from_slice(&(v as f32).to_le_bytes()),
            _ => hdr.extend_from_slice(&v.to_le_bytes()),
        }
    }
    hdr
}
