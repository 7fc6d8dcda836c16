//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Files store voxels x-fastest, which is the same linear order as the
//! in-memory z-major layout of [`Volume`] and [`Mask`]; only the axis
//! labels swap (`dim[1..=3]` is `(nx, ny, nz)`, memory dims are
//! `(nz, ny, nx)`). Orientation fields (qform/sform) are written for
//! viewers but ignored on read; only `pixdim[1..=3]` is consumed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::volume::{Dims, GridError, Mask, Spacing, Volume};

pub const HEADER_SIZE: usize = 348;
pub const DEFAULT_VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";

/// Values at or below this are background when a file is read as a mask.
pub const MASK_THRESHOLD: f64 = 0.5;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const SROW_X: usize = 280;
    pub const SROW_Y: usize = 296;
    pub const SROW_Z: usize = 312;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("sizeof_hdr: expected 348, got {0}")]
    BadHeaderSize(i32),
    #[error("magic: unsupported magic {0:?} (only single-file \"n+1\" is supported)")]
    UnsupportedMagic([u8; 4]),
    #[error("datatype: unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("bitpix: {bitpix} does not match datatype code {datatype}")]
    BitpixMismatch { datatype: i16, bitpix: i16 },
    #[error("dim[0]: expected 3 dimensions, got {0}")]
    UnsupportedDimCount(i16),
    #[error("dim[{index}]: invalid extent {value}")]
    BadDim { index: usize, value: i16 },
    #[error("pixdim[{index}]: voxel size must be finite and > 0, got {value}")]
    BadPixdim { index: usize, value: f32 },
    #[error("vox_offset: invalid value {0} (must be >= 352)")]
    BadVoxOffset(f32),
    #[error("{section}: truncated, need {expected} bytes, have {actual}")]
    Truncated {
        section: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("dims: extent {value} along {axis} exceeds the 16-bit dim field")]
    DimTooLarge { axis: &'static str, value: usize },
    #[error("data: value {value} at voxel {index} is not representable as int16")]
    NotRepresentable { index: usize, value: f32 },
    #[error("gzip: {0}")]
    Gzip(std::io::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Supported on-disk voxel types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    UInt8,
    Int16,
    UInt16,
    Float32,
    Float64,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self, NiftiError> {
        Ok(match code {
            2 => Self::UInt8,
            4 => Self::Int16,
            512 => Self::UInt16,
            16 => Self::Float32,
            64 => Self::Float64,
            other => return Err(NiftiError::UnsupportedDatatype(other)),
        })
    }

    pub const fn code(self) -> i16 {
        match self {
            Self::UInt8 => 2,
            Self::Int16 => 4,
            Self::UInt16 => 512,
            Self::Float32 => 16,
            Self::Float64 => 64,
        }
    }

    pub const fn size(self) -> usize {
        match self {
            Self::UInt8 => 1,
            Self::Int16 | Self::UInt16 => 2,
            Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

/// The header fields this crate consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dims: Dims,
    pub spacing: Spacing,
    pub datatype: DataType,
    pub vox_offset: usize,
    pub scl_slope: f32,
    pub scl_inter: f32,
    big_endian: bool,
}

impl NiftiHeader {
    /// Effective `(slope, intercept)`; a zero or non-finite slope means "no scaling".
    pub fn scaling(&self) -> (f64, f64) {
        let slope = if self.scl_slope == 0.0 || !self.scl_slope.is_finite() {
            1.0
        } else {
            self.scl_slope as f64
        };
        let inter = if self.scl_inter.is_finite() {
            self.scl_inter as f64
        } else {
            0.0
        };
        (slope, inter)
    }
}

fn decompress_if_needed(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>, NiftiError> {
    if bytes.len() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B {
        let mut out = Vec::new();
        MultiGzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(NiftiError::Gzip)?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}

/// Parses the 348-byte header of an uncompressed payload.
pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader, NiftiError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::Truncated {
            section: "header",
            expected: HEADER_SIZE,
            actual: bytes.len(),
        });
    }
    let endian = match (
        LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]),
        BigEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]),
    ) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        (le, _) => return Err(NiftiError::BadHeaderSize(le)),
    };
    match endian {
        Endian::Little => parse_header_with::<LittleEndian>(bytes, false),
        Endian::Big => parse_header_with::<BigEndian>(bytes, true),
    }
}

fn parse_header_with<B: ByteOrder>(bytes: &[u8], big_endian: bool) -> Result<NiftiHeader, NiftiError> {
    let magic: [u8; 4] = bytes[offsets::MAGIC..offsets::MAGIC + 4].try_into().unwrap();
    if &magic != MAGIC_SINGLE {
        return Err(NiftiError::UnsupportedMagic(magic));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = B::read_i16(&bytes[offsets::DIM + 2 * i..]);
    }
    if dim[0] != 3 {
        return Err(NiftiError::UnsupportedDimCount(dim[0]));
    }
    for index in 1..=3 {
        if dim[index] < 1 {
            return Err(NiftiError::BadDim {
                index,
                value: dim[index],
            });
        }
    }

    let code = B::read_i16(&bytes[offsets::DATATYPE..]);
    let datatype = DataType::from_code(code)?;
    let bitpix = B::read_i16(&bytes[offsets::BITPIX..]);
    if bitpix as usize != datatype.size() * 8 {
        return Err(NiftiError::BitpixMismatch {
            datatype: code,
            bitpix,
        });
    }

    let mut pixdim = [0f32; 4];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = B::read_f32(&bytes[offsets::PIXDIM + 4 * i..]);
    }
    for index in 1..=3 {
        let value = pixdim[index];
        if !(value.is_finite() && value > 0.0) {
            return Err(NiftiError::BadPixdim { index, value });
        }
    }

    let vox_offset = B::read_f32(&bytes[offsets::VOX_OFFSET..]);
    if !(vox_offset.is_finite() && vox_offset >= DEFAULT_VOX_OFFSET as f32) {
        return Err(NiftiError::BadVoxOffset(vox_offset));
    }

    Ok(NiftiHeader {
        dims: Dims::new(dim[3] as usize, dim[2] as usize, dim[1] as usize),
        spacing: Spacing::new(pixdim[3] as f64, pixdim[2] as f64, pixdim[1] as f64),
        datatype,
        vox_offset: vox_offset as usize,
        scl_slope: B::read_f32(&bytes[offsets::SCL_SLOPE..]),
        scl_inter: B::read_f32(&bytes[offsets::SCL_INTER..]),
        big_endian,
    })
}

/// Decodes raw voxels and applies `scl_slope`/`scl_inter`.
fn decode_values(header: &NiftiHeader, bytes: &[u8]) -> Result<Vec<f64>, NiftiError> {
    let n = header.dims.len();
    let size = header.datatype.size();
    let expected = header.vox_offset + n * size;
    if bytes.len() < expected {
        return Err(NiftiError::Truncated {
            section: "data",
            expected,
            actual: bytes.len(),
        });
    }
    let raw = &bytes[header.vox_offset..expected];
    let (slope, inter) = header.scaling();
    let values = if header.big_endian {
        decode_raw::<BigEndian>(header.datatype, raw)
    } else {
        decode_raw::<LittleEndian>(header.datatype, raw)
    };
    if slope == 1.0 && inter == 0.0 {
        return Ok(values);
    }
    Ok(values.into_iter().map(|v| slope * v + inter).collect())
}

fn decode_raw<B: ByteOrder>(datatype: DataType, raw: &[u8]) -> Vec<f64> {
    let size = datatype.size();
    raw.chunks_exact(size)
        .map(|c| match datatype {
            DataType::UInt8 => c[0] as f64,
            DataType::Int16 => B::read_i16(c) as f64,
            DataType::UInt16 => B::read_u16(c) as f64,
            DataType::Float32 => B::read_f32(c) as f64,
            DataType::Float64 => B::read_f64(c),
        })
        .collect()
}

/// Parses a (possibly gzip-compressed) payload as an intensity volume.
pub fn parse_volume(bytes: &[u8]) -> Result<Volume, NiftiError> {
    let bytes = decompress_if_needed(bytes)?;
    let header = parse_header(&bytes)?;
    let values = decode_values(&header, &bytes)?;
    let data = values.into_iter().map(|v| v as f32).collect();
    Ok(Volume::new(header.dims, header.spacing, data)?)
}

/// Parses a payload as a binary mask: scaled values `> 0.5` are foreground.
pub fn parse_mask(bytes: &[u8]) -> Result<Mask, NiftiError> {
    let bytes = decompress_if_needed(bytes)?;
    let header = parse_header(&bytes)?;
    let values = decode_values(&header, &bytes)?;
    let data = values.into_iter().map(|v| v > MASK_THRESHOLD).collect();
    Ok(Mask::new(header.dims, header.spacing, data)?)
}

fn header_bytes(dims: Dims, spacing: Spacing, datatype: DataType) -> Result<Vec<u8>, NiftiError> {
    for (axis, value) in [("nx", dims.nx), ("ny", dims.ny), ("nz", dims.nz)] {
        if value > i16::MAX as usize {
            return Err(NiftiError::DimTooLarge { axis, value });
        }
    }
    let mut h = vec![0u8; DEFAULT_VOX_OFFSET];
    type E = LittleEndian;
    E::write_i32(&mut h[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
    let dim: [i16; 8] = [3, dims.nx as i16, dims.ny as i16, dims.nz as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        E::write_i16(&mut h[offsets::DIM + 2 * i..], *d);
    }
    E::write_i16(&mut h[offsets::DATATYPE..], datatype.code());
    E::write_i16(&mut h[offsets::BITPIX..], (datatype.size() * 8) as i16);
    let pixdim: [f32; 8] = [
        1.0,
        spacing.dx as f32,
        spacing.dy as f32,
        spacing.dz as f32,
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        E::write_f32(&mut h[offsets::PIXDIM + 4 * i..], *p);
    }
    E::write_f32(&mut h[offsets::VOX_OFFSET..], DEFAULT_VOX_OFFSET as f32);
    E::write_f32(&mut h[offsets::SCL_SLOPE..], 1.0);
    E::write_f32(&mut h[offsets::SCL_INTER..], 0.0);
    // millimetres
    h[offsets::XYZT_UNITS] = 2;
    let descrip = b"segqc";
    h[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip);
    E::write_i16(&mut h[offsets::QFORM_CODE..], 0);
    E::write_i16(&mut h[offsets::SFORM_CODE..], 1);
    let rows = [
        (offsets::SROW_X, [spacing.dx as f32, 0.0, 0.0, 0.0]),
        (offsets::SROW_Y, [0.0, spacing.dy as f32, 0.0, 0.0]),
        (offsets::SROW_Z, [0.0, 0.0, spacing.dz as f32, 0.0]),
    ];
    for (off, row) in rows {
        for (i, v) in row.iter().enumerate() {
            E::write_f32(&mut h[off + 4 * i..], *v);
        }
    }
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(MAGIC_SINGLE);
    Ok(h)
}

/// Serializes a volume as uncompressed float32 NIfTI-1.
pub fn write_volume(v: &Volume) -> Result<Vec<u8>, NiftiError> {
    let mut out = header_bytes(v.dims(), v.spacing(), DataType::Float32)?;
    out.reserve(v.data().len() * 4);
    for &value in v.data() {
        out.extend_from_slice(&value.to_le_bytes());
    }
    Ok(out)
}

/// Serializes a volume of integral values as uncompressed int16 NIfTI-1,
/// the usual storage type for CT in Hounsfield units.
pub fn write_volume_i16(v: &Volume) -> Result<Vec<u8>, NiftiError> {
    let mut out = header_bytes(v.dims(), v.spacing(), DataType::Int16)?;
    out.reserve(v.data().len() * 2);
    for (i, &value) in v.data().iter().enumerate() {
        if value.fract() != 0.0 || !(i16::MIN as f32..=i16::MAX as f32).contains(&value) {
            return Err(NiftiError::NotRepresentable { index: i, value });
        }
        out.extend_from_slice(&(value as i16).to_le_bytes());
    }
    Ok(out)
}

/// Serializes a mask as uncompressed uint8 NIfTI-1.
pub fn write_mask(m: &Mask) -> Result<Vec<u8>, NiftiError> {
    let mut out = header_bytes(m.dims(), m.spacing(), DataType::UInt8)?;
    out.extend(m.data().iter().map(|&b| b as u8));
    Ok(out)
}

fn is_gz_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), NiftiError> {
    if is_gz_path(path) {
        let file = fs::File::create(path)?;
        let mut enc = GzEncoder::new(std::io::BufWriter::new(file), Compression::fast());
        enc.write_all(bytes)?;
        enc.finish()?.flush()?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume, NiftiError> {
    parse_volume(&fs::read(path)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask, NiftiError> {
    parse_mask(&fs::read(path)?)
}

/// Writes a volume; a `.gz` extension selects gzip compression.
pub fn write_volume_file(path: impl AsRef<Path>, v: &Volume) -> Result<(), NiftiError> {
    write_file(path.as_ref(), &write_volume(v)?)
}

pub fn write_volume_i16_file(path: impl AsRef<Path>, v: &Volume) -> Result<(), NiftiError> {
    write_file(path.as_ref(), &write_volume_i16(v)?)
}

pub fn write_mask_file(path: impl AsRef<Path>, m: &Mask) -> Result<(), NiftiError> {
    write_file(path.as_ref(), &write_mask(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_file(dims: (i16, i16, i16), datatype: i16, bitpix: i16, payload: &[u8]) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        LittleEndian::write_i32(&mut h[0..], 348);
        let dim = [3, dims.0, dims.1, dims.2, 1, 1, 1, 1];
        for (i, d) in dim.iter().enumerate() {
            LittleEndian::write_i16(&mut h[40 + 2 * i..], *d);
        }
        LittleEndian::write_i16(&mut h[70..], datatype);
        LittleEndian::write_i16(&mut h[72..], bitpix);
        for i in 0..8 {
            LittleEndian::write_f32(&mut h[76 + 4 * i..], 1.0);
        }
        LittleEndian::write_f32(&mut h[108..], 352.0);
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(payload);
        h
    }

    #[test]
    fn slope_and_intercept_applied() {
        let mut bytes = raw_file((1, 1, 1), 4, 16, &1024i16.to_le_bytes());
        LittleEndian::write_f32(&mut bytes[112..], 1.0);
        LittleEndian::write_f32(&mut bytes[116..], -1024.0);
        let v = parse_volume(&bytes).unwrap();
        assert_eq!(v.data(), &[0.0]);
    }

    #[test]
    fn zero_slope_means_identity_slope() {
        let mut bytes = raw_file((1, 1, 1), 2, 8, &[7]);
        LittleEndian::write_f32(&mut bytes[112..], 0.0);
        LittleEndian::write_f32(&mut bytes[116..], 3.0);
        assert_eq!(parse_volume(&bytes).unwrap().data(), &[10.0]);
    }

    #[test]
    fn detached_header_rejected() {
        let mut bytes = raw_file((1, 1, 1), 2, 8, &[0]);
        bytes[344..348].copy_from_slice(b"ni1\0");
        let err = parse_volume(&bytes).unwrap_err();
        assert!(matches!(err, NiftiError::UnsupportedMagic(_)));
        assert!(err.to_string().contains("unsupported magic"));
    }

    #[test]
    fn distinct_errors_name_fields() {
        let bytes = raw_file((1, 1, 1), 8, 32, &[0; 4]);
        let err = parse_volume(&bytes).unwrap_err();
        assert!(matches!(err, NiftiError::UnsupportedDatatype(8)));
        assert!(err.to_string().starts_with("datatype"));

        let mut bytes = raw_file((1, 1, 1), 2, 8, &[0]);
        LittleEndian::write_i16(&mut bytes[40..], 4);
        let err = parse_volume(&bytes).unwrap_err();
        assert!(matches!(err, NiftiError::UnsupportedDimCount(4)));
        assert!(err.to_string().starts_with("dim[0]"));

        let bytes = raw_file((2, 2, 2), 2, 8, &[0; 5]);
        let err = parse_volume(&bytes).unwrap_err();
        assert!(matches!(
            err,
            NiftiError::Truncated {
                section: "data",
                expected: 360,
                actual: 357
            }
        ));

        let err = parse_volume(&[0u8; 100]).unwrap_err();
        assert!(matches!(err, NiftiError::Truncated { section: "header", .. }));
    }

    #[test]
    fn float_mask_binarized_at_half() {
        let payload: Vec<u8> = [0.2f32, 0.5, 0.51, 1.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let m = parse_mask(&raw_file((4, 1, 1), 16, 32, &payload)).unwrap();
        assert_eq!(m.data(), &[false, false, true, true]);
    }

    #[test]
    fn zero_mask_layout() {
        let m = Mask::empty(Dims::new(2, 2, 2), Spacing::default()).unwrap();
        let bytes = write_mask(&m).unwrap();
        assert_eq!(bytes.len(), DEFAULT_VOX_OFFSET + 8);
        assert!(bytes[DEFAULT_VOX_OFFSET..].iter().all(|&b| b == 0));
        assert_eq!(LittleEndian::read_i16(&bytes[70..]), 2);
    }

    #[test]
    fn pixdim_written_in_xyz_order() {
        let v = Volume::filled(Dims::new(1, 1, 1), Spacing::new(5.0, 0.68, 0.68), 0.0).unwrap();
        let bytes = write_volume(&v).unwrap();
        let p: Vec<f32> = (1..=3).map(|i| LittleEndian::read_f32(&bytes[76 + 4 * i..])).collect();
        assert_eq!(p, vec![0.68f32, 0.68, 5.0]);
    }

    #[test]
    fn oversized_dims_rejected() {
        let m = Mask::empty(Dims::new(1, 1, 40_000), Spacing::default()).unwrap();
        assert!(matches!(
            write_mask(&m),
            Err(NiftiError::DimTooLarge { axis: "nx", value: 40_000 })
        ));
    }

    #[test]
    fn big_endian_accepted() {
        let mut h = vec![0u8; 352];
        BigEndian::write_i32(&mut h[0..], 348);
        for (i, d) in [3i16, 2, 1, 1, 1, 1, 1, 1].iter().enumerate() {
            BigEndian::write_i16(&mut h[40 + 2 * i..], *d);
        }
        BigEndian::write_i16(&mut h[70..], 4);
        BigEndian::write_i16(&mut h[72..], 16);
        for i in 0..8 {
            BigEndian::write_f32(&mut h[76 + 4 * i..], 1.0);
        }
        BigEndian::write_f32(&mut h[108..], 352.0);
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(&(-5i16).to_be_bytes());
        h.extend_from_slice(&300i16.to_be_bytes());
        assert_eq!(parse_volume(&h).unwrap().data(), &[-5.0, 300.0]);
    }

    #[test]
    fn gzip_roundtrip() {
        let mut m = Mask::empty(Dims::new(2, 3, 4), Spacing::new(2.5, 0.75, 0.75)).unwrap();
        m.set(1, 2, 3, true);
        let raw = write_mask(&m).unwrap();
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&raw).unwrap();
        let gz = enc.finish().unwrap();
        assert_eq!(parse_mask(&gz).unwrap(), m);
    }

    #[test]
    fn int16_writer_round_trips_integral_values() {
        let d = Dims::new(2, 2, 2);
        let v = Volume::new(d, Spacing::default(), vec![-1024.0, -800.0, 0.0, 3.0, 12.0, -1.0, 300.0, 0.0]).unwrap();
        let bytes = write_volume_i16(&v).unwrap();
        assert_eq!(bytes.len(), 352 + 16);
        assert_eq!(parse_header(&bytes).unwrap().datatype, DataType::Int16);
        assert_eq!(parse_volume(&bytes).unwrap(), v);
        let frac = Volume::new(d, Spacing::default(), vec![0.5; 8]).unwrap();
        assert!(matches!(write_volume_i16(&frac), Err(NiftiError::NotRepresentable { index: 0, .. })));
    }
}
