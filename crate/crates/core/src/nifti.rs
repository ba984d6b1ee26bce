//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Only the `n+1` single-file form is handled. Header/data pairs (`ni1`) and
//! NIfTI-2 files are rejected with [`Error::UnsupportedVariant`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{diagonal_affine, Affine, Grid, Volume3D, VolumeKind};

pub const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_UINT16: i16 = 512;

/// Parsed subset of the header that the toolkit uses.
#[derive(Debug, Clone)]
struct Header {
    dims: Vec<usize>,
    datatype: i16,
    pixdim: [f32; 8],
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
    qform_code: i16,
    sform_code: i16,
    quatern: [f32; 3],
    qoffset: [f32; 3],
    srow: [[f32; 4]; 3],
    big_endian: bool,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Cursor<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn f32(&self, off: usize) -> f32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().unwrap();
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::with_capacity(raw.len() * 4);
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let malformed = |field: &'static str, detail: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        field,
        detail,
    };
    if bytes.len() < HEADER_SIZE {
        return Err(malformed(
            "sizeof_hdr",
            format!("file holds {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        ));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let big_endian = match (le, be) {
        (348, _) => false,
        (_, 348) => true,
        (540, _) | (_, 540) => {
            return Err(Error::UnsupportedVariant {
                path: path.to_path_buf(),
                detail: "NIfTI-2 header".into(),
            })
        }
        _ => return Err(malformed("sizeof_hdr", format!("expected 348, found {le}"))),
    };
    let magic = &bytes[344..348];
    match magic {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::UnsupportedVariant {
                path: path.to_path_buf(),
                detail: "header/data pair (magic \"ni1\")".into(),
            })
        }
        _ => {
            return Err(malformed(
                "magic",
                format!("expected \"n+1\", found {:?}", String::from_utf8_lossy(magic)),
            ))
        }
    }
    let c = Cursor { bytes, big_endian };
    let ndim = c.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(malformed("dim[0]", format!("{ndim} is outside 1..=7")));
    }
    let dims: Vec<usize> = (0..ndim as usize)
        .map(|i| c.i16(42 + 2 * i))
        .map(|d| if d > 0 { Ok(d as usize) } else { Err(d) })
        .collect::<std::result::Result<_, _>>()
        .map_err(|d| malformed("dim", format!("non-positive extent {d}")))?;
    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = c.f32(76 + 4 * i);
    }
    let vox_offset = c.f32(108);
    if !(vox_offset >= HEADER_SIZE as f32) {
        return Err(malformed("vox_offset", format!("{vox_offset} is below {HEADER_SIZE}")));
    }
    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = c.f32(280 + 16 * r + 4 * k);
        }
    }
    Ok(Header {
        dims,
        datatype: c.i16(70),
        pixdim,
        vox_offset: vox_offset as usize,
        scl_slope: c.f32(112),
        scl_inter: c.f32(116),
        qform_code: c.i16(252),
        sform_code: c.i16(254),
        quatern: [c.f32(256), c.f32(260), c.f32(264)],
        qoffset: [c.f32(268), c.f32(272), c.f32(276)],
        srow,
        big_endian,
    })
}

fn bytes_per_voxel(datatype: i16) -> Option<usize> {
    match datatype {
        DT_UINT8 => Some(1),
        DT_INT16 | DT_UINT16 => Some(2),
        DT_FLOAT32 => Some(4),
        DT_FLOAT64 => Some(8),
        _ => None,
    }
}

fn decode_payload(path: &Path, hdr: &Header, bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    let width = bytes_per_voxel(hdr.datatype).ok_or(Error::UnsupportedDatatype {
        path: path.to_path_buf(),
        code: hdr.datatype,
    })?;
    let expected = count * width;
    let found = bytes.len().saturating_sub(hdr.vox_offset);
    if found < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    let payload = &bytes[hdr.vox_offset..hdr.vox_offset + expected];
    let be = hdr.big_endian;
    let raw: Vec<f64> = match hdr.datatype {
        DT_UINT8 => payload.iter().map(|&b| b as f64).collect(),
        DT_INT16 => payload
            .chunks_exact(2)
            .map(|b| {
                let b = [b[0], b[1]];
                (if be { i16::from_be_bytes(b) } else { i16::from_le_bytes(b) }) as f64
            })
            .collect(),
        DT_UINT16 => payload
            .chunks_exact(2)
            .map(|b| {
                let b = [b[0], b[1]];
                (if be { u16::from_be_bytes(b) } else { u16::from_le_bytes(b) }) as f64
            })
            .collect(),
        DT_FLOAT32 => payload
            .chunks_exact(4)
            .map(|b| {
                let b: [u8; 4] = b.try_into().unwrap();
                (if be { f32::from_be_bytes(b) } else { f32::from_le_bytes(b) }) as f64
            })
            .collect(),
        DT_FLOAT64 => payload
            .chunks_exact(8)
            .map(|b| {
                let b: [u8; 8] = b.try_into().unwrap();
                if be {
                    f64::from_be_bytes(b)
                } else {
                    f64::from_le_bytes(b)
                }
            })
            .collect(),
        _ => unreachable!(),
    };
    let slope = hdr.scl_slope as f64;
    let inter = hdr.scl_inter as f64;
    if slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0) {
        Ok(raw.into_iter().map(|v| v * slope + inter).collect())
    } else {
        Ok(raw)
    }
}

fn qform_affine(hdr: &Header, spacing: [f64; 3]) -> Affine {
    let [b, c, d] = hdr.quatern.map(f64::from);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let qfac = if hdr.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ];
    let scale = [spacing[0], spacing[1], spacing[2] * qfac];
    let mut m = diagonal_affine([1.0; 3]);
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j] * scale[j];
        }
        m[i][3] = hdr.qoffset[i] as f64;
    }
    m
}

fn header_grid(path: &Path, hdr: &Header, dims: [usize; 3]) -> Result<Grid> {
    let spacing = [1, 2, 3].map(|i| {
        let p = (hdr.pixdim[i] as f64).abs();
        if p > 0.0 && p.is_finite() {
            p
        } else {
            1.0
        }
    });
    let sform = (hdr.sform_code > 0).then(|| {
        let mut m = diagonal_affine([1.0; 3]);
        for (i, row) in hdr.srow.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[i][j] = *v as f64;
            }
        }
        m
    });
    let qform = (hdr.qform_code > 0).then(|| qform_affine(hdr, spacing));
    let affine = match (sform, qform) {
        (Some(s), Some(q)) => {
            let disagree = s
                .iter()
                .flatten()
                .zip(q.iter().flatten())
                .any(|(a, b)| (a - b).abs() > 1e-3);
            if disagree {
                log::debug!("{}: sform and qform disagree, using sform", path.display());
            }
            s
        }
        (Some(s), None) => s,
        (None, Some(q)) => q,
        (None, None) => diagonal_affine(spacing),
    };
    Grid::with_affine(dims, spacing, affine).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        field: "srow/pixdim",
        detail: e.to_string(),
    })
}

/// Spatial dims (first three) and the product of any trailing extents.
fn split_dims(path: &Path, hdr: &Header) -> Result<([usize; 3], usize)> {
    if hdr.dims.len() < 3 {
        return Err(Error::DimensionCount {
            path: path.to_path_buf(),
            ndim: hdr.dims.len() as i16,
        });
    }
    let spatial = [hdr.dims[0], hdr.dims[1], hdr.dims[2]];
    let rest = hdr.dims[3..].iter().product();
    Ok((spatial, rest))
}

/// Reads a 3D volume. Files written with `.gz` compression are detected from
/// their content, not the extension.
///
/// The volume kind is `Label` for integer datatypes whose values are all
/// non-negative, `Intensity` otherwise.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let hdr = parse_header(path, &bytes)?;
    let (dims, rest) = split_dims(path, &hdr)?;
    if hdr.dims.len() != 3 && rest != 1 {
        return Err(Error::DimensionCount {
            path: path.to_path_buf(),
            ndim: hdr.dims.len() as i16,
        });
    }
    let grid = header_grid(path, &hdr, dims)?;
    let data = decode_payload(path, &hdr, &bytes, grid.len())?;
    let integer = matches!(hdr.datatype, DT_UINT8 | DT_INT16 | DT_UINT16);
    let kind = if integer && data.iter().all(|&v| v >= 0.0 && v.fract() == 0.0) {
        VolumeKind::Label
    } else {
        VolumeKind::Intensity
    };
    Volume3D::new(grid, kind, data)
}

/// Reads a 4D volume whose last axis indexes channels. A 3D file is returned
/// as a single channel.
pub fn read_nifti_channels(path: impl AsRef<Path>) -> Result<(Grid, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let hdr = parse_header(path, &bytes)?;
    let (dims, channels) = split_dims(path, &hdr)?;
    if hdr.dims.len() > 4 {
        return Err(Error::DimensionCount {
            path: path.to_path_buf(),
            ndim: hdr.dims.len() as i16,
        });
    }
    let grid = header_grid(path, &hdr, dims)?;
    let n = grid.len();
    let data = decode_payload(path, &hdr, &bytes, n * channels)?;
    let chans = data.chunks_exact(n).map(<[f64]>::to_vec).collect();
    Ok((grid, chans))
}

fn encode_header(grid: &Grid, extra_dim: Option<usize>, datatype: i16, bitpix: i16) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    // regular = 'r'
    h[38] = b'r';
    let ndim = if extra_dim.is_some() { 4 } else { 3 };
    put_i16(&mut h, 40, ndim);
    for (i, d) in grid.dims.iter().enumerate() {
        put_i16(&mut h, 42 + 2 * i, *d as i16);
    }
    put_i16(&mut h, 48, extra_dim.unwrap_or(1) as i16);
    for i in 5..8 {
        put_i16(&mut h, 40 + 2 * i, 1);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, bitpix);
    put_f32(&mut h, 76, 1.0);
    for (i, s) in grid.spacing.iter().enumerate() {
        put_f32(&mut h, 80 + 4 * i, *s as f32);
    }
    put_f32(&mut h, 92, 1.0);
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    // xyzt_units: mm
    h[123] = 2;
    let descrip = b"neurovolve";
    h[148..148 + descrip.len()].copy_from_slice(descrip);
    put_i16(&mut h, 254, 1);
    for r in 0..3 {
        for k in 0..4 {
            put_f32(&mut h, 280 + 16 * r + 4 * k, grid.affine[r][k] as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes through a sibling temp file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let payload;
    let out: &[u8] = if is_gz(path) {
        let mut enc = GzEncoder::new(Vec::with_capacity(bytes.len() / 2), Compression::new(4));
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        payload = enc.finish().map_err(|e| Error::io(path, e))?;
        &payload
    } else {
        bytes
    };
    fs::write(&tmp, out).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `vol` as NIfTI-1. Label volumes are stored as uint8, intensities as
/// float32. The sform is set from the volume affine (`sform_code = 1`).
pub fn write_nifti(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let grid = vol.grid();
    let bytes = match vol.kind() {
        VolumeKind::Label => {
            let mut b = encode_header(grid, None, DT_UINT8, 8);
            b.reserve(vol.data().len());
            for (index, &value) in vol.data().iter().enumerate() {
                if !(0.0..=255.0).contains(&value) {
                    return Err(Error::LabelOutOfRange { value, index });
                }
                b.push(value as u8);
            }
            b
        }
        VolumeKind::Intensity => {
            let mut b = encode_header(grid, None, DT_FLOAT32, 32);
            b.reserve(vol.data().len() * 4);
            for &v in vol.data() {
                b.extend_from_slice(&(v as f32).to_le_bytes());
            }
            b
        }
    };
    write_atomic(path, &bytes)
}

/// Writes a float32 4D file with one channel per entry of `channels`.
pub fn write_nifti_channels(grid: &Grid, channels: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if channels.is_empty() || channels.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::InvalidVolume(format!(
            "{}: every channel must hold {} voxels",
            path.display(),
            grid.len()
        )));
    }
    let mut b = encode_header(grid, Some(channels.len()), DT_FLOAT32, 32);
    for c in channels {
        for &v in c {
            b.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    write_atomic(path, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_label() -> Volume3D {
        let g = Grid::new([2, 2, 2], [1.0, 1.5, 2.0]).unwrap();
        Volume3D::label(g, (0..8).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn voxel_order_is_x_fastest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.nii");
        write_nifti(&tiny_label(), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[VOX_OFFSET..], &[0, 1, 2, 3, 4, 5, 6, 7]);
        let back = read_nifti(&p).unwrap();
        assert_eq!(back.data(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(back.get(1, 0, 0), 1.0);
        assert_eq!(back.get(0, 1, 0), 2.0);
        assert_eq!(back.get(0, 0, 1), 4.0);
    }

    #[test]
    fn header_starts_with_sizeof_hdr_348_le() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.nii");
        write_nifti(&tiny_label(), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], &[0x5c, 0x01, 0x00, 0x00]);
        assert_eq!(&bytes[344..348], b"n+1\0");
        // sform_code = 1
        assert_eq!(i16::from_le_bytes([bytes[254], bytes[255]]), 1);
        // datatype uint8, bitpix 8
        assert_eq!(i16::from_le_bytes([bytes[70], bytes[71]]), 2);
        assert_eq!(i16::from_le_bytes([bytes[72], bytes[73]]), 8);
    }

    /// Builds a header byte by byte from the NIfTI-1 field table, independent
    /// of the writer.
    fn handmade_header(magic: &[u8; 4], datatype: i16, bitpix: i16, ndim: i16) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        h[0..4].copy_from_slice(&348i32.to_le_bytes());
        h[40..42].copy_from_slice(&ndim.to_le_bytes());
        for i in 0..3 {
            h[42 + 2 * i..44 + 2 * i].copy_from_slice(&2i16.to_le_bytes());
        }
        h[48..50].copy_from_slice(&1i16.to_le_bytes());
        h[70..72].copy_from_slice(&datatype.to_le_bytes());
        h[72..74].copy_from_slice(&bitpix.to_le_bytes());
        for i in 0..4 {
            h[76 + 4 * i..80 + 4 * i].copy_from_slice(&1f32.to_le_bytes());
        }
        h[108..112].copy_from_slice(&352f32.to_le_bytes());
        h[344..348].copy_from_slice(magic);
        h
    }

    #[test]
    fn pair_variant_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pair.nii");
        let mut b = handmade_header(b"ni1\0", 2, 8, 3);
        b.extend_from_slice(&[0; 8]);
        fs::write(&p, b).unwrap();
        let err = read_nifti(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported NIfTI variant"), "{err}");
        assert!(err.to_string().contains("pair.nii"));
    }

    #[test]
    fn handmade_int16_file_reads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i16.nii");
        let mut b = handmade_header(b"n+1\0", 4, 16, 3);
        for v in [-3i16, 0, 1, 2, 3, 4, 5, 300] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&p, b).unwrap();
        let v = read_nifti(&p).unwrap();
        assert_eq!(v.data(), &[-3.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 300.0]);
        assert_eq!(v.kind(), VolumeKind::Intensity);
        assert_eq!(v.affine(), &diagonal_affine([1.0; 3]));
    }

    #[test]
    fn error_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.nii");

        let mut b = handmade_header(b"xyz\0", 2, 8, 3);
        b.extend_from_slice(&[0; 8]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::MalformedHeader { field: "magic", .. })));

        let mut b = handmade_header(b"n+1\0", 8, 32, 3);
        b.extend_from_slice(&[0; 32]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::UnsupportedDatatype { code: 8, .. })));

        let mut b = handmade_header(b"n+1\0", 2, 8, 2);
        b.extend_from_slice(&[0; 8]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::DimensionCount { ndim: 2, .. })));

        let mut b = handmade_header(b"n+1\0", 2, 8, 4);
        b[48..50].copy_from_slice(&3i16.to_le_bytes());
        b.extend_from_slice(&[0; 24]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::DimensionCount { ndim: 4, .. })));

        let mut b = handmade_header(b"n+1\0", 16, 32, 3);
        b.extend_from_slice(&[0; 20]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(
            read_nifti(&p),
            Err(Error::Truncated {
                expected: 32,
                found: 20,
                ..
            })
        ));

        let mut b = handmade_header(b"n+1\0", 2, 8, 3);
        b[0..4].copy_from_slice(&540i32.to_le_bytes());
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_nifti(&p), Err(Error::UnsupportedVariant { .. })));
    }

    #[test]
    fn big_endian_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("be.nii");
        let mut h = vec![0u8; 352];
        h[0..4].copy_from_slice(&348i32.to_be_bytes());
        h[40..42].copy_from_slice(&3i16.to_be_bytes());
        for i in 0..3 {
            h[42 + 2 * i..44 + 2 * i].copy_from_slice(&[1i16, 2, 1][i].to_be_bytes());
        }
        h[70..72].copy_from_slice(&512i16.to_be_bytes());
        h[108..112].copy_from_slice(&352f32.to_be_bytes());
        h[112..116].copy_from_slice(&2f32.to_be_bytes());
        h[116..120].copy_from_slice(&1f32.to_be_bytes());
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(&7u16.to_be_bytes());
        h.extend_from_slice(&40000u16.to_be_bytes());
        fs::write(&p, &h).unwrap();
        let v = read_nifti(&p).unwrap();
        assert_eq!(v.dims(), [1, 2, 1]);
        assert_eq!(v.data(), &[15.0, 80001.0]);
    }

    #[test]
    fn qform_used_when_sform_absent() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.nii");
        let mut b = handmade_header(b"n+1\0", 2, 8, 3);
        b[80..84].copy_from_slice(&2f32.to_le_bytes());
        b[252..254].copy_from_slice(&1i16.to_le_bytes());
        // 180 degrees about z: (b, c, d) = (0, 0, 1)
        b[264..268].copy_from_slice(&1f32.to_le_bytes());
        b[268..272].copy_from_slice(&10f32.to_le_bytes());
        b.extend_from_slice(&[0; 8]);
        fs::write(&p, &b).unwrap();
        let v = read_nifti(&p).unwrap();
        let a = v.affine();
        assert_eq!(a[0][0], -2.0);
        assert_eq!(a[1][1], -1.0);
        assert_eq!(a[2][2], 1.0);
        assert_eq!(a[0][3], 10.0);
    }

    #[test]
    fn label_over_255_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let v = Volume3D::label(g, vec![1.0, 300.0]).unwrap();
        let err = write_nifti(&v, dir.path().join("x.nii")).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { index: 1, .. }));
    }

    #[test]
    fn channels_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("prob.nii.gz");
        let g = Grid::new([2, 2, 1], [1.0; 3]).unwrap();
        let chans = vec![vec![0.25, 0.5, 1.0, 0.0], vec![0.75, 0.5, 0.0, 1.0]];
        write_nifti_channels(&g, &chans, &p).unwrap();
        let (g2, back) = read_nifti_channels(&p).unwrap();
        assert_eq!(g2.dims, g.dims);
        assert_eq!(back, chans);
        assert!(read_nifti(&p).is_err());
    }
}
