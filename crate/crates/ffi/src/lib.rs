//! C ABI over the `neurovolve` toolkit.
//!
//! Every fallible function returns an [`NvStatus`]; on failure the message is
//! kept per thread and can be fetched with [`nv_last_error_message`].
//! Volumes are opaque [`NvVolume`] handles owned by the caller and released
//! with [`nv_volume_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use neurovolve::labels::{region_mask, LabelScheme, Region};
use neurovolve::metrics::{dice, lesion_wise_dice, nsd, score_case, Connectivity, LesionParams, MetricParams};
use neurovolve::phantom::{generate_dataset, Jitter, PhantomSpec};
use neurovolve::{read_nifti, write_nifti, BinaryMask, Error, Grid, Volume3D, VolumeKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Geometry = 5,
    Panic = 6,
}

/// Opaque volume handle.
pub struct NvVolume(Volume3D);

/// Lesion-wise Dice and NSD for one region.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NvRegionScore {
    pub lsd: f64,
    pub nsd: f64,
}

/// Scores for ET, TC and WT, in that order.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NvCaseScore {
    pub regions: [NvRegionScore; 3],
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> NvStatus {
    match err {
        Error::Io { .. } => NvStatus::Io,
        Error::UnsupportedVariant { .. }
        | Error::MalformedHeader { .. }
        | Error::UnsupportedDatatype { .. }
        | Error::DimensionCount { .. }
        | Error::Truncated { .. }
        | Error::Json(_)
        | Error::Png(_) => NvStatus::Format,
        Error::GeometryMismatch(_) => NvStatus::Geometry,
        _ => NvStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (NvStatus, String)>) -> NvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            NvStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NvStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (NvStatus, String)>;
}

impl<T> IntoFfi<T> for neurovolve::Result<T> {
    fn ffi(self) -> Result<T, (NvStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (NvStatus, String) {
    (NvStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NvStatus, String) {
    (NvStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (NvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn volume_ref<'a>(v: *const NvVolume, what: &str) -> Result<&'a Volume3D, (NvStatus, String)> {
    // SAFETY: caller passes a live handle from this library or null.
    unsafe { v.as_ref() }.map(|h| &h.0).ok_or_else(|| null(what))
}

unsafe fn dims_arg(dims: *const usize) -> Result<[usize; 3], (NvStatus, String)> {
    if dims.is_null() {
        return Err(null("dims"));
    }
    // SAFETY: caller passes three readable values.
    let d = unsafe { [*dims, *dims.add(1), *dims.add(2)] };
    if d.contains(&0) {
        return Err(invalid(format!("dims must be positive, got {d:?}")));
    }
    d.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| invalid("dims overflow"))?;
    Ok(d)
}

unsafe fn spacing_arg(spacing: *const f64) -> Result<[f64; 3], (NvStatus, String)> {
    if spacing.is_null() {
        return Err(null("spacing"));
    }
    // SAFETY: caller passes three readable values.
    Ok(unsafe { [*spacing, *spacing.add(1), *spacing.add(2)] })
}

/// Nonzero bytes are `true`.
unsafe fn mask_arg(data: *const u8, dims: [usize; 3], what: &str) -> Result<BinaryMask, (NvStatus, String)> {
    if data.is_null() {
        return Err(null(what));
    }
    let n = dims.iter().product();
    // SAFETY: caller passes `nx*ny*nz` readable bytes.
    let bytes = unsafe { std::slice::from_raw_parts(data, n) };
    BinaryMask::new(dims, bytes.iter().map(|&b| b != 0).collect()).ffi()
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (NvStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: checked non-null; caller guarantees it is writable.
    unsafe { out.write(value) };
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator; pass a null `buf` to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nv_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has `len` bytes and `n + 1 <= len`.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a NIfTI-1 file (`.nii` or `.nii.gz`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_read(path: *const c_char, out: *mut *mut NvVolume) -> NvStatus {
    guard(|| {
        let p = unsafe { path_arg(path, "path") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = read_nifti(p).ffi()?;
        unsafe { write_out(out, Box::into_raw(Box::new(NvVolume(v)))) }
    })
}

/// Writes a volume; labels as uint8, intensities as float32.
///
/// # Safety
/// `vol` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_write(vol: *const NvVolume, path: *const c_char) -> NvStatus {
    guard(|| {
        let v = unsafe { volume_ref(vol, "vol") }?;
        let p = unsafe { path_arg(path, "path") }?;
        write_nifti(v, p).ffi()
    })
}

/// Creates a volume from `nx*ny*nz` values (x fastest). With `is_label`
/// nonzero the values must be non-negative integers.
///
/// # Safety
/// `dims` and `spacing` point to three values each, `data` to the voxels,
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_new(
    dims: *const usize,
    spacing: *const f64,
    is_label: i32,
    data: *const f64,
    out: *mut *mut NvVolume,
) -> NvStatus {
    guard(|| {
        let d = unsafe { dims_arg(dims) }?;
        let s = unsafe { spacing_arg(spacing) }?;
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let n = d.iter().product();
        // SAFETY: caller passes `n` readable values.
        let values = unsafe { std::slice::from_raw_parts(data, n) }.to_vec();
        let kind = if is_label != 0 { VolumeKind::Label } else { VolumeKind::Intensity };
        let v = Volume3D::new(Grid::new(d, s).ffi()?, kind, values).ffi()?;
        unsafe { write_out(out, Box::into_raw(Box::new(NvVolume(v)))) }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `vol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_free(vol: *mut NvVolume) {
    if !vol.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(vol) });
    }
}

/// # Safety
/// `vol` must be a live handle; `out` points to three writable values.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_dims(vol: *const NvVolume, out: *mut usize) -> NvStatus {
    guard(|| {
        let v = unsafe { volume_ref(vol, "vol") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: three writable values.
        unsafe { ptr::copy_nonoverlapping(v.dims().as_ptr(), out, 3) };
        Ok(())
    })
}

/// # Safety
/// `vol` must be a live handle; `out` points to three writable values.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_spacing(vol: *const NvVolume, out: *mut f64) -> NvStatus {
    guard(|| {
        let v = unsafe { volume_ref(vol, "vol") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: three writable values.
        unsafe { ptr::copy_nonoverlapping(v.spacing().as_ptr(), out, 3) };
        Ok(())
    })
}

/// Writes 1 for label volumes, 0 for intensity volumes.
///
/// # Safety
/// `vol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_is_label(vol: *const NvVolume, out: *mut i32) -> NvStatus {
    guard(|| {
        let v = unsafe { volume_ref(vol, "vol") }?;
        unsafe { write_out(out, i32::from(v.kind() == VolumeKind::Label)) }
    })
}

/// Borrows the voxel buffer (x fastest). The pointer stays valid until the
/// handle is freed.
///
/// # Safety
/// `vol` must be a live handle; `data` and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn nv_volume_data(vol: *const NvVolume, data: *mut *const f64, len: *mut usize) -> NvStatus {
    guard(|| {
        let v = unsafe { volume_ref(vol, "vol") }?;
        if len.is_null() {
            return Err(null("len"));
        }
        unsafe { write_out(data, v.data().as_ptr()) }?;
        unsafe { write_out(len, v.data().len()) }
    })
}

/// Dice of two byte masks (nonzero = inside).
///
/// # Safety
/// `a` and `b` hold `nx*ny*nz` bytes; `dims` three values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nv_dice(a: *const u8, b: *const u8, dims: *const usize, out: *mut f64) -> NvStatus {
    guard(|| {
        let d = unsafe { dims_arg(dims) }?;
        let (ma, mb) = unsafe { (mask_arg(a, d, "a")?, mask_arg(b, d, "b")?) };
        unsafe { write_out(out, dice(&ma, &mb).ffi()?) }
    })
}

/// Normalized surface distance of two byte masks at tolerance `tau_mm`.
///
/// # Safety
/// As for [`nv_dice`]; `spacing` points to three values.
#[no_mangle]
pub unsafe extern "C" fn nv_nsd(
    gt: *const u8,
    pred: *const u8,
    dims: *const usize,
    spacing: *const f64,
    tau_mm: f64,
    out: *mut f64,
) -> NvStatus {
    guard(|| {
        let d = unsafe { dims_arg(dims) }?;
        let s = unsafe { spacing_arg(spacing) }?;
        let (g, p) = unsafe { (mask_arg(gt, d, "gt")?, mask_arg(pred, d, "pred")?) };
        unsafe { write_out(out, nsd(&g, &p, s, tau_mm).ffi()?) }
    })
}

/// Lesion-wise Dice of two byte masks. `connectivity` is 6, 18 or 26.
///
/// # Safety
/// As for [`nv_dice`].
#[no_mangle]
pub unsafe extern "C" fn nv_lesion_dice(
    gt: *const u8,
    pred: *const u8,
    dims: *const usize,
    connectivity: u32,
    dilation_vox: usize,
    min_lesion_vox: usize,
    out: *mut f64,
) -> NvStatus {
    guard(|| {
        let d = unsafe { dims_arg(dims) }?;
        let connectivity = match connectivity {
            6 => Connectivity::Six,
            18 => Connectivity::Eighteen,
            26 => Connectivity::TwentySix,
            c => return Err(invalid(format!("connectivity must be 6, 18 or 26, got {c}"))),
        };
        let (g, p) = unsafe { (mask_arg(gt, d, "gt")?, mask_arg(pred, d, "pred")?) };
        let params = LesionParams {
            connectivity,
            dilation_vox,
            min_lesion_vox,
        };
        unsafe { write_out(out, lesion_wise_dice(&g, &p, &params).ffi()?.0) }
    })
}

/// Per-region scores of two segmentations under the default label scheme
/// (0 background, 1 NCR, 2 ED, 3 ET), default lesion parameters and
/// tolerance `tau_mm`.
///
/// # Safety
/// `gt` and `pred` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nv_score_segmentations(
    gt: *const NvVolume,
    pred: *const NvVolume,
    tau_mm: f64,
    out: *mut NvCaseScore,
) -> NvStatus {
    guard(|| {
        let g = unsafe { volume_ref(gt, "gt") }?;
        let p = unsafe { volume_ref(pred, "pred") }?;
        let params = MetricParams {
            nsd_tolerance_mm: tau_mm,
            ..MetricParams::default()
        };
        let row = score_case("", g, p, &LabelScheme::default(), &params).ffi()?;
        let regions = row.regions.map(|s| NvRegionScore { lsd: s.lsd, nsd: s.nsd });
        unsafe { write_out(out, NvCaseScore { regions }) }
    })
}

/// Voxel count of a region (0 ET, 1 TC, 2 WT) under the default label scheme.
///
/// # Safety
/// `seg` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nv_region_voxels(seg: *const NvVolume, region: u32, out: *mut usize) -> NvStatus {
    guard(|| {
        let s = unsafe { volume_ref(seg, "seg") }?;
        let r = *Region::ALL
            .get(region as usize)
            .ok_or_else(|| invalid(format!("region index {region} out of range")))?;
        let m = region_mask(s, r, &LabelScheme::default()).ffi()?;
        unsafe { write_out(out, m.mask.count()) }
    })
}

/// Writes `count` default phantom cases with noise seed `seed` under
/// `output_dir` in the BraTS layout.
///
/// # Safety
/// `output_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nv_phantom_generate(output_dir: *const c_char, count: usize, seed: u64) -> NvStatus {
    guard(|| {
        let dir = unsafe { path_arg(output_dir, "output_dir") }?;
        let spec = PhantomSpec {
            seed,
            ..PhantomSpec::default()
        };
        generate_dataset(count, &spec, &Jitter::default(), &dir, 0).ffi()?;
        Ok(())
    })
}
