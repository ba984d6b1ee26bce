use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use neurovolve_ffi::*;

fn last_error() -> String {
    let n = unsafe { nv_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { nv_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn new_volume(dims: [usize; 3], label: bool, data: &[f64]) -> *mut NvVolume {
    let mut out = ptr::null_mut();
    let st = unsafe { nv_volume_new(dims.as_ptr(), [1.0, 1.0, 2.0].as_ptr(), label as i32, data.as_ptr(), &mut out) };
    assert_eq!(st, NvStatus::Ok, "{}", last_error());
    out
}

#[test]
fn volume_roundtrip_through_handles() {
    let dims = [4, 3, 2];
    let data: Vec<f64> = (0..24).map(|i| (i % 4) as f64).collect();
    let vol = new_volume(dims, true, &data);
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(&dir.path().join("v.nii.gz"));
    assert_eq!(unsafe { nv_volume_write(vol, path.as_ptr()) }, NvStatus::Ok);

    let mut back = ptr::null_mut();
    assert_eq!(unsafe { nv_volume_read(path.as_ptr(), &mut back) }, NvStatus::Ok);
    let mut d = [0usize; 3];
    let mut s = [0f64; 3];
    let mut is_label = -1;
    unsafe {
        assert_eq!(nv_volume_dims(back, d.as_mut_ptr()), NvStatus::Ok);
        assert_eq!(nv_volume_spacing(back, s.as_mut_ptr()), NvStatus::Ok);
        assert_eq!(nv_volume_is_label(back, &mut is_label), NvStatus::Ok);
    }
    assert_eq!(d, dims);
    assert_eq!(s, [1.0, 1.0, 2.0]);
    assert_eq!(is_label, 1);
    let mut p = ptr::null();
    let mut len = 0;
    assert_eq!(unsafe { nv_volume_data(back, &mut p, &mut len) }, NvStatus::Ok);
    assert_eq!(unsafe { std::slice::from_raw_parts(p, len) }, &data[..]);
    unsafe {
        nv_volume_free(vol);
        nv_volume_free(back);
        nv_volume_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nv_volume_read(ptr::null(), &mut out) }, NvStatus::NullPointer);
    assert!(last_error().contains("path"));

    let missing = CString::new("/nonexistent/x.nii").unwrap();
    assert_eq!(unsafe { nv_volume_read(missing.as_ptr(), &mut out) }, NvStatus::Io);
    assert!(out.is_null());

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.nii");
    std::fs::write(&junk, vec![0u8; 400]).unwrap();
    assert_eq!(unsafe { nv_volume_read(cstr(&junk).as_ptr(), &mut out) }, NvStatus::Format);

    let dims = [2usize, 1, 1];
    let st = unsafe { nv_volume_new(dims.as_ptr(), [1.0; 3].as_ptr(), 1, [0.5, 1.0].as_ptr(), &mut out) };
    assert_eq!(st, NvStatus::InvalidArgument);
    let st = unsafe { nv_volume_new([0usize, 1, 1].as_ptr(), [1.0; 3].as_ptr(), 0, [0.0].as_ptr(), &mut out) };
    assert_eq!(st, NvStatus::InvalidArgument);

    // truncated message still NUL terminated
    let mut small = [1 as c_char; 4];
    let full = unsafe { nv_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(full > 3);
    assert_eq!(small[3], 0);
}

#[test]
fn mask_metrics() {
    let dims = [20usize, 10, 10];
    let n = 2000;
    let a: Vec<u8> = (0..n).map(|i| u8::from(i % 20 < 10)).collect();
    let b: Vec<u8> = (0..n).map(|i| u8::from((5..15).contains(&(i % 20)))).collect();
    let mut d = 0.0;
    assert_eq!(unsafe { nv_dice(a.as_ptr(), b.as_ptr(), dims.as_ptr(), &mut d) }, NvStatus::Ok);
    assert_eq!(d, 0.5);
    let mut s = 0.0;
    let st = unsafe { nv_nsd(a.as_ptr(), a.as_ptr(), dims.as_ptr(), [1.0; 3].as_ptr(), 1.0, &mut s) };
    assert_eq!(st, NvStatus::Ok);
    assert_eq!(s, 1.0);
    let mut l = 0.0;
    let st = unsafe { nv_lesion_dice(a.as_ptr(), a.as_ptr(), dims.as_ptr(), 26, 3, 0, &mut l) };
    assert_eq!(st, NvStatus::Ok);
    assert_eq!(l, 1.0);
    let st = unsafe { nv_lesion_dice(a.as_ptr(), a.as_ptr(), dims.as_ptr(), 7, 3, 0, &mut l) };
    assert_eq!(st, NvStatus::InvalidArgument);
    let st = unsafe { nv_nsd(a.as_ptr(), a.as_ptr(), dims.as_ptr(), [1.0; 3].as_ptr(), -1.0, &mut s) };
    assert_eq!(st, NvStatus::InvalidArgument);
}

#[test]
fn segmentation_scores_and_region_counts() {
    let dims = [8, 8, 8];
    let mut seg = vec![0.0; 512];
    for z in 2..6 {
        for y in 2..6 {
            for x in 2..6 {
                seg[x + 8 * (y + 8 * z)] = if x < 3 { 1.0 } else if x < 5 { 3.0 } else { 2.0 };
            }
        }
    }
    let gt = new_volume(dims, true, &seg);
    let mut score = NvCaseScore::default();
    assert_eq!(unsafe { nv_score_segmentations(gt, gt, 1.0, &mut score) }, NvStatus::Ok);
    assert!(score.regions.iter().all(|r| r.lsd == 1.0 && r.nsd == 1.0));
    let mut counts = [0usize; 3];
    for (r, c) in counts.iter_mut().enumerate() {
        assert_eq!(unsafe { nv_region_voxels(gt, r as u32, c) }, NvStatus::Ok);
    }
    assert_eq!(counts, [32, 48, 64]);
    let mut c = 0;
    assert_eq!(unsafe { nv_region_voxels(gt, 3, &mut c) }, NvStatus::InvalidArgument);

    let other = new_volume([8, 8, 9], true, &[0.0; 576]);
    assert_eq!(unsafe { nv_score_segmentations(gt, other, 1.0, &mut score) }, NvStatus::Geometry);
    unsafe {
        nv_volume_free(gt);
        nv_volume_free(other);
    }
}

#[test]
fn phantom_generation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(unsafe { nv_phantom_generate(cstr(dir.path()).as_ptr(), 2, 1) }, NvStatus::Ok);
    let seg = dir.path().join("BraTS-PHANTOM-00001-000/BraTS-PHANTOM-00001-000-seg.nii.gz");
    assert!(seg.is_file());
    assert_eq!(unsafe { nv_phantom_generate(cstr(dir.path()).as_ptr(), 0, 1) }, NvStatus::InvalidArgument);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nv_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/neurovolve.h")
}

/// target/<profile>/ holding the static library built alongside this test.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "neurovolve.h"

int main(void) {
    size_t dims[3] = {4, 4, 4};
    double spacing[3] = {1.0, 1.0, 1.0};
    double data[64];
    unsigned char a[64], b[64];
    for (int i = 0; i < 64; i++) {
        data[i] = (i % 4 == 1) ? 3.0 : 0.0;
        a[i] = i < 32;
        b[i] = i < 16;
    }
    NvVolume *vol = NULL;
    if (nv_volume_new(dims, spacing, 1, data, &vol) != NV_STATUS_OK) return 1;
    size_t et = 0;
    if (nv_region_voxels(vol, 0, &et) != NV_STATUS_OK || et != 16) return 2;
    nv_volume_free(vol);
    double d = 0.0;
    if (nv_dice(a, b, dims, &d) != NV_STATUS_OK) return 3;
    /* 2*16 / (32+16) */
    if (d < 0.6666 || d > 0.6667) return 4;
    if (nv_volume_read(NULL, &vol) != NV_STATUS_NULL_POINTER) return 5;
    char msg[64];
    nv_last_error_message(msg, sizeof msg);
    if (strstr(msg, "null") == NULL) return 6;
    printf("ok %s\n", nv_version());
    return 0;
}
"#;

fn cc() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .map(str::to_owned)
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = header().parent().unwrap().to_path_buf();
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("t.c");
    std::fs::write(&c, "#include \"neurovolve.h\"\nint main(void){return 0;}\n").unwrap();
    let st = Command::new(&cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(&include).arg(&c).status().unwrap();
    assert!(st.success());
    let cpp = dir.path().join("t.cpp");
    std::fs::write(&cpp, "#include \"neurovolve.h\"\nint main(){return 0;}\n").unwrap();
    let st = Command::new(&cc).args(["-x", "c++", "-fsyntax-only", "-I"]).arg(&include).arg(&cpp).status().unwrap();
    assert!(st.success());
}

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let lib = profile_dir().join("libneurovolve_ffi.a");
    if !lib.is_file() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let out = Command::new(&cc)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
