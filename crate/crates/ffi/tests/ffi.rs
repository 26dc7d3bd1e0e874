use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use fklab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { fklab_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn model(json: &str) -> *mut FklabModel {
    let c = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { fklab_model_from_json(c.as_ptr(), &mut m) };
    assert_eq!(s, FklabStatus::Ok, "{}", last_error());
    m
}

#[test]
fn kernel_values_through_the_abi() {
    let m = model(r#"{"d": 1, "alpha": 1.0}"#);
    let (x, y) = ([0.0], [0.3]);
    let mut q = 0.0;
    assert_eq!(unsafe { fklab_q(m, 0.5, x.as_ptr(), y.as_ptr(), &mut q) }, FklabStatus::Ok);
    assert_eq!(q, 2.0);
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(unsafe { fklab_band(m, 0.5, x.as_ptr(), y.as_ptr(), &mut lo, &mut hi) }, FklabStatus::Ok);
    assert!(lo < q && q < hi);
    let mut d = 0usize;
    assert_eq!(unsafe { fklab_model_dim(m, &mut d) }, FklabStatus::Ok);
    assert_eq!(d, 1);
    unsafe { fklab_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new(r#"{"alpha": 2.5}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fklab_model_from_json(bad.as_ptr(), &mut m) }, FklabStatus::Domain);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let unknown = CString::new(r#"{"colour": 1}"#).unwrap();
    assert_eq!(unsafe { fklab_model_from_json(unknown.as_ptr(), &mut m) }, FklabStatus::Config);
    assert!(last_error().contains("colour"));

    let mut q = 0.0;
    let x = [0.0];
    assert_eq!(unsafe { fklab_q(ptr::null(), 1.0, x.as_ptr(), x.as_ptr(), &mut q) }, FklabStatus::NullArgument);

    let m = model("{}");
    assert_eq!(unsafe { fklab_band(m, 2.0, x.as_ptr(), x.as_ptr(), &mut q, &mut q) }, FklabStatus::Domain);
    unsafe { fklab_model_free(m) };
    unsafe { fklab_model_free(ptr::null_mut()) };
}

#[test]
fn preset_and_trivial_series() {
    let name = CString::new("killed-stable").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fklab_model_from_preset(name.as_ptr(), &mut m) }, FklabStatus::Ok);
    let setup = CString::new(r#"{"nx": 9, "n_times": 2}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { fklab_series_run(m, setup.as_ptr(), &mut s) }, FklabStatus::Ok, "{}", last_error());
    let (mut t1, mut passed, mut nt, mut nx) = (0.0, false, 0usize, 0usize);
    assert_eq!(unsafe { fklab_series_info(s, &mut t1, &mut passed, &mut nt, &mut nx) }, FklabStatus::Ok);
    assert!(passed && t1 > 0.0 && nt == 2 && nx > 0);
    let (mut p0, mut q) = (0.0, 0.0);
    assert_eq!(unsafe { fklab_series_value(s, 1, nx / 2, nx / 2, &mut p0, &mut q) }, FklabStatus::Ok);
    assert_eq!(p0, q);
    assert_eq!(unsafe { fklab_series_value(s, nt, 0, 0, &mut p0, &mut q) }, FklabStatus::Domain);

    let mut needed = 0usize;
    assert_eq!(unsafe { fklab_series_json(s, ptr::null_mut(), 0, &mut needed) }, FklabStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { fklab_series_json(s, buf.as_mut_ptr(), needed, &mut needed) }, FklabStatus::Ok);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(v["passed"], true);
    unsafe {
        fklab_series_free(s);
        fklab_model_free(m);
    }
}

#[test]
fn beyond_horizon_is_reported() {
    let m = model(r#"{"mu": {"kind": "density", "density": {"type": "constant", "value": 1.0}}}"#);
    let setup = CString::new(r#"{"t_max": 0.5}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { fklab_series_run(m, setup.as_ptr(), &mut s) }, FklabStatus::BeyondHorizon);
    assert!(last_error().contains("t1"));
    unsafe { fklab_model_free(m) };
}

#[test]
fn ppp_certification() {
    let (mut r, mut c, mut ok) = (0.0, 0.0, false);
    assert_eq!(unsafe { fklab_certify_ppp(1, 1.0, 20_000, 3, &mut r, &mut c, &mut ok) }, FklabStatus::Ok);
    assert!(ok && r < c && c == 256.0);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(fklab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/fklab.h")).unwrap();
    for f in ["fklab_model_from_json", "fklab_q", "fklab_band", "fklab_series_run", "fklab_series_json", "fklab_certify_ppp", "fklab_last_error"] {
        assert!(header.contains(f), "{f} missing from the header");
    }
    // syntax check when a C compiler is around
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg(format!("-I{}", dir.join("include").display()))
        .stdin(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(b"#include \"fklab.h\"\nint main(void) { FklabModel *m = 0; return (int)fklab_model_dim(m, 0); }\n")?;
            c.wait_with_output()
        })
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
