use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use deepcent_ffi::*;

fn last_error() -> String {
    let p = dc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulate(competing: bool, n: usize, seed: u64) -> *mut DcDataset {
    let mut ds = ptr::null_mut();
    let st = unsafe { dc_dataset_simulate(competing, n, 0.3, seed, &mut ds) };
    assert_eq!(st, DcStatus::Ok);
    ds
}

fn quick_options() -> DcTrainOptions {
    DcTrainOptions {
        epochs: 20,
        ..dc_train_options_default()
    }
}

#[test]
fn train_predict_save_load_roundtrip() {
    let ds = simulate(false, 120, 1);
    unsafe {
        assert_eq!(dc_dataset_len(ds), 120);
        let p = dc_dataset_n_covariates(ds);
        assert_eq!(p, 5);
        let mut x = vec![0.0; 120 * p];
        assert_eq!(dc_dataset_covariates(ds, x.as_mut_ptr()), DcStatus::Ok);

        let method = CString::new("deepcent").unwrap();
        let opts = quick_options();
        let mut model = ptr::null_mut();
        assert_eq!(dc_model_train(ds, method.as_ptr(), &opts, &mut model), DcStatus::Ok);
        assert_eq!(dc_model_n_causes(model), 1);
        assert_eq!(dc_model_n_covariates(model), 5);
        let mut pred = vec![0.0; 120];
        assert_eq!(dc_model_predict(model, x.as_ptr(), 120, p, pred.as_mut_ptr()), DcStatus::Ok);
        assert!(pred.iter().all(|v| *v >= 1e-6 && v.is_finite()));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.txt").to_str().unwrap()).unwrap();
        assert_eq!(dc_model_save(model, path.as_ptr()), DcStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(dc_model_load(path.as_ptr(), &mut loaded), DcStatus::Ok);
        let mut again = vec![0.0; 120];
        assert_eq!(dc_model_predict(loaded, x.as_ptr(), 120, p, again.as_mut_ptr()), DcStatus::Ok);
        assert_eq!(pred, again);

        dc_model_free(model);
        dc_model_free(loaded);
        dc_dataset_free(ds);
    }
}

#[test]
fn competing_predictions_are_cause_major() {
    let ds = simulate(true, 150, 2);
    unsafe {
        let p = dc_dataset_n_covariates(ds);
        let mut x = vec![0.0; 150 * p];
        dc_dataset_covariates(ds, x.as_mut_ptr());
        let method = CString::new("cr-weibull").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(dc_model_train(ds, method.as_ptr(), ptr::null(), &mut model), DcStatus::Ok);
        assert_eq!(dc_model_n_causes(model), 2);
        let mut out = vec![f64::NAN; 300];
        assert_eq!(dc_model_predict(model, x.as_ptr(), 150, p, out.as_mut_ptr()), DcStatus::Ok);
        assert!(out.iter().all(|v| v.is_finite()));
        dc_model_free(model);
        dc_dataset_free(ds);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(dc_dataset_load_csv(ptr::null(), &mut ds), DcStatus::NullPointer);
        assert!(last_error().contains("path"));

        let missing = CString::new("/nonexistent/file.csv").unwrap();
        assert_eq!(dc_dataset_load_csv(missing.as_ptr(), &mut ds), DcStatus::IoError);

        assert_eq!(dc_dataset_simulate(false, 10, 1.5, 0, &mut ds), DcStatus::InvalidArgument);

        let ds = simulate(true, 60, 3);
        let method = CString::new("deepcent").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(dc_model_train(ds, method.as_ptr(), ptr::null(), &mut model), DcStatus::DataError);
        assert!(last_error().contains("mode mismatch"), "{}", last_error());
        let bogus = CString::new("coxph").unwrap();
        assert_eq!(dc_model_train(ds, bogus.as_ptr(), ptr::null(), &mut model), DcStatus::InvalidArgument);
        assert!(model.is_null());

        let w = CString::new("cr-weibull").unwrap();
        assert_eq!(dc_model_train(ds, w.as_ptr(), ptr::null(), &mut model), DcStatus::Ok);
        let x = [0.0; 4];
        let mut out = [0.0; 2];
        assert_eq!(dc_model_predict(model, x.as_ptr(), 1, 4, out.as_mut_ptr()), DcStatus::DataError);
        dc_model_free(model);
        dc_dataset_free(ds);

        dc_dataset_free(ptr::null_mut());
        dc_model_free(ptr::null_mut());
        assert_eq!(dc_dataset_len(ptr::null()), 0);
    }
}

#[test]
fn harrell_c_through_abi() {
    let y = [1.0, 2.0, 3.0, 4.0];
    let d = [1u8, 1, 0, 1];
    let mut c = 0.0;
    let st = unsafe { dc_harrell_c(y.as_ptr(), d.as_ptr(), y.as_ptr(), 4, 1, &mut c) };
    assert_eq!(st, DcStatus::Ok);
    assert_eq!(c, 1.0);
    let rev = [4.0, 3.0, 2.0, 1.0];
    unsafe { dc_harrell_c(y.as_ptr(), d.as_ptr(), rev.as_ptr(), 4, 1, &mut c) };
    assert_eq!(c, 0.0);
    let none = [0u8; 4];
    let st = unsafe { dc_harrell_c(y.as_ptr(), none.as_ptr(), y.as_ptr(), 4, 1, &mut c) };
    assert_eq!(st, DcStatus::DataError);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(dc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compile a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("deepcent.h").exists());
    // target/<profile>/deps/<test-exe> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libdeepcent_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "deepcent.h"
int main(void) {
    DcDataset *ds = NULL;
    if (dc_dataset_simulate(false, 80, 0.2, 7, &ds) != DC_STATUS_OK) return 10;
    DcTrainOptions o = dc_train_options_default();
    o.epochs = 5;
    DcModel *m = NULL;
    if (dc_model_train(ds, "deepcent", &o, &m) != DC_STATUS_OK) return 11;
    size_t n = dc_dataset_len(ds), p = dc_dataset_n_covariates(ds);
    double x[80 * 5], out[80];
    if (p != 5 || n != 80) return 12;
    dc_dataset_covariates(ds, x);
    if (dc_model_predict(m, x, n, p, out) != DC_STATUS_OK) return 13;
    if (dc_model_train(ds, "nope", NULL, &m) != DC_STATUS_INVALID_ARGUMENT) return 14;
    printf("%s ok %.3f\n", dc_version(), out[0] > 0 ? 1.0 : 0.0);
    dc_model_free(m);
    dc_dataset_free(ds);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("prog");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok 1.000"));
}
