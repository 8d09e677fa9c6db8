use std::ffi::{CStr, CString};
use std::ptr;

use cda_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cda_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn heat_case_round_trip() {
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(cda_heat_case_new(8, &mut case), CdaStatus::Ok);
        assert_eq!(cda_heat_case_set_time(case, 0.005, 0.2), CdaStatus::Ok);
        assert_eq!(cda_heat_case_set_nudging(case, f64::INFINITY, CdaNudging::Galerkin, 0.25), CdaStatus::Ok);
        let mut series = ptr::null_mut();
        assert_eq!(cda_heat_run(case, &mut series), CdaStatus::Ok, "{}", last_error());
        let mut len = 0;
        assert_eq!(cda_series_len(series, &mut len), CdaStatus::Ok);
        assert_eq!(len, 41);
        let (mut first, mut last) = (CdaRecord::default(), CdaRecord::default());
        assert_eq!(cda_series_get(series, 0, &mut first), CdaStatus::Ok);
        assert_eq!(cda_series_get(series, len - 1, &mut last), CdaStatus::Ok);
        assert!(last.l2_error < 0.1 * first.l2_error);
        assert!((last.time - 0.2).abs() < 1e-12);
        assert_eq!(cda_series_get(series, len, &mut last), CdaStatus::OutOfRange);
        assert!(last_error().contains("41"));
        let mut fit = CdaDecayFit::default();
        assert_eq!(cda_series_decay(series, &mut fit), CdaStatus::Ok, "{}", last_error());
        assert!(fit.log_slope < 0.0);
        cda_series_free(series);
        cda_heat_case_free(case);
    }
}

#[test]
fn invalid_nudging_is_rejected() {
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(cda_heat_case_new(8, &mut case), CdaStatus::Ok);
        assert_eq!(cda_heat_case_set_nudging(case, -1.0, CdaNudging::Lumped, 0.25), CdaStatus::InvalidInput);
        assert_eq!(cda_heat_case_set_nudging(case, 1.0, CdaNudging::Lumped, 0.3), CdaStatus::Ok);
        let mut series = ptr::null_mut();
        // 0.3 does not tile the unit square
        assert_ne!(cda_heat_run(case, &mut series), CdaStatus::Ok);
        assert!(series.is_null());
        assert!(!last_error().is_empty());
        cda_heat_case_free(case);
        assert_eq!(cda_heat_case_new(0, &mut case), CdaStatus::InvalidInput);
    }
}

#[test]
fn config_run_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("heat.toml");
    std::fs::write(
        &cfg_path,
        "problem = \"heat\"\n[physics]\nkappa = 1.0\n[mesh]\nresolutions = [4, 8]\n\
         [time]\ndt = [0.01]\nt_final = 0.05\n[cda]\nmu = [inf]\ncoarse_width = [0.25]\n",
    )
    .unwrap();
    let path = CString::new(cfg_path.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(cda_config_load(path.as_ptr(), &mut cfg), CdaStatus::Ok, "{}", last_error());
        assert_eq!(cda_config_set_output(cfg, out.as_ptr()), CdaStatus::Ok);
        let mut manifest = ptr::null_mut();
        assert_eq!(cda_config_run(cfg, &mut manifest), CdaStatus::Ok, "{}", last_error());
        let mut n = 0;
        assert_eq!(cda_manifest_run_count(manifest, &mut n), CdaStatus::Ok);
        assert_eq!(n, 2);
        let (mut l2, mut h1) = (0.0, 0.0);
        assert_eq!(cda_manifest_run_errors(manifest, 1, &mut l2, &mut h1), CdaStatus::Ok);
        assert!(l2 > 0.0 && h1 > l2);
        assert_eq!(cda_manifest_run_errors(manifest, 2, &mut l2, &mut h1), CdaStatus::OutOfRange);
        cda_manifest_free(manifest);
        cda_config_free(cfg);
    }
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn missing_config_is_an_io_error() {
    let path = CString::new("/nonexistent/cda.toml").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { cda_config_load(path.as_ptr(), &mut cfg) }, CdaStatus::Io);
    assert!(last_error().contains("/nonexistent/cda.toml"));
}

#[test]
fn properties_hold_through_the_c_interface() {
    let (mut passed, mut total) = (0, 0);
    assert_eq!(unsafe { cda_verify_properties(11, &mut passed, &mut total) }, CdaStatus::Ok);
    assert!(total > 0);
    assert_eq!(passed, total);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cda.h")).unwrap();
    for name in [
        "cda_last_error",
        "cda_heat_case_new",
        "cda_heat_run",
        "cda_series_get",
        "cda_config_run",
        "cda_convergence_rates",
        "CDA_STATUS_NUMERICAL",
        "typedef struct CdaSeries CdaSeries",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"cda.h\"\nint main(void) {\n  CdaHeatCase *c = 0;\n  CdaStatus s = cda_heat_case_new(8, &c);\n  \
         cda_heat_case_free(c);\n  return s == CDA_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
