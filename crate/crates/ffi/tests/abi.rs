use std::ffi::{c_char, c_int, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use morrey_lab_ffi::*;

const POWER_CONFIG: &str = r#"
kind = "weight-check"
seed = 1

[weight-check]
n = 2
p = 2.0
weight = { family = "power", beta = 1.0 }
"#;

fn last_error() -> Option<String> {
    let p = ml_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    ml_string_free(p);
    s
}

fn run(toml: &str, seed: Option<u64>) -> (MlStatus, *mut MlReport) {
    let c = CString::new(toml).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { ml_run_config(c.as_ptr(), c_int::from(seed.is_some()), seed.unwrap_or(0), &mut out) };
    (status, out)
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(ml_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn runs_a_config_and_reads_its_checks() {
    let (status, report) = run(POWER_CONFIG, None);
    assert_eq!(status, MlStatus::Ok, "{:?}", last_error());
    assert!(last_error().is_none());
    unsafe {
        let mut passed = -1;
        assert_eq!(ml_report_passed(report, &mut passed), MlStatus::Ok);
        assert_eq!(passed, 1);
        let mut count = 0usize;
        assert_eq!(ml_report_check_count(report, &mut count), MlStatus::Ok);
        assert!(count >= 2);
        for i in 0..count {
            let mut name = ptr::null_mut();
            let mut ok = -1;
            assert_eq!(ml_report_check(report, i, &mut name, &mut ok), MlStatus::Ok);
            assert!(!take_string(name).is_empty());
            assert_eq!(ok, 1);
        }
        let mut name = ptr::null_mut();
        let mut ok = 0;
        assert_eq!(ml_report_check(report, count, &mut name, &mut ok), MlStatus::InvalidArgument);
        assert!(last_error().unwrap().contains("out of range"));

        let mut json = ptr::null_mut();
        assert_eq!(ml_report_json(report, 1, &mut json), MlStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(v["kind"], "weight-check");
        assert_eq!(v["wall_clock_seconds"], 0.0);
        ml_report_free(report);
    }
}

#[test]
fn same_seed_gives_the_same_canonical_report() {
    let json = |seed| unsafe {
        let (status, report) = run(POWER_CONFIG, Some(seed));
        assert_eq!(status, MlStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(ml_report_json(report, 1, &mut out), MlStatus::Ok);
        ml_report_free(report);
        take_string(out)
    };
    assert_eq!(json(7), json(7));
    let v: serde_json::Value = serde_json::from_str(&json(7)).unwrap();
    assert_eq!(v["seed"], 7);
}

#[test]
fn config_errors_map_to_the_config_code() {
    let (status, report) = run("kind = \"weight-check\"\nbogus = 1\n", None);
    assert_eq!(status, MlStatus::Config);
    assert!(report.is_null());
    assert!(last_error().unwrap().contains("bogus"));

    let empty = r#"
kind = "operator-bound"
[operator-bound]
operator = "singular"
kernel = { family = "heat", n = 1 }
levels = [0.1]
battery = { centre = [0.0, 0.0], radius = 0.5, only = [] }
window = { lo = [-0.75, -0.25], hi = [0.75, 0.375] }
"#;
    let (status, _) = run(empty, None);
    assert_eq!(status, MlStatus::Config, "{:?}", last_error());
    assert!(last_error().unwrap().contains("empty battery"));
}

#[test]
fn null_pointers_are_rejected_not_dereferenced() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(ml_run_config(ptr::null(), 0, 0, &mut out), MlStatus::NullPointer);
        assert!(last_error().unwrap().contains("config_toml"));
        let c = CString::new(POWER_CONFIG).unwrap();
        assert_eq!(ml_run_config(c.as_ptr(), 0, 0, ptr::null_mut()), MlStatus::NullPointer);
        let mut passed = 0;
        assert_eq!(ml_report_passed(ptr::null(), &mut passed), MlStatus::NullPointer);
        assert_eq!(ml_catalog(ptr::null_mut()), MlStatus::NullPointer);
        let (mut r, mut v) = (0.0, 0.0);
        assert_eq!(ml_metrics(ptr::null(), 3, &mut r, &mut v), MlStatus::NullPointer);
        ml_report_free(ptr::null_mut());
        ml_weight_free(ptr::null_mut());
        ml_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let bytes: [u8; 4] = [0x6b, 0xff, 0xfe, 0];
    let mut out = ptr::null_mut();
    let status = unsafe { ml_run_config(bytes.as_ptr().cast(), 0, 0, &mut out) };
    assert_eq!(status, MlStatus::InvalidUtf8);
}

#[test]
fn success_clears_the_last_error() {
    let (status, _) = run("nonsense", None);
    assert_ne!(status, MlStatus::Ok);
    assert!(last_error().is_some());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ml_catalog(&mut out) }, MlStatus::Ok);
    assert!(last_error().is_none());
    assert!(unsafe { take_string(out) }.contains("identity-sine"));
}

#[test]
fn power_weight_constants_through_the_abi() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(ml_weight_power(2, 2.0, 1.0, &mut w), MlStatus::Ok);
        let (mut c, mut div) = (0.0, -1);
        assert_eq!(ml_weight_check(w, MlCondition::A, &mut c, &mut div), MlStatus::Ok);
        assert_eq!(div, 0);
        assert!((c - 1.0).abs() < 1e-3, "C_A = {c}");
        assert_eq!(ml_weight_check(w, MlCondition::B, &mut c, &mut div), MlStatus::Ok);
        assert!((c - 2.0).abs() < 1e-3, "C_B = {c}");

        let x = [0.3f64, -0.2, 0.1];
        let mut v = 0.0;
        assert_eq!(ml_weight_eval(w, x.as_ptr(), 3, 0.25, &mut v), MlStatus::Ok);
        assert!((v - 0.25f64.powf(-1.0)).abs() < 1e-12);
        assert_eq!(ml_weight_eval(w, x.as_ptr(), 2, 0.25, &mut v), MlStatus::InvalidArgument);
        ml_weight_free(w);

        let mut crit = ptr::null_mut();
        assert_eq!(ml_weight_power(2, 2.0, 2.0, &mut crit), MlStatus::Ok);
        assert_eq!(ml_weight_check(crit, MlCondition::A, &mut c, &mut div), MlStatus::Ok);
        assert_eq!(div, 1);
        assert!(c.is_infinite());
        ml_weight_free(crit);
    }
}

#[test]
fn expression_weights_and_bad_expressions() {
    unsafe {
        let src = CString::new("r^(-1)").unwrap();
        let mut w = ptr::null_mut();
        assert_eq!(ml_weight_expression(2, 2.0, src.as_ptr(), &mut w), MlStatus::Ok);
        let x = [0.0f64; 3];
        let mut v = 0.0;
        assert_eq!(ml_weight_eval(w, x.as_ptr(), 3, 0.5, &mut v), MlStatus::Ok);
        assert_eq!(v, 2.0);
        ml_weight_free(w);

        let bad = CString::new("r^(").unwrap();
        let mut w = ptr::null_mut();
        assert_ne!(ml_weight_expression(2, 2.0, bad.as_ptr(), &mut w), MlStatus::Ok);
        assert!(last_error().is_some());
    }
}

#[test]
fn metrics_of_a_point() {
    let x = [3.0f64, 0.0, 0.0];
    let (mut r, mut v) = (0.0, 0.0);
    assert_eq!(unsafe { ml_metrics(x.as_ptr(), 3, &mut r, &mut v) }, MlStatus::Ok);
    assert!((r - 3.0).abs() < 1e-12);
    assert!((v - 3.0).abs() < 1e-12);
    let t = [0.0f64, 0.0, 4.0];
    assert_eq!(unsafe { ml_metrics(t.as_ptr(), 3, &mut r, &mut v) }, MlStatus::Ok);
    assert!((r - 2.0).abs() < 1e-12);
    assert!((v - 2.0).abs() < 1e-12);
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/morrey_lab.h")
}

fn c_compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| cc)
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(header()).unwrap();
    for f in [
        "ml_version", "ml_last_error", "ml_string_free", "ml_catalog", "ml_run_config", "ml_report_passed",
        "ml_report_check_count", "ml_report_check", "ml_report_json", "ml_report_free", "ml_weight_power",
        "ml_weight_expression", "ml_weight_eval", "ml_weight_check", "ml_weight_free", "ml_metrics",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("ML_STATUS_BUDGET_EXCEEDED = 5"));
    assert!(h.contains("typedef struct MlReport MlReport;"));
}

const C_PROGRAM: &str = r#"
#include "morrey_lab.h"
#include <stdio.h>
#include <string.h>

int main(void) {
    const char *cfg = "kind = \"weight-check\"\n[weight-check]\nn = 1\np = 2.0\n"
                      "weight = { family = \"power\", beta = 0.5 }\n";
    MlReport *report = NULL;
    if (ml_run_config(cfg, 0, 0, &report) != ML_STATUS_OK) {
        fprintf(stderr, "%s\n", ml_last_error());
        return 2;
    }
    int passed = 0;
    ml_report_passed(report, &passed);
    ml_report_free(report);
    double x[2] = {0.0, 4.0}, rho = 0.0, varrho = 0.0;
    if (ml_metrics(x, 2, &rho, &varrho) != ML_STATUS_OK) return 3;
    if (ml_run_config(NULL, 0, 0, &report) != ML_STATUS_NULL_POINTER) return 4;
    printf("passed=%d rho=%.6f\n", passed, rho);
    return passed ? 0 : 1;
}
"#;

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cpp = dir.path().join("main.cpp");
    std::fs::write(&cpp, "#include \"morrey_lab.h\"\nint main() { return ml_version() ? 0 : 1; }\n").unwrap();
    if let Ok(out) = Command::new("c++").arg("-fsyntax-only").arg("-I").arg(&include).arg(&cpp).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

/// Links the C program against the static library built next to this test binary.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libmorrey_lab_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let out = Command::new(&cc)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("passed=1 rho=2.000000"), "{stdout}");
}
