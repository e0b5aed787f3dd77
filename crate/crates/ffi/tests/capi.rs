use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ling_core::baselines::{ridge_exact, RidgeMode};
use ling_core::random::gaussian_matrix;
use ling_core::FlopLedger;
use ling_ffi::*;

fn design(n: usize, p: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let x = gaussian_matrix(n, p, seed);
    let truth: Vec<f64> = (0..p).map(|j| 1.0 / (1.0 + j as f64)).collect();
    let mut y = x.matvec(&truth).unwrap();
    for (i, v) in y.iter_mut().enumerate() {
        *v += 0.1 * ((i * 7919 % 13) as f64 - 6.0);
    }
    (x.into_vec(), y)
}

fn new_problem(x: &[f64], y: &[f64], p: usize) -> *mut LingProblem {
    let mut prob = ptr::null_mut();
    let st = unsafe { ling_problem_new(x.as_ptr(), y.len(), p, y.as_ptr(), &mut prob) };
    assert_eq!(st, LingStatus::Ok);
    assert!(!prob.is_null());
    prob
}

fn coefficients(fit: *const LingFit) -> Vec<f64> {
    let len = unsafe { ling_fit_num_coefficients(fit) };
    let mut out = vec![0.0; len];
    assert_eq!(unsafe { ling_fit_coefficients(fit, out.as_mut_ptr(), len) }, LingStatus::Ok);
    out
}

fn last_error() -> String {
    let msg = ling_last_error_message();
    assert!(!msg.is_null());
    unsafe { CStr::from_ptr(msg) }.to_string_lossy().into_owned()
}

#[test]
fn exact_fit_matches_library() {
    let (n, p, lambda) = (60, 12, 0.05);
    let (x, y) = design(n, p, 1);
    let prob = new_problem(&x, &y, p);
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_exact(prob, lambda, &mut fit) }, LingStatus::Ok);

    let xm = ling_core::Matrix::from_vec(n, p, x.clone()).unwrap();
    let want = ridge_exact(&xm, &y, lambda, RidgeMode::Auto, &mut FlopLedger::new()).unwrap();
    assert_eq!(coefficients(fit), want);
    assert!(unsafe { ling_fit_flops(fit) } > 0);
    let phase = CString::new("exact").unwrap();
    assert_eq!(unsafe { ling_fit_phase_flops(fit, phase.as_ptr()) }, unsafe { ling_fit_flops(fit) });

    let mut pred = vec![0.0; n];
    assert_eq!(unsafe { ling_fit_predict(fit, x.as_ptr(), n, p, pred.as_mut_ptr()) }, LingStatus::Ok);
    let direct = xm.matvec(&want).unwrap();
    assert_eq!(pred, direct);

    unsafe {
        ling_fit_free(fit);
        ling_problem_free(prob);
    }
}

fn relative_error(b: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = b.iter().zip(reference).map(|(a, r)| (a - r).powi(2)).sum();
    let den: f64 = reference.iter().map(|r| r * r).sum();
    (num / den).sqrt()
}

fn exact_reference(prob: *const LingProblem, lambda: f64) -> Vec<f64> {
    let mut exact = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_exact(prob, lambda, &mut exact) }, LingStatus::Ok);
    let b = coefficients(exact);
    unsafe { ling_fit_free(exact) };
    b
}

#[test]
fn iterative_solvers_approach_exact() {
    let (n, p, lambda) = (80, 20, 0.1);
    let (x, y) = design(n, p, 2);
    let prob = new_problem(&x, &y, p);
    let reference = exact_reference(prob, lambda);

    let mut gd = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_gd(prob, lambda, 400, &mut gd) }, LingStatus::Ok);
    assert!(relative_error(&coefficients(gd), &reference) < 1e-6);

    let mut pcr = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_pcr(prob, p, 2, 7, &mut pcr) }, LingStatus::Ok);
    assert_eq!(unsafe { ling_fit_num_coefficients(pcr) }, p);

    let mut svrg = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_svrg(prob, lambda, 30, 0.0, 3, &mut svrg) }, LingStatus::Ok);
    assert!(relative_error(&coefficients(svrg), &reference) < 1e-2);

    unsafe {
        for f in [gd, pcr, svrg] {
            ling_fit_free(f);
        }
        ling_problem_free(prob);
    }
}

#[test]
fn two_stage_fit_with_spectral_gap() {
    let (n, p, lambda) = (80, 20, 0.1);
    let (mut x, y) = design(n, p, 4);
    // A clear gap after five directions so the sketched basis is accurate.
    for row in x.chunks_mut(p) {
        row[..5].iter_mut().for_each(|v| *v *= 20.0);
    }
    let prob = new_problem(&x, &y, p);
    let reference = exact_reference(prob, lambda);

    let mut ling = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_ling(prob, lambda, 5, 200, 3, 7, 0, &mut ling) }, LingStatus::Ok);
    let err = relative_error(&coefficients(ling), &reference);
    assert!(err < 1e-3, "relative error {err:e}");
    let svd = CString::new("svd").unwrap();
    assert!(unsafe { ling_fit_phase_flops(ling, svd.as_ptr()) } > 0);

    unsafe {
        ling_fit_free(ling);
        ling_problem_free(prob);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut prob = ptr::null_mut();
    let st = unsafe { ling_problem_new(ptr::null(), 3, 2, ptr::null(), &mut prob) };
    assert_eq!(st, LingStatus::NullPointer);
    assert!(prob.is_null());
    assert!(last_error().contains("null"));

    let x = [1.0, f64::NAN];
    let y = [1.0];
    let st = unsafe { ling_problem_new(x.as_ptr(), 1, 2, y.as_ptr(), &mut prob) };
    assert_eq!(st, LingStatus::InvalidArgument);

    let (x, y) = design(10, 4, 3);
    let prob = new_problem(&x, &y, 4);
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { ling_fit_exact(prob, -1.0, &mut fit) }, LingStatus::InvalidArgument);
    assert!(fit.is_null());
    assert!(last_error().contains("lambda"));

    assert_eq!(unsafe { ling_fit_svrg(prob, 0.1, 5, 10.0, 0, &mut fit) }, LingStatus::Diverged);

    assert_eq!(unsafe { ling_fit_exact(prob, 0.1, &mut fit) }, LingStatus::Ok);
    let mut small = [0.0; 2];
    assert_eq!(unsafe { ling_fit_coefficients(fit, small.as_mut_ptr(), 2) }, LingStatus::ShapeMismatch);
    let mut pred = [0.0; 1];
    let row = [1.0, 2.0, 3.0];
    assert_eq!(
        unsafe { ling_fit_predict(fit, row.as_ptr(), 1, 3, pred.as_mut_ptr()) },
        LingStatus::ShapeMismatch
    );
    assert_eq!(unsafe { ling_fit_exact(ptr::null(), 0.1, &mut fit) }, LingStatus::NullPointer);

    unsafe {
        ling_fit_free(fit);
        ling_problem_free(prob);
        ling_fit_free(ptr::null_mut());
        ling_problem_free(ptr::null_mut());
        assert_eq!(ling_fit_flops(ptr::null()), 0);
        assert_eq!(ling_fit_num_coefficients(ptr::null()), 0);
    }
}

#[test]
fn risk_entry_point() {
    let d = [10.0, 5.0, 1.0, 0.5];
    let alpha = [0.3, -0.2, 0.1, 0.4];
    let (sigma, n, lambda) = (1.0, 50, 0.02);
    let (mut ling, mut ridge) = (0.0, 0.0);
    let st = unsafe { ling_ridge_risk(d.as_ptr(), alpha.as_ptr(), 4, sigma, n, lambda, 2, &mut ling, &mut ridge) };
    assert_eq!(st, LingStatus::Ok);

    // Per-direction ridge risk, written out independently.
    let nl = n as f64 * lambda;
    let want: f64 = d
        .iter()
        .zip(&alpha)
        .map(|(d, a)| {
            let d2 = d * d;
            (d2 * d2 * sigma * sigma + nl * nl * d2 * a * a) / (d2 + nl).powi(2)
        })
        .sum::<f64>()
        / n as f64;
    assert!((ridge - want).abs() <= 1e-12 * want);
    assert!((ling - ridge).abs() <= 1e-12 * want);

    let st = unsafe { ling_ridge_risk(d.as_ptr(), alpha.as_ptr(), 4, sigma, n, lambda, 9, &mut ling, &mut ridge) };
    assert_ne!(st, LingStatus::Ok);
}

#[test]
fn header_declares_every_entry_point() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/ling.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "ling_last_error_message",
        "ling_problem_new",
        "ling_problem_free",
        "ling_fit_exact",
        "ling_fit_gd",
        "ling_fit_pcr",
        "ling_fit_ling",
        "ling_fit_svrg",
        "ling_fit_num_coefficients",
        "ling_fit_coefficients",
        "ling_fit_flops",
        "ling_fit_phase_flops",
        "ling_fit_predict",
        "ling_fit_free",
        "ling_ridge_risk",
        "LING_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a small C program against the header and static
/// library when a C compiler is on the path.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libling_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ling.h"

int main(void) {
    double x[6] = {1, 0, 0, 1, 1, 1};
    double y[3] = {1, 2, 3};
    LingProblem *prob = NULL;
    LingFit *fit = NULL;
    if (ling_problem_new(x, 3, 2, y, &prob) != LING_STATUS_OK) return 1;
    if (ling_fit_exact(prob, 0.0, &fit) != LING_STATUS_OK) return 2;
    double beta[2];
    if (ling_fit_coefficients(fit, beta, 2) != LING_STATUS_OK) return 3;
    printf("%.12f %.12f\n", beta[0], beta[1]);
    if (ling_fit_exact(prob, -1.0, &fit) == LING_STATUS_OK) return 4;
    if (ling_last_error_message() == NULL) return 5;
    ling_fit_free(fit);
    ling_problem_free(prob);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    // Least squares on rows (1,0), (0,1), (1,1) with targets 1, 2, 3.
    let line = String::from_utf8(out.stdout).unwrap();
    let beta: Vec<f64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert!((beta[0] - 1.0).abs() < 1e-9 && (beta[1] - 2.0).abs() < 1e-9, "{line}");
}
