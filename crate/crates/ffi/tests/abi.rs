use std::ffi::CStr;
use std::ptr;

use csdl_ffi::*;

fn last_error() -> String {
    let p = csdl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn planted_signal() -> Vec<f64> {
    let mut y = vec![0.0; 60];
    for start in [3, 20, 41] {
        for (j, v) in [0.6, 0.8].iter().enumerate() {
            y[start + j] += v;
        }
    }
    y
}

#[test]
fn solve_and_copy_out() {
    let y = planted_signal();
    let mut opts = csdl_solver_options_default();
    opts.lambda = 3.0;
    opts.iterations = 50;
    opts.seed = 7;
    let mut fit: *mut CsdlFit = ptr::null_mut();
    let status = unsafe { csdl_solve(y.as_ptr(), y.len(), 4, 2, &opts, &mut fit) };
    assert_eq!(status, CsdlStatus::Ok);
    assert!(csdl_last_error_message().is_null());

    unsafe {
        assert_eq!(csdl_fit_signal_length(fit), 60);
        assert_eq!(csdl_fit_encoding_rows(fit), 57);
        assert_eq!(csdl_fit_atom_length(fit), 4);
        assert_eq!(csdl_fit_atoms(fit), 2);
        assert_eq!(csdl_fit_iterations(fit), 50);

        let mut xhat = vec![0.0; 60];
        assert_eq!(csdl_fit_copy_reconstruction(fit, xhat.as_mut_ptr(), xhat.len()), CsdlStatus::Ok);
        let mut r = vec![0.0; 57 * 2];
        assert_eq!(csdl_fit_copy_encoding(fit, r.as_mut_ptr(), r.len()), CsdlStatus::Ok);
        let mut d = vec![0.0; 8];
        assert_eq!(csdl_fit_copy_dictionary(fit, d.as_mut_ptr(), d.len()), CsdlStatus::Ok);
        let mut trace = vec![0.0; 50];
        assert_eq!(csdl_fit_copy_objective_trace(fit, trace.as_mut_ptr(), trace.len()), CsdlStatus::Ok);
        assert_eq!(*trace.last().unwrap(), csdl_fit_final_objective(fit));

        assert!(r.iter().all(|v| *v >= 0.0) && r.iter().sum::<f64>() <= 3.0 + 1e-10);
        for col in d.chunks(4) {
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }

        // The reconstruction is the multi-convolution of the copied factors.
        let mut again = vec![0.0; 60];
        let status = csdl_multi_convolve(r.as_ptr(), 57, d.as_ptr(), 4, 2, again.as_mut_ptr(), 60);
        assert_eq!(status, CsdlStatus::Ok);
        for (a, b) in again.iter().zip(&xhat) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut small = vec![0.0; 10];
        let status = csdl_fit_copy_reconstruction(fit, small.as_mut_ptr(), small.len());
        assert_eq!(status, CsdlStatus::BufferTooSmall);
        assert!(last_error().contains("60"));

        csdl_fit_free(fit);
        csdl_fit_free(ptr::null_mut());
    }
}

#[test]
fn solve_reports_errors() {
    let y = [1.0, 2.0];
    let opts = csdl_solver_options_default();
    let mut fit: *mut CsdlFit = ptr::null_mut();
    let status = unsafe { csdl_solve(y.as_ptr(), y.len(), 5, 1, &opts, &mut fit) };
    assert_eq!(status, CsdlStatus::Dimension);
    assert!(fit.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { csdl_solve(ptr::null(), 4, 2, 1, &opts, &mut fit) };
    assert_eq!(status, CsdlStatus::NullPointer);
    let status = unsafe { csdl_solve(y.as_ptr(), 2, 1, 1, ptr::null(), &mut fit) };
    assert_eq!(status, CsdlStatus::NullPointer);

    let bad = [1.0, f64::NAN, 0.0];
    let status = unsafe { csdl_solve(bad.as_ptr(), 3, 1, 1, &opts, &mut fit) };
    assert_eq!(status, CsdlStatus::InvalidInput);

    let mut neg = opts;
    neg.lambda = -1.0;
    let status = unsafe { csdl_solve(y.as_ptr(), 2, 1, 1, &neg, &mut fit) };
    assert_eq!(status, CsdlStatus::InvalidParameter);

    unsafe {
        assert_eq!(csdl_fit_signal_length(ptr::null()), 0);
        assert!(csdl_fit_final_objective(ptr::null()).is_nan());
        let mut out = [0.0];
        assert_eq!(csdl_fit_copy_reconstruction(ptr::null(), out.as_mut_ptr(), 1), CsdlStatus::NullPointer);
    }
}

#[test]
fn penalized_solve_with_huge_weight_is_zero() {
    let y = planted_signal();
    let mut opts = csdl_solver_options_default();
    opts.mode = CsdlMode::Penalized;
    opts.lambda_prime = 1e12;
    opts.iterations = 5;
    let mut fit: *mut CsdlFit = ptr::null_mut();
    unsafe {
        assert_eq!(csdl_solve(y.as_ptr(), y.len(), 4, 2, &opts, &mut fit), CsdlStatus::Ok);
        let mut xhat = vec![1.0; 60];
        csdl_fit_copy_reconstruction(fit, xhat.as_mut_ptr(), 60);
        assert!(xhat.iter().all(|v| *v == 0.0));
        csdl_fit_free(fit);
    }
}

#[test]
fn bounds_match_reference_values() {
    let mut b = CsdlBoundSet::default();
    assert_eq!(unsafe { csdl_bounds(1000, 10, 100.0, 0.1, &mut b) }, CsdlStatus::Ok);
    assert!((b.ub_componentwise - 0.49318239902225486).abs() < 1e-12);
    assert!((b.ub_joint - 0.1558651901087853).abs() < 1e-12);
    assert!((b.lb_componentwise - 0.010382312584338138).abs() < 1e-12);
    assert!((b.lb_joint - 0.0032831755146337533).abs() < 1e-12);
    assert_eq!(unsafe { csdl_bounds(5, 10, 1.0, 0.1, &mut b) }, CsdlStatus::InvalidParameter);
    assert_eq!(unsafe { csdl_bounds(50, 10, 1.0, 0.1, ptr::null_mut()) }, CsdlStatus::NullPointer);

    let mut lp = 0.0;
    assert_eq!(unsafe { csdl_recommended_lambda_prime(0.1, 1000, 0.05, &mut lp) }, CsdlStatus::Ok);
    assert!((lp - 0.460361482600273).abs() < 1e-12);
    assert_eq!(unsafe { csdl_recommended_lambda_prime(0.1, 1000, 1.5, &mut lp) }, CsdlStatus::InvalidParameter);

    let mut ub = 0.0;
    assert_eq!(unsafe { csdl_ub_penalized(1000, 10, 0.1, 0.05, lp, &mut ub) }, CsdlStatus::Ok);
    assert!((ub - 0.0026807601031547225).abs() < 1e-12);
}

#[test]
fn projection_in_place() {
    // Column-major 2x2: columns [2, 1] and [0, -3].
    let mut r = [2.0, 1.0, 0.0, -3.0];
    assert_eq!(unsafe { csdl_project_nonneg_l11_ball(r.as_mut_ptr(), 2, 2, 1.0) }, CsdlStatus::Ok);
    assert_eq!(r, [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(unsafe { csdl_project_nonneg_l11_ball(r.as_mut_ptr(), 2, 2, -1.0) }, CsdlStatus::InvalidParameter);
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(csdl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/csdl.h")).unwrap();
    for name in [
        "typedef struct CsdlFit CsdlFit;",
        "CSDL_STATUS_BUFFER_TOO_SMALL = 6",
        "csdl_solve(",
        "csdl_fit_free(",
        "csdl_fit_copy_encoding(",
        "csdl_bounds(",
        "csdl_project_nonneg_l11_ball(",
        "csdl_last_error_message(",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
