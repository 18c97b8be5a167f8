//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! status codes and manual handle management.

use std::ffi::{CStr, CString};
use std::ptr;

use penbary_ffi::*;

fn create_simple_problem() -> *mut PenbaryProblem {
    // Two 2x2 SPD matrices, equal weights, Gaussian family with a penalty.
    let weights = [0.5f64, 0.5];
    #[rustfmt::skip]
    let matrices = [
        2.0, 0.3,
        0.3, 1.0,
        1.5, -0.2,
        -0.2, 0.8,
    ];
    let mut handle: *mut PenbaryProblem = ptr::null_mut();
    let status = unsafe {
        penbary_problem_create(
            PenbaryFamily::Gaussian,
            0.0,
            0.1,
            2,
            2,
            weights.as_ptr(),
            matrices.as_ptr(),
            &mut handle,
        )
    };
    assert_eq!(status, PenbaryStatus::Ok);
    assert!(!handle.is_null());
    handle
}

#[test]
fn create_solve_inspect_free() {
    let problem = create_simple_problem();
    unsafe {
        assert_eq!(penbary_problem_dim(problem), 2);
        assert_eq!(penbary_problem_count(problem), 2);

        let opts = penbary_solver_options_default();
        let mut report: *mut PenbaryReport = ptr::null_mut();
        assert_eq!(
            penbary_solve(problem, &opts, &mut report),
            PenbaryStatus::Ok
        );
        assert!(!report.is_null());

        assert!(penbary_report_converged(report));
        assert!(penbary_report_residual(report) < 1e-6);
        assert_eq!(penbary_report_dim(report), 2);
        assert!(penbary_report_iterations(report) > 0);

        let mut x = [0.0f64; 4];
        assert_eq!(
            penbary_report_solution(report, x.as_mut_ptr(), 4),
            PenbaryStatus::Ok
        );
        // Symmetric output with positive diagonal.
        assert!((x[1] - x[2]).abs() < 1e-14);
        assert!(x[0] > 0.0 && x[3] > 0.0);

        let trace_len = penbary_report_trace_len(report);
        assert!(trace_len > 0);
        let mut trace = vec![0.0f64; trace_len];
        assert_eq!(
            penbary_report_direction_norms(report, trace.as_mut_ptr(), trace_len),
            PenbaryStatus::Ok
        );
        assert!(*trace.last().unwrap() <= 1e-8);

        penbary_report_free(report);
        penbary_problem_free(problem);
    }
}

#[test]
fn solve_accepts_null_options() {
    let problem = create_simple_problem();
    unsafe {
        let mut report: *mut PenbaryReport = ptr::null_mut();
        assert_eq!(
            penbary_solve(problem, ptr::null(), &mut report),
            PenbaryStatus::Ok
        );
        assert!(penbary_report_converged(report));
        penbary_report_free(report);
        penbary_problem_free(problem);
    }
}

#[test]
fn fixed_point_solver_through_ffi() {
    let problem = create_simple_problem();
    unsafe {
        let mut opts = penbary_solver_options_default();
        opts.kind = PenbarySolverKind::FixedPoint;
        let mut report: *mut PenbaryReport = ptr::null_mut();
        assert_eq!(
            penbary_solve(problem, &opts, &mut report),
            PenbaryStatus::Ok
        );
        assert!(penbary_report_converged(report));
        assert!(penbary_report_residual(report) < 1e-6);
        penbary_report_free(report);
        penbary_problem_free(problem);
    }
}

#[test]
fn json_round_trip() {
    let json = CString::new(
        r#"{
            "family": "q-gaussian",
            "q": 0.5,
            "gamma": 0.05,
            "weights": [0.5, 0.5],
            "matrices": [[2.0, 0.0, 0.0, 1.0], [1.0, 0.2, 0.2, 3.0]]
        }"#,
    )
    .unwrap();
    unsafe {
        let mut problem: *mut PenbaryProblem = ptr::null_mut();
        assert_eq!(
            penbary_problem_from_json(json.as_ptr(), &mut problem),
            PenbaryStatus::Ok
        );
        assert_eq!(penbary_problem_dim(problem), 2);

        let mut report: *mut PenbaryReport = ptr::null_mut();
        assert_eq!(
            penbary_solve(problem, ptr::null(), &mut report),
            PenbaryStatus::Ok
        );

        let s = penbary_report_to_json(report);
        assert!(!s.is_null());
        let text = CStr::from_ptr(s).to_str().unwrap().to_string();
        assert!(text.contains("\"residual\""));
        assert!(text.contains("\"converged\": true"));
        penbary_string_free(s);

        penbary_report_free(report);
        penbary_problem_free(problem);
    }
}

#[test]
fn error_paths_set_messages() {
    unsafe {
        // Null output slot.
        let weights = [1.0f64];
        let mats = [1.0f64];
        assert_eq!(
            penbary_problem_create(
                PenbaryFamily::Gaussian,
                0.0,
                0.0,
                1,
                1,
                weights.as_ptr(),
                mats.as_ptr(),
                ptr::null_mut(),
            ),
            PenbaryStatus::NullPointer
        );

        // Weights that do not sum to one.
        let bad_weights = [0.3f64, 0.3];
        let two = [1.0f64, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 2.0];
        let mut handle: *mut PenbaryProblem = ptr::null_mut();
        let status = penbary_problem_create(
            PenbaryFamily::Gaussian,
            0.0,
            0.0,
            2,
            2,
            bad_weights.as_ptr(),
            two.as_ptr(),
            &mut handle,
        );
        assert_eq!(status, PenbaryStatus::InvalidInput);
        let msg = CStr::from_ptr(penbary_last_error_message())
            .to_str()
            .unwrap();
        assert!(msg.contains("weights"), "unexpected message: {msg}");

        // Inadmissible q.
        let w = [1.0f64];
        let m = [1.0f64, 0.0, 0.0, 1.0];
        let status = penbary_problem_create(
            PenbaryFamily::QGaussian,
            3.0,
            0.0,
            2,
            1,
            w.as_ptr(),
            m.as_ptr(),
            &mut handle,
        );
        assert_eq!(status, PenbaryStatus::DomainError);

        // Indefinite input matrix.
        let neg = [1.0f64, 0.0, 0.0, -2.0];
        let status = penbary_problem_create(
            PenbaryFamily::Gaussian,
            0.0,
            0.0,
            2,
            1,
            w.as_ptr(),
            neg.as_ptr(),
            &mut handle,
        );
        assert_eq!(status, PenbaryStatus::InvalidInput);

        // Malformed JSON.
        let garbage = CString::new("{oops").unwrap();
        let mut p: *mut PenbaryProblem = ptr::null_mut();
        assert_eq!(
            penbary_problem_from_json(garbage.as_ptr(), &mut p),
            PenbaryStatus::InvalidInput
        );

        // Undersized output buffer.
        let problem = create_simple_problem();
        let mut report: *mut PenbaryReport = ptr::null_mut();
        assert_eq!(
            penbary_solve(problem, ptr::null(), &mut report),
            PenbaryStatus::Ok
        );
        let mut small = [0.0f64; 2];
        assert_eq!(
            penbary_report_solution(report, small.as_mut_ptr(), 2),
            PenbaryStatus::BufferTooSmall
        );
        penbary_report_free(report);
        penbary_problem_free(problem);

        // Null handles are tolerated by accessors and frees.
        assert_eq!(penbary_problem_dim(ptr::null()), 0);
        assert_eq!(penbary_report_dim(ptr::null()), 0);
        assert!(penbary_report_residual(ptr::null()).is_nan());
        penbary_problem_free(ptr::null_mut());
        penbary_report_free(ptr::null_mut());
        penbary_string_free(ptr::null_mut());
    }
}

#[test]
fn default_options_match_documented_values() {
    let opts = penbary_solver_options_default();
    assert_eq!(opts.kind, PenbarySolverKind::GpmArmijo);
    assert_eq!(opts.tol, 1e-8);
    assert_eq!(opts.max_iter, 100_000);
    assert_eq!(opts.xi, 0.5);
    assert_eq!(opts.sigma, 0.1);
    assert_eq!(opts.alpha_hat, 1e-5);
    assert_eq!(opts.beta_hat, 1e5);
}
