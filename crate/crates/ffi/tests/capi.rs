use std::ffi::{c_void, CStr};
use std::path::Path;
use std::process::Command;
use std::ptr;

use varexp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(varexp_last_error()) }.to_string_lossy().into_owned()
}

fn model(d: usize, sx2: f64, sy2: f64) -> *mut VarexpModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { varexp_model_new(d, sx2, sy2, &mut m) }, VarexpStatus::Ok);
    m
}

fn estimator(name: &CStr) -> *mut VarexpEstimator {
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { varexp_estimator_parse(name.as_ptr(), &mut e) }, VarexpStatus::Ok, "{}", last_error());
    e
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(varexp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn closed_forms_match_the_library() {
    let m = model(3, 1.0, 1.0);
    let mut v = 0.0;
    unsafe {
        assert_eq!(varexp_risk_identity(m, 1.0, 0.0, &mut v), VarexpStatus::Ok);
        let lib = varexp::risk_identity(&varexp::Model::new(3, 1.0, 1.0).unwrap(), 1.0, varexp::AlphaLoss::hellinger()).unwrap();
        assert_eq!(v, lib);

        let th = [1.0, 0.0, 0.0];
        let t = [0.0, 0.0, 0.0];
        assert_eq!(varexp_loss(m, th.as_ptr(), t.as_ptr(), 1.0, 0.0, &mut v), VarexpStatus::Ok);
        // 4(1 − exp(−1/8)) for d = 3, c = 1, α = 0.
        assert!((v - 4.0 * (1.0 - (-0.125f64).exp())).abs() < 1e-14);

        assert_eq!(varexp_loss(m, th.as_ptr(), t.as_ptr(), 1.0, -1.0, &mut v), VarexpStatus::Ok);
        assert!((v - 0.5).abs() < 1e-14);

        assert_eq!(varexp_h_alpha(1.0, 0.5, &mut v), VarexpStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(varexp_h_alpha(0.0, 0.5, &mut v), VarexpStatus::Domain);
        varexp_model_free(m);
    }
}

#[test]
fn cutoffs_report_method_and_bracket() {
    let mut out = std::mem::MaybeUninit::<VarexpCutoff>::uninit();
    unsafe {
        assert_eq!(varexp_cutoff_truncated(1.0, 0.0, out.as_mut_ptr()), VarexpStatus::Ok);
        let c = out.assume_init();
        assert_eq!(c.method, VarexpCutoffKind::Truncated);
        assert!(c.c_star > 1.0 && (c.c2_star - c.c_star * c.c_star).abs() < 1e-12);
        assert!(c.bracket_lo <= c.bracket_hi);

        assert_eq!(varexp_cutoff_affine(0.75, 1.0, 0.0, out.as_mut_ptr()), VarexpStatus::Ok);
        assert_eq!(out.assume_init().method, VarexpCutoffKind::Affine);

        assert_eq!(varexp_cutoff_general(3, 0.0, 1.2009, out.as_mut_ptr()), VarexpStatus::Ok);
        assert!((out.assume_init().c2_star - 1.22).abs() < 0.005);

        assert_eq!(varexp_cutoff_kl_exact(1.0, out.as_mut_ptr()), VarexpStatus::Ok);
        assert_eq!(out.assume_init().method, VarexpCutoffKind::KlExact);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut m = ptr::null_mut();
    let mut v = 0.0;
    unsafe {
        assert_eq!(varexp_model_new(0, 1.0, 1.0, &mut m), VarexpStatus::Domain);
        assert!(m.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(varexp_h_alpha(1.0, 1.0, &mut v), VarexpStatus::Domain);
        assert!(last_error().contains("alpha"));

        assert_eq!(varexp_risk_identity(ptr::null(), 1.0, 0.0, &mut v), VarexpStatus::NullPointer);
        assert!(last_error().contains("model"));

        assert_eq!(varexp_h_alpha(1.0, 0.0, ptr::null_mut()), VarexpStatus::NullPointer);

        // A success clears the message.
        assert_eq!(varexp_h_alpha(1.0, 0.0, &mut v), VarexpStatus::Ok);
        assert!(last_error().is_empty());

        let mut e = ptr::null_mut();
        assert_eq!(varexp_estimator_parse(c"no-such-estimator".as_ptr(), &mut e), VarexpStatus::Domain);
        assert_eq!(varexp_estimator_parse(ptr::null(), &mut e), VarexpStatus::NullPointer);

        // James-Stein needs d >= 3.
        let m1 = model(1, 1.0, 1.0);
        let js = estimator(c"js");
        let mut r = std::mem::MaybeUninit::uninit();
        let theta = [0.0];
        assert_eq!(varexp_mc_risk(m1, js, 1.0, 0.0, theta.as_ptr(), 1000, 1, r.as_mut_ptr()), VarexpStatus::Domain);
        varexp_estimator_free(js);
        varexp_model_free(m1);

        varexp_model_free(ptr::null_mut());
        varexp_estimator_free(ptr::null_mut());
    }
}

extern "C" fn identity_cb(x: *const f64, out: *mut f64, d: usize, user_data: *mut c_void) {
    let scale = unsafe { *(user_data as *const f64) };
    for i in 0..d {
        unsafe { *out.add(i) = scale * *x.add(i) };
    }
}

#[test]
fn custom_callback_matches_builtin() {
    let m = model(3, 1.0, 1.0);
    let builtin = estimator(c"affine:0.5");
    let scale = 0.5f64;
    let mut custom = ptr::null_mut();
    let theta = [1.0, 2.0, 0.5];
    unsafe {
        let status = varexp_estimator_custom(
            c"half".as_ptr(),
            true,
            Some(identity_cb),
            &scale as *const f64 as *mut c_void,
            &mut custom,
        );
        assert_eq!(status, VarexpStatus::Ok);

        let mut a = std::mem::MaybeUninit::<VarexpRiskEstimate>::uninit();
        let mut b = std::mem::MaybeUninit::<VarexpRiskEstimate>::uninit();
        assert_eq!(varexp_mc_risk(m, builtin, 1.2, 0.0, theta.as_ptr(), 20_000, 7, a.as_mut_ptr()), VarexpStatus::Ok);
        assert_eq!(varexp_mc_risk(m, custom, 1.2, 0.0, theta.as_ptr(), 20_000, 7, b.as_mut_ptr()), VarexpStatus::Ok);
        let (a, b) = (a.assume_init(), b.assume_init());
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
        assert_eq!(b.n, 20_000);

        let mut exact = 0.0;
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_eq!(varexp_risk_affine(m, 0.5, norm, 1.2, 0.0, &mut exact), VarexpStatus::Ok);
        assert!((a.mean - exact).abs() < 5.0 * a.stderr, "{} vs {exact}", a.mean);

        let mut missing = ptr::null_mut();
        assert_eq!(
            varexp_estimator_custom(ptr::null(), true, None, ptr::null_mut(), &mut missing),
            VarexpStatus::NullPointer
        );

        varexp_estimator_free(custom);
        varexp_estimator_free(builtin);
        varexp_model_free(m);
    }
}

#[test]
fn monte_carlo_epsilon_and_empirical_cutoff() {
    let m = model(3, 1.0, 1.0);
    let js = estimator(c"js");
    unsafe {
        let mut eps = std::mem::MaybeUninit::<VarexpEpsilon>::uninit();
        assert_eq!(varexp_mc_epsilon(m, js, 0.0, 8.0, 17, 5_000, 3, eps.as_mut_ptr()), VarexpStatus::Ok, "{}", last_error());
        let eps = eps.assume_init();
        assert!(eps.value > 0.0 && eps.value.is_finite());
        assert!(eps.arg_theta_norm >= 0.0);

        let grid: Vec<f64> = (0..5).flat_map(|i| [i as f64, 0.0, 0.0]).collect();
        let mut eg = std::mem::MaybeUninit::<VarexpEpsilon>::uninit();
        assert_eq!(varexp_mc_epsilon_grid(m, js, 0.0, grid.as_ptr(), 5, 5_000, 3, eg.as_mut_ptr()), VarexpStatus::Ok);
        assert!(eg.assume_init().value > 0.0);

        let mut k = std::mem::MaybeUninit::<VarexpEmpiricalCutoff>::uninit();
        let status = varexp_empirical_cutoff(m, js, 0.0, grid.as_ptr(), 5, 5_000, 4.0, 3, k.as_mut_ptr());
        assert_eq!(status, VarexpStatus::Ok, "{}", last_error());
        let k = k.assume_init();
        assert!(k.k_star >= 1.0 && k.k_star <= 4.0);
        assert!(k.evaluations > 0);

        varexp_estimator_free(js);
        varexp_model_free(m);
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/varexp.h");
    let text = std::fs::read_to_string(&header).expect("header is generated by the build script");
    for name in ["varexp_model_new", "varexp_estimator_custom", "varexp_last_error", "VarexpStatus", "VarexpCutoff"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"]).arg(&header).status()
    else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(status.success());
}
