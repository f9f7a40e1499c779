use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use troprelu_ffi::*;

fn running_path() -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/running.nt");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tr_last_error_message()) }.to_string_lossy().into_owned()
}

/// h1 = x1 - x2 - 1, h2 = x1 + x2 + 1, both through ReLU.
unsafe fn running_built() -> *mut TrNetwork {
    let mut net = ptr::null_mut();
    assert_eq!(tr_network_new(2, &mut net), TrStatus::Ok);
    let w = [1.0, -1.0, 1.0, 1.0];
    let b = [-1.0, 1.0];
    assert_eq!(tr_network_push_layer(net, 2, w.as_ptr(), b.as_ptr(), true), TrStatus::Ok);
    net
}

unsafe fn analyze(net: *const TrNetwork, opts: &TrOptions, subdiv: Option<&[usize]>) -> *mut TrAnalysis {
    let lo = [-1.0, -1.0];
    let hi = [1.0, 1.0];
    let mut an = ptr::null_mut();
    let s = subdiv.map_or(ptr::null(), |s| s.as_ptr());
    let st = tr_analyze(net, lo.as_ptr(), hi.as_ptr(), 2, opts, s, &mut an);
    assert_eq!(st, TrStatus::Ok, "{}", last_error());
    an
}

unsafe fn bounds(an: *const TrAnalysis) -> Vec<(f64, f64)> {
    let n = tr_analysis_output_count(an);
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    assert_eq!(tr_analysis_output_bounds(an, lo.as_mut_ptr(), hi.as_mut_ptr(), n), TrStatus::Ok);
    lo.into_iter().zip(hi).collect()
}

#[test]
fn loaded_and_built_networks_agree() {
    unsafe {
        let mut loaded = ptr::null_mut();
        assert_eq!(tr_network_load(running_path().as_ptr(), &mut loaded), TrStatus::Ok);
        let built = running_built();
        assert_eq!(tr_network_inputs(loaded), 2);
        assert_eq!(tr_network_outputs(loaded), 2);
        let opts = tr_options_default();
        for net in [loaded, built] {
            let an = analyze(net, &opts, None);
            let b = bounds(an);
            assert!((b[0].0).abs() < 1e-9 && (b[0].1 - 1.0).abs() < 1e-9, "{b:?}");
            assert!((b[1].0).abs() < 1e-9 && (b[1].1 - 3.0).abs() < 1e-9, "{b:?}");
            tr_analysis_free(an);
        }
        tr_network_free(loaded);
        tr_network_free(built);
    }
}

#[test]
fn generators_are_exported_row_major() {
    unsafe {
        let net = running_built();
        let an = analyze(net, &tr_options_default(), None);
        let (mut count, mut dim) = (0, 0);
        assert_eq!(tr_analysis_generator_shape(an, &mut count, &mut dim), TrStatus::Ok);
        assert_eq!(dim, 4);
        assert!(count > 0);
        let mut buf = vec![0.0; count * dim];
        assert_eq!(tr_analysis_generators(an, buf.as_mut_ptr(), buf.len()), TrStatus::Ok);
        assert!(buf.iter().any(|v| v.is_finite()));
        assert_eq!(
            tr_analysis_generators(an, buf.as_mut_ptr(), buf.len() - 1),
            TrStatus::DimensionMismatch
        );
        tr_analysis_free(an);
        tr_network_free(net);
    }
}

#[test]
fn output_order_property_is_verified_in_every_mode() {
    unsafe {
        let net = running_built();
        for mode in [TrMode::Box, TrMode::Zone, TrMode::External] {
            for domain in [TrDomain::Zone, TrDomain::Octagon] {
                let opts = TrOptions { mode, domain, ..tr_options_default() };
                let an = analyze(net, &opts, None);
                let (cin, cout) = ([0.0, 0.0], [-1.0, 1.0]);
                let (mut ok, mut w) = (false, f64::NAN);
                let st = tr_analysis_check(
                    an, cin.as_ptr(), 2, cout.as_ptr(), 2, 0.0,
                    ptr::null(), ptr::null(), &mut ok, &mut w,
                );
                assert_eq!(st, TrStatus::Ok, "{}", last_error());
                assert!(ok, "{mode:?}/{domain:?}: witness {w}");
                assert!(w >= -1e-9);
                tr_analysis_free(an);
            }
        }
        tr_network_free(net);
    }
}

#[test]
fn restricted_property_needs_a_split() {
    unsafe {
        let net = running_built();
        let (cin, cout) = ([0.0, 0.0], [-1.0, 0.0]);
        let (rlo, rhi) = ([-0.25, -1.0], [0.25, 1.0]);
        let check = |an| {
            let (mut ok, mut w) = (false, 0.0);
            let st = tr_analysis_check(
                an, cin.as_ptr(), 2, cout.as_ptr(), 2, 0.5,
                rlo.as_ptr(), rhi.as_ptr(), &mut ok, &mut w,
            );
            assert_eq!(st, TrStatus::Ok, "{}", last_error());
            (ok, w)
        };
        let opts = tr_options_default();
        let whole = analyze(net, &opts, None);
        let (ok, w) = check(whole);
        assert!(!ok && (w + 0.5).abs() < 1e-9, "unsplit witness {w}");
        let split = analyze(net, &opts, Some(&[2, 1]));
        let (ok, w) = check(split);
        assert!(ok && w >= 0.25 - 1e-9, "split witness {w}");
        tr_analysis_free(whole);
        tr_analysis_free(split);
        tr_network_free(net);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(tr_network_new(2, ptr::null_mut()), TrStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(tr_network_new(0, &mut net), TrStatus::InvalidArgument);

        let missing = CString::new("/nonexistent/net.nt").unwrap();
        assert_eq!(tr_network_load(missing.as_ptr(), &mut net), TrStatus::Io);
        assert!(!last_error().is_empty());

        let net = running_built();
        let w = [f64::NAN, 0.0];
        let b = [0.0];
        assert_eq!(tr_network_push_layer(net, 1, w.as_ptr(), b.as_ptr(), false), TrStatus::InvalidArgument);

        let (lo, hi) = ([0.0; 3], [1.0; 3]);
        let mut an = ptr::null_mut();
        let st = tr_analyze(net, lo.as_ptr(), hi.as_ptr(), 3, ptr::null(), ptr::null(), &mut an);
        assert_eq!(st, TrStatus::DimensionMismatch);
        assert!(an.is_null());

        let (lo, hi) = ([1.0, 0.0], [0.0, 1.0]);
        let st = tr_analyze(net, lo.as_ptr(), hi.as_ptr(), 2, ptr::null(), ptr::null(), &mut an);
        assert_eq!(st, TrStatus::InvalidArgument);

        let opts = TrOptions { cell_budget: 3, ..tr_options_default() };
        let (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
        let st = tr_analyze(net, lo.as_ptr(), hi.as_ptr(), 2, &opts, [4usize, 4].as_ptr(), &mut an);
        assert_eq!(st, TrStatus::CellBudgetExceeded, "{}", last_error());

        assert_eq!(tr_analysis_output_count(ptr::null()), 0);
        tr_analysis_free(ptr::null_mut());
        tr_network_free(net);
        tr_network_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/troprelu.h")).unwrap();
    for f in [
        "tr_last_error_message", "tr_options_default", "tr_network_load", "tr_network_new",
        "tr_network_push_layer", "tr_network_free", "tr_analyze", "tr_analysis_output_bounds",
        "tr_analysis_check", "tr_analysis_generators", "tr_analysis_free",
    ] {
        assert!(h.contains(&format!("{f}(")), "missing {f}");
    }
    assert!(h.contains("typedef struct TrNetwork TrNetwork;"));
    assert!(h.contains("TR_STATUS_OK = 0"));
}
