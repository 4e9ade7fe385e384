use std::ffi::{CStr, CString};
use std::ptr;

use ldpm_ffi::*;

fn rr(eps: f64) -> *mut LdpmChannel {
    let mut ch = ptr::null_mut();
    assert_eq!(unsafe { ldpm_channel_rr(eps, &mut ch) }, LdpmError::Ok);
    ch
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ldpm_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn rr_entries_match_keep_probability() {
    let ch = rr(1.0);
    let keep = 1.0 / (1.0 + (-1.0f64).exp());
    let mut p = 0.0;
    unsafe {
        assert_eq!(ldpm_channel_input_size(ch), 2);
        assert_eq!(ldpm_channel_output_size(ch), 2);
        assert_eq!(ldpm_channel_entry(ch, 1, 1, &mut p), LdpmError::Ok);
        assert!((p - keep).abs() < 1e-15);
        assert_eq!(ldpm_channel_entry(ch, 2, 0, &mut p), LdpmError::InvalidArgument);
        ldpm_channel_free(ch);
    }
}

#[test]
fn measure_recovers_epsilon() {
    let ch = rr(0.7);
    let (mut e, mut d) = (0.0, 1.0);
    unsafe {
        assert_eq!(ldpm_channel_measure(ch, f64::NAN, &mut e, &mut d), LdpmError::Ok);
        ldpm_channel_free(ch);
    }
    assert!((e - 0.7).abs() < 1e-12);
    assert_eq!(d, 0.0);
}

#[test]
fn json_round_trip() {
    let ch = rr(1.3);
    let mut s = ptr::null_mut();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(ldpm_channel_to_json(ch, &mut s), LdpmError::Ok);
        assert_eq!(ldpm_channel_from_json(s, &mut back), LdpmError::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        ldpm_channel_entry(ch, 0, 1, &mut a);
        ldpm_channel_entry(back, 0, 1, &mut b);
        assert_eq!(a, b);
        ldpm_string_free(s);
        ldpm_channel_free(ch);
        ldpm_channel_free(back);
    }
}

#[test]
fn decompose_then_compose_reproduces_channel() {
    let json =
        CString::new(r#"{"input_size":2,"output_labels":[0,1,2],"matrix":[[0.5,0.3,0.2],[0.3,0.4,0.3]]}"#).unwrap();
    let mut target = ptr::null_mut();
    let mut post = ptr::null_mut();
    let mut back = ptr::null_mut();
    let base = rr(1.0);
    unsafe {
        assert_eq!(
            ldpm_channel_from_json(json.as_ptr(), &mut target),
            LdpmError::Ok,
            "{}",
            last_error()
        );
        assert_eq!(ldpm_channel_kov_decompose(target, 1.0, 0.0, &mut post), LdpmError::Ok);
        assert_eq!(ldpm_channel_compose(post, base, &mut back), LdpmError::Ok);
        for x in 0..2 {
            for y in 0..3 {
                let (mut a, mut b) = (0.0, 0.0);
                ldpm_channel_entry(target, x, y, &mut a);
                ldpm_channel_entry(back, x, y, &mut b);
                assert!((a - b).abs() < 1e-9);
            }
        }
        for h in [target, post, back, base] {
            ldpm_channel_free(h);
        }
    }
}

#[test]
fn infeasible_decomposition_sets_error() {
    let strong = rr(2.0);
    let mut post = ptr::null_mut();
    unsafe {
        assert_eq!(
            ldpm_channel_kov_decompose(strong, 1.0, 0.0, &mut post),
            LdpmError::Infeasible
        );
        assert!(post.is_null());
        assert!(!last_error().is_empty());
        ldpm_channel_free(strong);
    }
}

#[test]
fn embedding_matches_closed_form() {
    let (d, eps) = (8usize, 0.5f64);
    let mut r = ptr::null_mut();
    let mut q = ptr::null_mut();
    let members = [0usize, 1, 2, 3];
    let (mut e, mut delta) = (0.0, 0.0);
    unsafe {
        assert_eq!(ldpm_channel_randomized_response(d, eps, &mut r), LdpmError::Ok);
        assert_eq!(
            ldpm_channel_embed(r, members.as_ptr(), members.len(), &mut q),
            LdpmError::Ok
        );
        ldpm_channel_measure(q, f64::NAN, &mut e, &mut delta);
        assert_eq!(
            ldpm_channel_embed(r, members.as_ptr(), 3, &mut q),
            LdpmError::InvalidArgument
        );
        ldpm_channel_free(r);
    }
    // Outputs in H are favoured by e^eps / (e^eps + d - 1) on one side only.
    let p_in = |inside: bool| {
        let z = eps.exp() + d as f64 - 1.0;
        if inside {
            (eps.exp() + 3.0) / (4.0 * z)
        } else {
            4.0 / (4.0 * z)
        }
    };
    assert!((e - (p_in(true) / p_in(false)).ln()).abs() < 1e-12);
}

#[test]
fn null_arguments_are_rejected() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(ldpm_channel_rr(1.0, ptr::null_mut()), LdpmError::NullPointer);
        assert_eq!(ldpm_channel_entry(ptr::null(), 0, 0, &mut x), LdpmError::NullPointer);
        assert_eq!(ldpm_channel_input_size(ptr::null()), 0);
        ldpm_channel_free(ptr::null_mut());
        ldpm_string_free(ptr::null_mut());
    }
    assert_eq!(last_error(), "channel is null");
}

#[test]
fn binomial_margin_and_threshold() {
    let mut margin = 0.0;
    let (mut mu, mut mu_eps) = (0.0, 0.0);
    unsafe {
        assert_eq!(ldpm_binomial_margin(931, 58, &mut margin), LdpmError::Ok);
        assert_eq!(ldpm_mu_threshold(100, 1000, 1.0, &mut mu, &mut mu_eps), LdpmError::Ok);
        assert_eq!(
            ldpm_mu_threshold(900, 1000, 1.0, &mut mu, &mut mu_eps),
            LdpmError::InvalidArgument
        );
    }
    assert!((margin - -0.247752015404853).abs() < 1e-9);
    let expected = 0.1 + (2.0 * 6f64.ln() / 1000.0).sqrt();
    assert!((mu - expected).abs() < 1e-15);
}

#[test]
fn errors_are_thread_local() {
    let mut x = 0.0;
    unsafe { ldpm_channel_entry(ptr::null(), 0, 0, &mut x) };
    std::thread::spawn(|| assert!(ldpm_last_error_message().is_null()))
        .join()
        .unwrap();
    assert!(!last_error().is_empty());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ldpm.h")).unwrap();
    for f in [
        "ldpm_last_error_message",
        "ldpm_channel_rr",
        "ldpm_channel_rr_delta",
        "ldpm_channel_from_json",
        "ldpm_channel_to_json",
        "ldpm_channel_measure",
        "ldpm_channel_kov_decompose",
        "ldpm_channel_compose",
        "ldpm_channel_embed",
        "ldpm_channel_free",
        "ldpm_string_free",
        "ldpm_binomial_margin",
        "ldpm_mu_threshold",
        "typedef struct LdpmChannel LdpmChannel",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}
