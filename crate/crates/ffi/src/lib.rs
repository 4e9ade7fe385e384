//! C ABI over `ldpm-core`.
//!
//! Every fallible function returns an [`LdpmError`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`ldpm_last_error_message`]. Channels are opaque handles that
//! must be released with [`ldpm_channel_free`]; strings returned by the
//! library must be released with [`ldpm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ldpm_core::analysis::binomial_claim_verify;
use ldpm_core::attacks::mu_threshold;
use ldpm_core::channel::{
    compose_channels, embed_channel, kov_decompose, measure_privacy, rr_channel, rr_delta_channel, Channel, Epsilon,
    RrOutput, SubsetH,
};
use ldpm_core::Error;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdpmError {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidChannel = 3,
    Infeasible = 4,
    Parse = 5,
    Internal = 6,
}

/// Opaque channel handle.
pub struct LdpmChannel(Channel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn code_for(e: &Error) -> LdpmError {
    match e {
        Error::InvalidChannel(_) | Error::DimensionMismatch { .. } | Error::SupportMismatch { .. } => {
            LdpmError::InvalidChannel
        }
        Error::DecompositionInfeasible { .. } | Error::Solver(_) => LdpmError::Infeasible,
        Error::Parse(_) => LdpmError::Parse,
        Error::Io(_) => LdpmError::Internal,
        _ => LdpmError::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LdpmError, String)>) -> LdpmError {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LdpmError::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            LdpmError::Internal
        }
    }
}

fn core<T>(r: ldpm_core::Result<T>) -> Result<T, (LdpmError, String)> {
    r.map_err(|e| (code_for(&e), e.to_string()))
}

fn null(what: &str) -> (LdpmError, String) {
    (LdpmError::NullPointer, format!("{what} is null"))
}

unsafe fn channel_ref<'a>(ch: *const LdpmChannel, what: &str) -> Result<&'a Channel, (LdpmError, String)> {
    ch.as_ref().map(|c| &c.0).ok_or_else(|| null(what))
}

unsafe fn emit(out: *mut *mut LdpmChannel, ch: Channel) -> Result<(), (LdpmError, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(LdpmChannel(ch)));
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ldpm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Binary randomized response on {-1, +1}.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_rr(epsilon: f64, out: *mut *mut LdpmChannel) -> LdpmError {
    guard(|| emit(out, core(rr_channel(epsilon, RrOutput::Raw))?))
}

/// Binary randomized response with outputs rescaled to {-c, +c}.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_rr_rescaled(epsilon: f64, out: *mut *mut LdpmChannel) -> LdpmError {
    guard(|| emit(out, core(rr_channel(epsilon, RrOutput::Rescaled))?))
}

/// The four-output (epsilon, delta) randomized response.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_rr_delta(epsilon: f64, delta: f64, out: *mut *mut LdpmChannel) -> LdpmError {
    guard(|| emit(out, core(rr_delta_channel(epsilon, delta))?))
}

/// d-ary randomized response.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_randomized_response(
    d: usize,
    epsilon: f64,
    out: *mut *mut LdpmChannel,
) -> LdpmError {
    guard(|| emit(out, core(Channel::randomized_response(d, epsilon))?))
}

/// Parses a channel from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_from_json(json: *const c_char, out: *mut *mut LdpmChannel) -> LdpmError {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (LdpmError::Parse, e.to_string()))?;
        emit(out, core(Channel::from_json(text))?)
    })
}

/// Serializes a channel to JSON. Free the result with [`ldpm_string_free`].
///
/// # Safety
/// `ch` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_to_json(ch: *const LdpmChannel, out: *mut *mut c_char) -> LdpmError {
    guard(|| {
        let ch = channel_ref(ch, "channel")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = core(ch.to_json())?;
        let s = CString::new(s).map_err(|e| (LdpmError::Internal, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// Number of inputs, or 0 for a null handle.
///
/// # Safety
/// `ch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_input_size(ch: *const LdpmChannel) -> usize {
    ch.as_ref().map_or(0, |c| c.0.input_size())
}

/// Number of outputs, or 0 for a null handle.
///
/// # Safety
/// `ch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_output_size(ch: *const LdpmChannel) -> usize {
    ch.as_ref().map_or(0, |c| c.0.output_size())
}

/// Reads the probability of `output` given `input`.
///
/// # Safety
/// `ch` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_entry(
    ch: *const LdpmChannel,
    input: usize,
    output: usize,
    out: *mut f64,
) -> LdpmError {
    guard(|| {
        let ch = channel_ref(ch, "channel")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if input >= ch.input_size() || output >= ch.output_size() {
            return Err((
                LdpmError::InvalidArgument,
                format!(
                    "entry ({input}, {output}) outside {}x{}",
                    ch.input_size(),
                    ch.output_size()
                ),
            ));
        }
        *out = ch.row(input)[output];
        Ok(())
    })
}

/// Measures privacy. With a NaN `epsilon_query` writes the smallest pure
/// epsilon (`INFINITY` if none) and delta 0; otherwise writes the query back
/// and the smallest delta at that epsilon.
///
/// # Safety
/// `ch` must be a live handle; `out_epsilon` and `out_delta` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_measure(
    ch: *const LdpmChannel,
    epsilon_query: f64,
    out_epsilon: *mut f64,
    out_delta: *mut f64,
) -> LdpmError {
    guard(|| {
        let ch = channel_ref(ch, "channel")?;
        if out_epsilon.is_null() || out_delta.is_null() {
            return Err(null("out"));
        }
        let query = (!epsilon_query.is_nan()).then_some(epsilon_query);
        let p = measure_privacy(ch, query);
        *out_epsilon = match p.epsilon {
            Epsilon::Finite(e) => e,
            Epsilon::Infinite => f64::INFINITY,
        };
        *out_delta = p.delta;
        Ok(())
    })
}

/// Finds a post-processor that recovers `ch` from binary randomized
/// response (delta 0) or its four-output variant (delta > 0).
///
/// # Safety
/// `ch` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_kov_decompose(
    ch: *const LdpmChannel,
    epsilon: f64,
    delta: f64,
    out: *mut *mut LdpmChannel,
) -> LdpmError {
    guard(|| {
        let ch = channel_ref(ch, "channel")?;
        let post = core(kov_decompose(ch, epsilon, delta))?;
        emit(out, post.into_channel())
    })
}

/// Applies `post` to the output of `base`. Input `i` of `post` reads output
/// `i` of `base`.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_compose(
    post: *const LdpmChannel,
    base: *const LdpmChannel,
    out: *mut *mut LdpmChannel,
) -> LdpmError {
    guard(|| {
        let post = channel_ref(post, "post")?;
        let base = channel_ref(base, "base")?;
        emit(out, core(compose_channels(post, base))?)
    })
}

/// Embeds a `d`-input channel into a binary one via the subset of 0-based
/// `members` of size d/2.
///
/// # Safety
/// `ch` must be a live handle, `members` must point to `len` values and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_embed(
    ch: *const LdpmChannel,
    members: *const usize,
    len: usize,
    out: *mut *mut LdpmChannel,
) -> LdpmError {
    guard(|| {
        let ch = channel_ref(ch, "channel")?;
        if members.is_null() && len > 0 {
            return Err(null("members"));
        }
        let members = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(members, len)
        };
        let h = core(SubsetH::half(ch.input_size(), members))?;
        emit(out, core(embed_channel(ch, &h))?)
    })
}

/// Releases a channel. Null is ignored.
///
/// # Safety
/// `ch` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ldpm_channel_free(ch: *mut LdpmChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ldpm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Margin of the binomial claim at `(n, m)`; non-positive means it holds.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ldpm_binomial_margin(n: usize, m: usize, out: *mut f64) -> LdpmError {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = core(binomial_claim_verify(n, m))?.margin();
        Ok(())
    })
}

/// Threshold mean `mu` and its rescaled form `c * mu`.
///
/// # Safety
/// `out_mu` and `out_mu_eps` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ldpm_mu_threshold(
    m: usize,
    n: usize,
    epsilon: f64,
    out_mu: *mut f64,
    out_mu_eps: *mut f64,
) -> LdpmError {
    guard(|| {
        if out_mu.is_null() || out_mu_eps.is_null() {
            return Err(null("out"));
        }
        let (mu, mu_eps) = core(mu_threshold(m, n, epsilon))?;
        *out_mu = mu;
        *out_mu_eps = mu_eps;
        Ok(())
    })
}
