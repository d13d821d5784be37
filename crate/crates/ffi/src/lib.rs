//! C ABI over `qfound-core`.
//!
//! Every function returns an integer status (`QF_OK` on success) and writes
//! results through out-pointers. Objects are opaque handles owned by the
//! caller and released with the matching `*_free`. On failure a message is
//! kept per thread and can be read with [`qf_last_error`].
//!
//! Panics never cross the boundary; they surface as `QF_ERR_PANIC`.
//!
//! Pointer contract for every function: each pointer argument is either
//! null (reported as `QF_ERR_NULL`) or valid for the access its
//! documentation describes. Handles and strings are passed back only to the
//! library that created them, and freed at most once.

// The contract above is the C caller's obligation. Marking every entry point
// `unsafe` would add nothing on the C side.
#![allow(clippy::not_unsafe_ptr_arg_deref)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use num_rational::Rational64;
use qfound_core::error::{Error, ErrorKind};
use qfound_core::qstate::{self, DichotomicObservable, StateVector};
use qfound_core::wavepacket::{gaussian_packet, Grid, PacketSpec, WaveFunction};
use qfound_core::{cli, grw, mwi};

pub const QF_OK: i32 = 0;
/// A required pointer argument was null.
pub const QF_ERR_NULL: i32 = 1;
/// Invalid configuration or parameters.
pub const QF_ERR_CONFIG: i32 = 2;
/// A numerical contract was violated.
pub const QF_ERR_NUMERICAL: i32 = 3;
pub const QF_ERR_IO: i32 = 4;
/// A string argument was not valid UTF-8.
pub const QF_ERR_UTF8: i32 = 5;
/// Internal panic caught at the boundary.
pub const QF_ERR_PANIC: i32 = 6;

/// Observable selector for [`qf_parity_expectation`].
pub const QF_OBS_X: u8 = 0;
pub const QF_OBS_Y: u8 = 1;

/// Opaque multi-qubit state.
pub struct QfState(StateVector);

/// Opaque gridded wave function.
pub struct QfWave(WaveFunction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => QF_ERR_CONFIG,
        ErrorKind::Numerical => QF_ERR_NUMERICAL,
        ErrorKind::Io => QF_ERR_IO,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Clears the last error, runs `f`, records any failure.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QF_OK,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QF_ERR_NULL
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string argument is not valid UTF-8");
            QF_ERR_UTF8
        }
        Err(_) => {
            set_error("internal panic");
            QF_ERR_PANIC
        }
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: caller guarantees `p` is null or a live handle.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` initialized elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// The three-qubit GHZ state.
#[no_mangle]
pub extern "C" fn qf_state_ghz(out_state: *mut *mut QfState) -> i32 {
    guard(|| {
        *out(out_state, "out_state")? = Box::into_raw(Box::new(QfState(qstate::ghz())));
        Ok(())
    })
}

/// An `n`-qubit state from `2^n` amplitudes given as separate real and
/// imaginary arrays; they are normalized here and must not all vanish.
#[no_mangle]
pub extern "C" fn qf_state_new_qubits(
    n: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out_state: *mut *mut QfState,
) -> i32 {
    guard(|| {
        let re = slice(re, len, "re")?;
        let im = slice(im, len, "im")?;
        let amps = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let state = StateVector::qubits(n, amps)?;
        *out(out_state, "out_state")? = Box::into_raw(Box::new(QfState(state)));
        Ok(())
    })
}

/// Number of amplitudes in the state.
#[no_mangle]
pub extern "C" fn qf_state_len(state: *const QfState, out_len: *mut usize) -> i32 {
    guard(|| {
        *out(out_len, "out_len")? = get(state, "state")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qf_state_amplitude(
    state: *const QfState,
    index: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    guard(|| {
        let amps = get(state, "state")?.0.amplitudes();
        let a = amps.get(index).ok_or_else(|| {
            Error::InvalidParameter(format!("index {index} out of {} amplitudes", amps.len()))
        })?;
        *out(out_re, "out_re")? = a.re;
        *out(out_im, "out_im")? = a.im;
        Ok(())
    })
}

/// Releases a state handle. Null is ignored.
#[no_mangle]
pub extern "C" fn qf_state_free(state: *mut QfState) {
    if !state.is_null() {
        // SAFETY: handle came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(state) });
    }
}

/// ⟨O₀ O₁ … O_{n−1}⟩ where `kinds[i]` (`QF_OBS_X` or `QF_OBS_Y`) selects
/// the observable on site `i`.
#[no_mangle]
pub extern "C" fn qf_parity_expectation(
    state: *const QfState,
    kinds: *const u8,
    n: usize,
    out_value: *mut f64,
) -> i32 {
    guard(|| {
        let state = get(state, "state")?;
        let obs = slice(kinds, n, "kinds")?
            .iter()
            .enumerate()
            .map(|(site, &k)| match k {
                QF_OBS_X => Ok(DichotomicObservable::x(site)),
                QF_OBS_Y => Ok(DichotomicObservable::y(site)),
                other => Err(Error::InvalidParameter(format!("observable kind {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out(out_value, "out_value")? = qstate::parity_expectation(&state.0, &obs)?;
        Ok(())
    })
}

/// Number of local ±1 assignments satisfying all four GHZ constraints.
#[no_mangle]
pub extern "C" fn qf_hv_search(out_count: *mut usize) -> i32 {
    guard(|| {
        *out(out_count, "out_count")? = qstate::hv_search();
        Ok(())
    })
}

/// `exp(−l²/2d²)`: amplitude ratio left on a branch at distance `l` from a
/// collapse centre.
#[no_mangle]
pub extern "C" fn qf_tail_ratio(l: f64, d: f64, out_ratio: *mut f64) -> i32 {
    guard(|| {
        if !(d > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter(format!("l = {l}, d = {d}")).into());
        }
        *out(out_ratio, "out_ratio")? = grw::tail_ratio(l, d);
        Ok(())
    })
}

/// Credence in heads for a coin with P(heads) = `p_num/p_den`, as a reduced
/// fraction.
#[no_mangle]
pub extern "C" fn qf_sleeping_beauty(
    p_num: i64,
    p_den: i64,
    out_num: *mut i64,
    out_den: *mut i64,
) -> i32 {
    guard(|| {
        if p_den == 0 {
            return Err(Error::InvalidParameter("zero denominator".into()).into());
        }
        let c = mwi::sleeping_beauty_biased(Rational64::new(p_num, p_den))?;
        *out(out_num, "out_num")? = *c.numer();
        *out(out_den, "out_den")? = *c.denom();
        Ok(())
    })
}

/// A normalized Gaussian packet sampled at `n_points` points spanning
/// `[x_min, x_max]` inclusive.
#[no_mangle]
pub extern "C" fn qf_wave_gaussian(
    x_min: f64,
    x_max: f64,
    n_points: usize,
    center: f64,
    width: f64,
    momentum: f64,
    out_wave: *mut *mut QfWave,
) -> i32 {
    guard(|| {
        let grid = Grid::new(x_min, x_max, n_points)?;
        let psi = gaussian_packet(PacketSpec::moving(center, width, momentum), grid)?;
        *out(out_wave, "out_wave")? = Box::into_raw(Box::new(QfWave(psi)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qf_wave_len(wave: *const QfWave, out_len: *mut usize) -> i32 {
    guard(|| {
        *out(out_len, "out_len")? = get(wave, "wave")?.0.values().len();
        Ok(())
    })
}

/// ∫|ψ|² over the grid.
#[no_mangle]
pub extern "C" fn qf_wave_norm(wave: *const QfWave, out_norm: *mut f64) -> i32 {
    guard(|| {
        *out(out_norm, "out_norm")? = get(wave, "wave")?.0.norm_sqr();
        Ok(())
    })
}

/// Copies |ψ|² into `buf`, which must hold exactly `qf_wave_len` values.
#[no_mangle]
pub extern "C" fn qf_wave_density(wave: *const QfWave, buf: *mut f64, len: usize) -> i32 {
    guard(|| {
        let density = get(wave, "wave")?.0.density();
        if len != density.len() {
            return Err(Error::DimensionMismatch {
                expected: density.len(),
                got: len,
            }
            .into());
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        // SAFETY: caller guarantees `buf` holds `len` writable values.
        unsafe { std::slice::from_raw_parts_mut(buf, len) }.copy_from_slice(&density);
        Ok(())
    })
}

/// Releases a wave handle. Null is ignored.
#[no_mangle]
pub extern "C" fn qf_wave_free(wave: *mut QfWave) {
    if !wave.is_null() {
        // SAFETY: handle came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(wave) });
    }
}

/// Runs a scenario from TOML config text and returns the summary JSON in
/// `*out_json` (release with [`qf_string_free`]). Nothing is written to disk.
#[no_mangle]
pub extern "C" fn qf_run_config(config: *const c_char, out_json: *mut *mut c_char) -> i32 {
    guard(|| {
        if config.is_null() {
            return Err(Fail::Null("config"));
        }
        // SAFETY: caller passes a nul-terminated string.
        let text = unsafe { CStr::from_ptr(config) }.to_str().map_err(|_| Fail::Utf8)?;
        let cfg = cli::RunConfig::from_toml_str(text)?;
        let summary = cli::execute(&cfg)?.summary_text();
        let s = CString::new(summary).expect("JSON has no nul bytes");
        *out(out_json, "out_json")? = s.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
#[no_mangle]
pub extern "C" fn qf_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: string came from `CString::into_raw` in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}
