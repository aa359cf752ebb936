//! C ABI over `sppkit`.
//!
//! Every fallible call returns an [`SppkitStatus`]; on failure the message is
//! available from [`sppkit_last_error`] on the same thread. Handles are opaque,
//! owned by the caller, and released with the matching `_free` function.
//! Pointer arguments must be valid for the stated lengths; output handles and
//! buffers are written only on success. Array outputs take a capacity and
//! report the required length, returning `SPPKIT_STATUS_BUFFER_TOO_SMALL` when
//! it exceeds the capacity.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sppkit::correlation::{covariance_series, spectral_summary, SpectralSummary, TransferOperator};
use sppkit::process::SeDilation;
use sppkit::rng::StreamRng;
use sppkit::spp::{build_spp_mps, sample_trajectories, trajectory_weight, worked_hamiltonian, SppMps, SppMpsJson, WorkedModel};
use sppkit::storm::{sample_fault_stream, solve_params, storm_hmm, ErrorProfile, StormHmm, StormParams};
use sppkit::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SppkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Numerical = 4,
    TooLarge = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SppkitModel {
    Heisenberg = 0,
    Crx = 1,
    HeisenbergField = 2,
}

/// Transfer-operator spectrum; `correlation_length` is infinite for non-ergodic processes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SppkitSpectrum {
    pub lambda_star: f64,
    pub gap: f64,
    pub correlation_length: f64,
    pub non_normality: f64,
    pub dim: usize,
    pub non_ergodic: bool,
}

/// Closed-form storm quantities; marginals are over (I, X, Y, Z).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SppkitStormSummary {
    pub a: f64,
    pub b: f64,
    pub lambda2: f64,
    pub lambda_star: f64,
    pub gap: f64,
    pub correlation_length: f64,
    pub pi_calm: f64,
    pub pi_storm: f64,
    pub marginals: [f64; 4],
}

/// System-environment dilation.
pub struct SppkitDilation(SeDilation);

/// Stochastic Pauli process as a matrix product state.
pub struct SppkitMps(SppMps);

/// Two-state storm chain.
pub struct SppkitStorm(StormHmm);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SppkitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::Json(_) | Error::Csv(_) => SppkitStatus::InvalidArgument,
            Error::ShapeMismatch(_) => SppkitStatus::ShapeMismatch,
            Error::TooLarge(_) => SppkitStatus::TooLarge,
            Error::Io(_) => SppkitStatus::Io,
            _ => SppkitStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn fail(status: SppkitStatus, msg: impl Into<String>) -> Outcome {
    Err(Failure(status, msg.into()))
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Outcome) -> SppkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SppkitStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside sppkit");
            SppkitStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(SppkitStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(SppkitStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SppkitStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SppkitStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return fail(SppkitStatus::NullPointer, "output handle is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T) -> Outcome {
    if out.is_null() {
        return fail(SppkitStatus::NullPointer, "output is null");
    }
    *out = value;
    Ok(())
}

/// Copies `data` into `out[..cap]` and reports the required length through `len`.
unsafe fn put_array<T: Copy>(data: &[T], out: *mut T, cap: usize, len: *mut usize) -> Outcome {
    if !len.is_null() {
        *len = data.len();
    }
    if data.len() > cap {
        return fail(SppkitStatus::BufferTooSmall, format!("need {} entries, capacity {cap}", data.len()));
    }
    if !data.is_empty() {
        if out.is_null() {
            return fail(SppkitStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    }
    Ok(())
}

fn spectrum_of(op: &TransferOperator) -> Result<SppkitSpectrum, Failure> {
    let s: SpectralSummary = spectral_summary(op)?;
    Ok(SppkitSpectrum {
        lambda_star: s.lambda_star,
        gap: s.gap,
        correlation_length: s.correlation_length.unwrap_or(f64::INFINITY),
        non_normality: s.non_normality,
        dim: op.dim(),
        non_ergodic: s.non_ergodic,
    })
}

fn bulk_transfer(mps: &SppMps) -> Result<TransferOperator, Failure> {
    if mps.steps() < 3 {
        return Err(Failure(SppkitStatus::InvalidArgument, "the transfer operator needs at least three steps".into()));
    }
    Ok(TransferOperator::from_mps(mps, 1)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sppkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn sppkit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sppkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a dilation from its JSON form.
#[no_mangle]
pub unsafe extern "C" fn sppkit_dilation_from_json(json: *const c_char, out: *mut *mut SppkitDilation) -> SppkitStatus {
    guard(|| {
        let d = SeDilation::from_json(c_str(json, "json")?)?;
        put_handle(out, SppkitDilation(d))
    })
}

/// One-qubit worked model with `steps` applications of `exp(-iH(θ))`.
#[no_mangle]
pub unsafe extern "C" fn sppkit_dilation_worked(
    model: SppkitModel,
    theta: f64,
    steps: usize,
    out: *mut *mut SppkitDilation,
) -> SppkitStatus {
    guard(|| {
        if steps == 0 {
            return fail(SppkitStatus::InvalidArgument, "steps must be positive");
        }
        let m = match model {
            SppkitModel::Heisenberg => WorkedModel::Heisenberg,
            SppkitModel::Crx => WorkedModel::Crx,
            SppkitModel::HeisenbergField => WorkedModel::HeisenbergField,
        };
        put_handle(out, SppkitDilation(worked_hamiltonian(m, theta, steps - 1)?))
    })
}

/// Haar-random unitaries and a random environment state.
#[no_mangle]
pub unsafe extern "C" fn sppkit_dilation_haar(
    d_s: usize,
    d_e: usize,
    steps: usize,
    seed: u64,
    out: *mut *mut SppkitDilation,
) -> SppkitStatus {
    guard(|| {
        if steps == 0 {
            return fail(SppkitStatus::InvalidArgument, "steps must be positive");
        }
        let mut rng = StreamRng::new(&[seed]);
        put_handle(out, SppkitDilation(SeDilation::haar_random(d_s, d_e, steps - 1, &mut rng)?))
    })
}

/// Serializes a dilation to JSON; release with `sppkit_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sppkit_dilation_to_json(dilation: *const SppkitDilation, out: *mut *mut c_char) -> SppkitStatus {
    guard(|| {
        let text = deref(dilation, "dilation")?.0.to_json()?;
        put(out, CString::new(text).map_err(|e| Failure(SppkitStatus::InvalidArgument, e.to_string()))?.into_raw())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sppkit_dilation_free(dilation: *mut SppkitDilation) {
    if !dilation.is_null() {
        drop(Box::from_raw(dilation));
    }
}

/// Twirls a dilation into its Pauli process.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_from_dilation(dilation: *const SppkitDilation, out: *mut *mut SppkitMps) -> SppkitStatus {
    guard(|| {
        let mps = build_spp_mps(&deref(dilation, "dilation")?.0)?;
        put_handle(out, SppkitMps(mps))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_from_json(json: *const c_char, out: *mut *mut SppkitMps) -> SppkitStatus {
    guard(|| {
        let j: SppMpsJson = serde_json::from_str(c_str(json, "json")?).map_err(Error::from)?;
        put_handle(out, SppkitMps(SppMps::from_json(&j)?))
    })
}

/// Serializes an MPS to JSON; release with `sppkit_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_to_json(mps: *const SppkitMps, out: *mut *mut c_char) -> SppkitStatus {
    guard(|| {
        let text = serde_json::to_string(&deref(mps, "mps")?.0.to_json()).map_err(Error::from)?;
        put(out, CString::new(text).map_err(|e| Failure(SppkitStatus::InvalidArgument, e.to_string()))?.into_raw())
    })
}

/// Labels per step (`4^n`), or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_labels(mps: *const SppkitMps) -> usize {
    mps.as_ref().map_or(0, |m| m.0.labels())
}

/// Time steps, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_steps(mps: *const SppkitMps) -> usize {
    mps.as_ref().map_or(0, |m| m.0.steps())
}

/// Bond dimensions including both unit boundary bonds (`steps + 1` entries).
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_bond_dims(
    mps: *const SppkitMps,
    out: *mut usize,
    cap: usize,
    len: *mut usize,
) -> SppkitStatus {
    guard(|| put_array(&deref(mps, "mps")?.0.bond_dims(), out, cap, len))
}

/// Weight of one trajectory of `len` label indices.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_weight(
    mps: *const SppkitMps,
    trajectory: *const u32,
    len: usize,
    out: *mut f64,
) -> SppkitStatus {
    guard(|| {
        let traj: Vec<usize> = slice(trajectory, len, "trajectory")?.iter().map(|&x| x as usize).collect();
        put(out, trajectory_weight(&deref(mps, "mps")?.0, &traj)?)
    })
}

/// All `labels^steps` weights in lexicographic order, first step most significant.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_weights(mps: *const SppkitMps, out: *mut f64, cap: usize, len: *mut usize) -> SppkitStatus {
    guard(|| put_array(&deref(mps, "mps")?.0.all_weights()?, out, cap, len))
}

/// `count` trajectories written row-major into `out` (`count * steps` entries).
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_sample(
    mps: *const SppkitMps,
    seed: u64,
    count: usize,
    out: *mut u32,
    cap: usize,
) -> SppkitStatus {
    guard(|| {
        let mps = &deref(mps, "mps")?.0;
        let mut rng = StreamRng::new(&[seed]);
        let flat: Vec<u32> = sample_trajectories(mps, count, &mut rng)?.into_iter().flatten().collect();
        put_array(&flat, out, cap, ptr::null_mut())
    })
}

/// Spectrum of the transfer operator of the first bulk site.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_spectrum(mps: *const SppkitMps, out: *mut SppkitSpectrum) -> SppkitStatus {
    guard(|| put(out, spectrum_of(&bulk_transfer(&deref(mps, "mps")?.0)?)?))
}

/// Stationary `C(τ)` for `τ = 1..=max_tau` (`max_tau` entries); `f` and `g` hold one value per label.
#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_covariance(
    mps: *const SppkitMps,
    f: *const f64,
    g: *const f64,
    labels: usize,
    max_tau: usize,
    out: *mut f64,
    cap: usize,
) -> SppkitStatus {
    guard(|| {
        let op = bulk_transfer(&deref(mps, "mps")?.0)?;
        let series = covariance_series(&op, slice(f, labels, "f")?, slice(g, labels, "g")?, max_tau)?;
        put_array(&series, out, cap, ptr::null_mut())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sppkit_mps_free(mps: *mut SppkitMps) {
    if !mps.is_null() {
        drop(Box::from_raw(mps));
    }
}

/// Storm chain from rates and per-state emission distributions over (I, X, Y, Z).
#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_new(
    a: f64,
    b: f64,
    q0: *const f64,
    q1: *const f64,
    out: *mut *mut SppkitStorm,
) -> SppkitStatus {
    guard(|| {
        let q = |p: *const f64, name: &str| -> Result<[f64; 4], Failure> {
            Ok(slice(p, 4, name)?.try_into().expect("four entries"))
        };
        let params = StormParams::new(a, b, q(q0, "q0")?, q(q1, "q1")?)?;
        put_handle(out, SppkitStorm(storm_hmm(params)?))
    })
}

/// Storm chain with correlation length `xi` and total marginal error rate,
/// an error-free calm state and storm budget `q1_budget` split evenly.
#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_from_xi(
    xi: f64,
    marginal: f64,
    q1_budget: f64,
    out: *mut *mut SppkitStorm,
) -> SppkitStatus {
    guard(|| {
        let profile = ErrorProfile { q1_error_total: q1_budget, ..Default::default() };
        put_handle(out, SppkitStorm(storm_hmm(solve_params(xi, marginal, &profile)?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_summary(storm: *const SppkitStorm, out: *mut SppkitStormSummary) -> SppkitStatus {
    guard(|| {
        let p = deref(storm, "storm")?.0.params;
        let s = p.analytic_summary()?;
        put(
            out,
            SppkitStormSummary {
                a: p.a,
                b: p.b,
                lambda2: s.lambda2,
                lambda_star: s.lambda_star,
                gap: s.gap,
                correlation_length: s.correlation_length.unwrap_or(f64::INFINITY),
                pi_calm: s.stationary[0],
                pi_storm: s.stationary[1],
                marginals: s.marginals,
            },
        )
    })
}

/// Numerical spectrum of the storm transfer operator.
#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_spectrum(storm: *const SppkitStorm, out: *mut SppkitSpectrum) -> SppkitStatus {
    guard(|| put(out, spectrum_of(&deref(storm, "storm")?.0.transfer_operator()?)?))
}

/// Stationary storm process over `steps` rounds as an MPS.
#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_to_mps(storm: *const SppkitStorm, steps: usize, out: *mut *mut SppkitMps) -> SppkitStatus {
    guard(|| put_handle(out, SppkitMps(deref(storm, "storm")?.0.to_mps(steps)?)))
}

/// Per-qubit fault labels (0=I, 1=X, 2=Y, 3=Z), row-major `[round][qubit]`.
#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_sample_faults(
    storm: *const SppkitStorm,
    qubits: usize,
    rounds: usize,
    seed: u64,
    out: *mut u8,
    cap: usize,
) -> SppkitStatus {
    guard(|| {
        let flat: Vec<u8> = sample_fault_stream(&deref(storm, "storm")?.0, qubits, rounds, seed).concat();
        put_array(&flat, out, cap, ptr::null_mut())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sppkit_storm_free(storm: *mut SppkitStorm) {
    if !storm.is_null() {
        drop(Box::from_raw(storm));
    }
}
