//! C interface to `adiabat-core`.
//!
//! Registries are opaque handles owned by the caller and released with
//! `adiabat_registry_free`. Every entry point returns an `AdiabatStatus`; on
//! anything but `ADIABAT_STATUS_OK` the message is available from
//! `adiabat_last_error` on the same thread until the next call.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adiabat_core::eos::{SimpleState, SpaceRegistry, Units};
use adiabat_core::oracle::{reconstruct_entropy, AccessOracle, CompoundState, OperationalOracle};
use adiabat_core::thermo::{adiabat_simple, equilibrate, DerivedRegistry, JoinPart, Tolerances};
use adiabat_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdiabatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownSpace = 3,
    Domain = 4,
    NotStrict = 5,
    Numerical = 6,
    Infeasible = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdiabatUnits {
    Reduced = 0,
    Si = 1,
}

/// A simple state `(U, V)` of `scale` units of matter in space `space`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdiabatState {
    pub space: *const c_char,
    pub scale: f64,
    pub energy: f64,
    pub volume: f64,
}

/// Opaque handle to a derived registry.
pub struct AdiabatRegistry {
    derived: DerivedRegistry,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(AdiabatStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownSpace(_) => AdiabatStatus::UnknownSpace,
            Error::Domain(_) | Error::OutOfRange { .. } | Error::LeftDomain { .. } | Error::UnreachableTemperature { .. } => {
                AdiabatStatus::Domain
            }
            Error::ReferenceNotStrict => AdiabatStatus::NotStrict,
            Error::Infeasible { .. } | Error::InconsistentQuads { .. } | Error::DisconnectedGraph(_) => {
                AdiabatStatus::Infeasible
            }
            Error::Io(_) => AdiabatStatus::Io,
            Error::Syntax { .. }
            | Error::UnknownFunction { .. }
            | Error::MissingBinding(_)
            | Error::InvalidSpec(_)
            | Error::Json(_)
            | Error::SignatureMismatch { .. } => AdiabatStatus::InvalidArgument,
            _ => AdiabatStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AdiabatStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status plus last-error text.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AdiabatStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            AdiabatStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {message}"));
            AdiabatStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AdiabatStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn registry<'a>(p: *const AdiabatRegistry) -> Result<&'a DerivedRegistry, Failure> {
    p.as_ref().map(|r| &r.derived).ok_or_else(|| null("registry"))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn state(s: &AdiabatState) -> Result<SimpleState, Failure> {
    Ok(SimpleState::new(text(s.space, "state space")?, s.scale, s.energy, s.volume))
}

unsafe fn states(p: *const AdiabatState, n: usize) -> Result<CompoundState, Failure> {
    if n == 0 {
        return Ok(CompoundState::new(Vec::new()));
    }
    if p.is_null() {
        return Err(null("state array"));
    }
    let parts = std::slice::from_raw_parts(p, n).iter().map(|s| state(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(CompoundState::new(parts))
}

fn finish(derived: Result<DerivedRegistry, Error>, out: *mut *mut AdiabatRegistry) -> Result<(), Failure> {
    let handle = Box::into_raw(Box::new(AdiabatRegistry { derived: derived? }));
    // SAFETY: `out` was checked for null by the caller.
    unsafe { out.write(handle) };
    Ok(())
}

/// Message for the last failing call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn adiabat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn adiabat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Derives one of the bundled registries.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn adiabat_registry_bundled(units: AdiabatUnits, out: *mut *mut AdiabatRegistry) -> AdiabatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let units = match units {
            AdiabatUnits::Reduced => Units::Reduced,
            AdiabatUnits::Si => Units::Si,
        };
        finish(DerivedRegistry::derive(&SpaceRegistry::bundled(units)), out)
    })
}

/// Parses and derives a registry from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn adiabat_registry_from_json(json: *const c_char, out: *mut *mut AdiabatRegistry) -> AdiabatStatus {
    guard(|| {
        let json = text(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        finish(SpaceRegistry::from_json(json).and_then(|r| DerivedRegistry::derive(&r)), out)
    })
}

/// Releases a registry. Null is ignored.
///
/// # Safety
/// `registry` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adiabat_registry_free(registry: *mut AdiabatRegistry) {
    if !registry.is_null() {
        drop(Box::from_raw(registry));
    }
}

/// Number of spaces in the registry.
///
/// # Safety
/// `registry` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn adiabat_registry_len(registry: *const AdiabatRegistry, out: *mut usize) -> AdiabatStatus {
    guard(|| put(out, self::registry(registry)?.ids().count(), "out"))
}

/// Absolute temperature at empirical temperature `theta`.
///
/// # Safety
/// Pointers must be valid; `space` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn adiabat_temperature(
    registry: *const AdiabatRegistry,
    space: *const c_char,
    theta: f64,
    out: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let t = self::registry(registry)?.get(text(space, "space")?)?.temperature(theta)?;
        put(out, t, "out")
    })
}

/// Entropy of a state, with scale 1 and offset 0 in every space.
///
/// # Safety
/// Pointers must be valid; the state's space NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn adiabat_entropy(
    registry: *const AdiabatRegistry,
    state: *const AdiabatState,
    out: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let s = self::state(state.as_ref().ok_or_else(|| null("state"))?)?;
        put(out, self::registry(registry)?.raw_entropy(&s)?, "out")
    })
}

/// Energy reached by following the adiabat through `state` to volume `volume`.
///
/// # Safety
/// Pointers must be valid; the state's space NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn adiabat_adiabat_energy(
    registry: *const AdiabatRegistry,
    state: *const AdiabatState,
    volume: f64,
    out: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let s = self::state(state.as_ref().ok_or_else(|| null("state"))?)?;
        let spec = self::registry(registry)?.spec(&s.space)?;
        let curve = adiabat_simple(spec, s.scale, s.energy, s.volume, volume, Tolerances::default().ode)?;
        put(out, curve.end_energy(), "out")
    })
}

/// Compares two compound states with the operational oracle. `forward` is set
/// when `a` precedes `b`, `backward` when `b` precedes `a`.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` states; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adiabat_compare(
    registry: *const AdiabatRegistry,
    a: *const AdiabatState,
    na: usize,
    b: *const AdiabatState,
    nb: usize,
    forward: *mut c_int,
    backward: *mut c_int,
) -> AdiabatStatus {
    guard(|| {
        let reg = self::registry(registry)?;
        let (a, b) = (states(a, na)?, states(b, nb)?);
        if forward.is_null() || backward.is_null() {
            return Err(null("verdict output"));
        }
        let v = OperationalOracle::new(reg).verdict(&a, &b)?;
        put(forward, v.forward as c_int, "forward")?;
        put(backward, v.backward as c_int, "backward")
    })
}

/// Entropy of `x` on the scale with `x0` at 0 and `x1` at 1, found from the
/// order relation alone to within `tol`.
///
/// # Safety
/// State pointers must be valid; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adiabat_reconstruct(
    registry: *const AdiabatRegistry,
    x0: *const AdiabatState,
    x1: *const AdiabatState,
    x: *const AdiabatState,
    tol: f64,
    lambda_minus: *mut f64,
    lambda_plus: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let reg = self::registry(registry)?;
        let get = |p: *const AdiabatState, what| state(p.as_ref().ok_or_else(|| null(what))?);
        let (x0, x1, x) = (get(x0, "x0")?, get(x1, "x1")?, get(x, "x")?);
        if !(tol > 0.0) {
            return Err(Failure(AdiabatStatus::InvalidArgument, format!("tolerance {tol} is not positive")));
        }
        if lambda_minus.is_null() || lambda_plus.is_null() {
            return Err(null("lambda output"));
        }
        let r = reconstruct_entropy(&OperationalOracle::new(reg), &x0, &x1, &x, tol)?;
        put(lambda_minus, r.lambda_minus, "lambda_minus")?;
        put(lambda_plus, r.lambda_plus, "lambda_plus")
    })
}

/// Shares `total_energy` between `n` systems at fixed volumes so that they end
/// at one temperature. Writes the common empirical temperature and each
/// system's energy into `energies` (length `n`).
///
/// # Safety
/// `states` must point to `n` states and `energies` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn adiabat_equilibrate(
    registry: *const AdiabatRegistry,
    states: *const AdiabatState,
    n: usize,
    total_energy: f64,
    theta: *mut f64,
    energies: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let reg = self::registry(registry)?;
        let c = self::states(states, n)?;
        let specs = c
            .components
            .iter()
            .map(|s| reg.spec(&s.space))
            .collect::<Result<Vec<_>, _>>()?;
        let parts: Vec<JoinPart<'_>> = specs
            .iter()
            .zip(&c.components)
            .map(|(spec, s)| JoinPart::new(spec, s.scale, s.volume))
            .collect();
        let eq = equilibrate(&parts, total_energy)?;
        if energies.is_null() && n > 0 {
            return Err(null("energies"));
        }
        put(theta, eq.theta, "theta")?;
        if n > 0 {
            ptr::copy_nonoverlapping(eq.energies.as_ptr(), energies, n);
        }
        Ok(())
    })
}
