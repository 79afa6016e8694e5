use std::ffi::{c_int, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use adiabat_ffi::*;

struct Registry(*mut AdiabatRegistry);

impl Registry {
    fn reduced() -> Self {
        let mut p = ptr::null_mut();
        assert_eq!(unsafe { adiabat_registry_bundled(AdiabatUnits::Reduced, &mut p) }, AdiabatStatus::Ok);
        assert!(!p.is_null());
        Registry(p)
    }
}

impl Drop for Registry {
    fn drop(&mut self) {
        unsafe { adiabat_registry_free(self.0) };
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(adiabat_last_error()) }.to_string_lossy().into_owned()
}

fn st(space: &CStr, scale: f64, u: f64, v: f64) -> AdiabatState {
    AdiabatState {
        space: space.as_ptr(),
        scale,
        energy: u,
        volume: v,
    }
}

const IDEAL: &CStr = c"ideal_reduced";

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(adiabat_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn temperature_and_entropy_of_the_ideal_gas() {
    let reg = Registry::reduced();
    let mut t = 0.0;
    assert_eq!(unsafe { adiabat_temperature(reg.0, IDEAL.as_ptr(), 2.5, &mut t) }, AdiabatStatus::Ok);
    assert!((t - 2.5).abs() < 1e-8);
    // isothermal doubling of the volume adds ln 2
    let (mut s1, mut s2) = (0.0, 0.0);
    unsafe {
        assert_eq!(adiabat_entropy(reg.0, &st(IDEAL, 1.0, 1.5, 1.0), &mut s1), AdiabatStatus::Ok);
        assert_eq!(adiabat_entropy(reg.0, &st(IDEAL, 1.0, 1.5, 2.0), &mut s2), AdiabatStatus::Ok);
    }
    assert!((s2 - s1 - std::f64::consts::LN_2).abs() < 1e-8);
    assert_eq!(last_error(), "");
}

#[test]
fn adiabat_and_compare() {
    let reg = Registry::reduced();
    let mut u = 0.0;
    assert_eq!(
        unsafe { adiabat_adiabat_energy(reg.0, &st(IDEAL, 1.0, 1.0, 1.0), 8.0, &mut u) },
        AdiabatStatus::Ok
    );
    assert!((u - 0.25).abs() < 1e-9 * 0.25);
    let a = [st(IDEAL, 0.5, 0.5, 0.5), st(IDEAL, 0.5, 0.5, 0.5)];
    let b = [st(IDEAL, 1.0, 1.0, 1.0)];
    let (mut f, mut bw): (c_int, c_int) = (0, 0);
    assert_eq!(
        unsafe { adiabat_compare(reg.0, a.as_ptr(), 2, b.as_ptr(), 1, &mut f, &mut bw) },
        AdiabatStatus::Ok
    );
    assert_eq!((f, bw), (1, 1));
    let c = [st(IDEAL, 2.0, 2.0, 2.0)];
    assert_eq!(
        unsafe { adiabat_compare(reg.0, a.as_ptr(), 2, c.as_ptr(), 1, &mut f, &mut bw) },
        AdiabatStatus::InvalidArgument
    );
    assert!(last_error().contains("matter content"), "{}", last_error());
}

#[test]
fn reconstruction_and_precondition() {
    let reg = Registry::reduced();
    let (x0, x1) = (st(IDEAL, 1.0, 1.5, 1.0), st(IDEAL, 1.0, 3.0, 1.0));
    let x = st(IDEAL, 1.0, 1.5 * 2f64.sqrt(), 1.0);
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(
        unsafe { adiabat_reconstruct(reg.0, &x0, &x1, &x, 1e-4, &mut lo, &mut hi) },
        AdiabatStatus::Ok
    );
    assert!((0.5 * (lo + hi) - 0.5).abs() < 1e-3 && hi - lo <= 2e-4);
    assert_eq!(
        unsafe { adiabat_reconstruct(reg.0, &x1, &x0, &x, 1e-4, &mut lo, &mut hi) },
        AdiabatStatus::NotStrict
    );
    assert_eq!(
        unsafe { adiabat_reconstruct(reg.0, &x0, &x1, &x, 0.0, &mut lo, &mut hi) },
        AdiabatStatus::InvalidArgument
    );
}

#[test]
fn equilibration_of_equal_halves() {
    let reg = Registry::reduced();
    let parts = [st(IDEAL, 1.0, 0.0, 1.0), st(IDEAL, 1.0, 0.0, 1.0)];
    let mut theta = 0.0;
    let mut energies = [0.0; 2];
    assert_eq!(
        unsafe { adiabat_equilibrate(reg.0, parts.as_ptr(), 2, 6.0, &mut theta, energies.as_mut_ptr()) },
        AdiabatStatus::Ok
    );
    assert!((theta - 2.0).abs() < 1e-12);
    assert!((energies[0] - 3.0).abs() < 1e-12 && (energies[1] - 3.0).abs() < 1e-12);
}

#[test]
fn errors_map_to_status_codes() {
    let reg = Registry::reduced();
    let mut out = 0.0;
    unsafe {
        assert_eq!(adiabat_temperature(ptr::null(), IDEAL.as_ptr(), 1.0, &mut out), AdiabatStatus::NullPointer);
        assert_eq!(adiabat_temperature(reg.0, ptr::null(), 1.0, &mut out), AdiabatStatus::NullPointer);
        assert_eq!(adiabat_temperature(reg.0, IDEAL.as_ptr(), 1.0, ptr::null_mut()), AdiabatStatus::NullPointer);
        assert_eq!(
            adiabat_temperature(reg.0, c"argon".as_ptr(), 1.0, &mut out),
            AdiabatStatus::UnknownSpace
        );
        assert_eq!(adiabat_temperature(reg.0, IDEAL.as_ptr(), 1e6, &mut out), AdiabatStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(
            adiabat_adiabat_energy(reg.0, &st(IDEAL, 1.0, 1.0, 1.0), 1e5, &mut out),
            AdiabatStatus::Domain
        );
    }
}

#[test]
fn registry_from_json() {
    let json = CString::new(
        r#"{"spaces":[{"id":"g","U":"1.5*theta","P":"theta/v",
            "domain":{"theta":[0.1,10],"v":[0.01,100]},"reference":{"theta":1,"v":1}}]}"#,
    )
    .unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { adiabat_registry_from_json(json.as_ptr(), &mut p) }, AdiabatStatus::Ok);
    let reg = Registry(p);
    let mut n = 0;
    assert_eq!(unsafe { adiabat_registry_len(reg.0, &mut n) }, AdiabatStatus::Ok);
    assert_eq!(n, 1);
    let bad = CString::new(r#"{"spaces":[{"id":"g","U":"1.5*theta +","P":"theta/v"}]}"#).unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(
        unsafe { adiabat_registry_from_json(bad.as_ptr(), &mut q) },
        AdiabatStatus::InvalidArgument
    );
    assert!(q.is_null());
    unsafe { adiabat_registry_free(ptr::null_mut()) };
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib = target_dir().join("libadiabat_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new(&cc)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
