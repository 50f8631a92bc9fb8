use dirac_lab_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { dl_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(dl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dirac_lab.h")).unwrap();
    for sym in ["dl_problem_new", "dl_scattering_compute", "DL_STATUS_BUFFER_TOO_SMALL", "typedef struct DlProblem DlProblem"] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    let mut fam = ptr::null_mut();
    let name = CString::new("no-such-family").unwrap();
    let s = unsafe { dl_family_builtin(name.as_ptr(), f64::NAN, &mut fam) };
    assert_eq!(s, DlStatus::Config);
    assert!(fam.is_null());
    assert!(last_error().contains("no-such-family"));

    assert_eq!(unsafe { dl_family_builtin(ptr::null(), 1.0, &mut fam) }, DlStatus::NullPointer);
    let mut dim = 0usize;
    assert_eq!(unsafe { dl_problem_dim(ptr::null(), &mut dim) }, DlStatus::NullPointer);

    let bad = CString::new("name = \"bump\"\nmu = \"fast\"").unwrap();
    assert_ne!(unsafe { dl_family_from_toml(bad.as_ptr(), &mut fam) }, DlStatus::Ok);

    // freeing null is a no-op
    unsafe {
        dl_family_free(ptr::null_mut());
        dl_problem_free(ptr::null_mut());
        dl_scattering_free(ptr::null_mut());
    }
}

#[test]
fn odd_grid_is_rejected() {
    let name = CString::new("bump").unwrap();
    let mut fam = ptr::null_mut();
    assert_eq!(unsafe { dl_family_builtin(name.as_ptr(), 1.5, &mut fam) }, DlStatus::Ok);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dl_problem_new(fam, 7, &mut p) }, DlStatus::Config);
    unsafe { dl_family_free(fam) };
}

#[test]
fn flat_hamiltonian_is_hermitian_and_buffer_checked() {
    let name = CString::new("flat").unwrap();
    let mut fam = ptr::null_mut();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(dl_family_builtin(name.as_ptr(), f64::NAN, &mut fam), DlStatus::Ok);
        assert_eq!(dl_problem_new(fam, 8, &mut p), DlStatus::Ok);
        let mut n = 0usize;
        assert_eq!(dl_problem_dim(p, &mut n), DlStatus::Ok);
        assert_eq!(n, 16);
        let mut buf = vec![0.0; 2 * n * n];
        assert_eq!(dl_problem_hamiltonian(p, 0.0, buf.as_mut_ptr(), buf.len() - 1), DlStatus::BufferTooSmall);
        assert_eq!(dl_problem_hamiltonian(p, 0.0, buf.as_mut_ptr(), buf.len()), DlStatus::Ok);
        for i in 0..n {
            for j in 0..n {
                let a = 2 * (i * n + j);
                let b = 2 * (j * n + i);
                assert!((buf[a] - buf[b]).abs() < 1e-12 && (buf[a + 1] + buf[b + 1]).abs() < 1e-12);
            }
        }
        dl_problem_free(p);
        dl_family_free(fam);
    }
}

#[test]
fn scattering_projection_round_trip() {
    let toml = CString::new("name = \"bump\"\nmu = 1.5").unwrap();
    let mut fam = ptr::null_mut();
    let mut p = ptr::null_mut();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(dl_family_from_toml(toml.as_ptr(), &mut fam), DlStatus::Ok, "{}", last_error());
        assert_eq!(dl_problem_new(fam, 8, &mut p), DlStatus::Ok);
        assert_eq!(dl_scattering_compute(p, DlDirection::Out, 80.0, 1e-6, &mut s), DlStatus::Ok, "{}", last_error());
        let (mut mu, mut tail, mut res) = (0.0, 0.0, 0.0);
        assert_eq!(dl_scattering_mu_hat(s, &mut mu), DlStatus::Ok);
        assert_eq!(dl_scattering_tail_bound(s, &mut tail), DlStatus::Ok);
        assert_eq!(dl_scattering_residual(s, &mut res), DlStatus::Ok);
        assert!(mu.is_finite() && mu > 0.5, "mu_hat {mu}");
        assert!(tail.is_finite() && tail >= 0.0);
        assert!(res < 1e-10, "residual {res}");

        let n = 16;
        let mut plus = vec![0.0; 2 * n * n];
        let mut minus = vec![0.0; 2 * n * n];
        assert_eq!(dl_scattering_projection(s, 1, plus.as_mut_ptr(), plus.len()), DlStatus::Ok);
        assert_eq!(dl_scattering_projection(s, -1, minus.as_mut_ptr(), minus.len()), DlStatus::Ok);
        // c+ + c- = 1
        for i in 0..n {
            for j in 0..n {
                let k = 2 * (i * n + j);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((plus[k] + minus[k] - want).abs() < 1e-9);
                assert!((plus[k + 1] + minus[k + 1]).abs() < 1e-9);
            }
        }
        dl_scattering_free(s);
        dl_problem_free(p);
        dl_family_free(fam);
    }
}
