use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lvcomp_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let len = unsafe { lvc_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(len.min(255));
    String::from_utf8(buf).unwrap()
}

fn params(a1: f64, a2: f64, c1: f64, c2: f64, p: f64, q: f64) -> *mut LvcParams {
    let mut h = ptr::null_mut();
    let s = unsafe { lvc_params_new(a1, a2, 1.0, 1.0, c1, c2, p, q, &mut h) };
    assert_eq!(s, LvcStatus::Ok, "{}", last_error());
    h
}

#[test]
fn params_regime_and_rhs() {
    let k = params(1.0, 1.0, 2.0, 2.0, 1.0, 1.0);
    let mut r = LvcRegime::Degenerate;
    unsafe {
        assert_eq!(lvc_params_regime(k, &mut r), LvcStatus::Ok);
        assert_eq!(r, LvcRegime::StrongCompetition);
        let (mut du, mut dv) = (0.0, 0.0);
        assert_eq!(lvc_rhs(k, 0.5, 0.25, &mut du, &mut dv), LvcStatus::Ok);
        assert!((du - (0.5 - 0.25 - 2.0 * 0.125)).abs() < 1e-15);
        assert!((dv - (0.25 - 0.0625 - 2.0 * 0.125)).abs() < 1e-15);
        lvc_params_free(k);
    }
}

#[test]
fn invalid_arguments_set_the_message() {
    let mut h = ptr::null_mut();
    let s = unsafe { lvc_params_new(1.8, 3.0, 1.0, 1.0, 0.5, 1.8, 1.5, 1.0, &mut h) };
    assert_eq!(s, LvcStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains('p'), "{}", last_error());
    let s = unsafe { lvc_params_new(1.8, 3.0, 1.0, 1.0, 0.5, 1.8, 1.0, 1.0, ptr::null_mut()) };
    assert_eq!(s, LvcStatus::NullPointer);
    let k = params(1.8, 3.0, 0.5, 1.8, 1.0, 1.0);
    let mut f = 0.0;
    assert_eq!(unsafe { lvc_fte_threshold(k, 0.5, &mut f) }, LvcStatus::InvalidArgument);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { lvc_integrate(k, -1.0, 1.0, 10.0, 0.0, 0.0, &mut t) }, LvcStatus::InvalidArgument);
    unsafe { lvc_params_free(k) };
    // success clears the message
    let k = params(1.8, 3.0, 0.5, 1.8, 1.0, 1.0);
    assert_eq!(last_error(), "");
    unsafe { lvc_params_free(k) };
}

#[test]
fn equilibria_buffer_protocol() {
    let k = params(1.8, 3.0, 0.5, 1.8, 1.0, 0.3);
    let mut n = 0;
    unsafe {
        assert_eq!(lvc_equilibria(k, ptr::null_mut(), 0, &mut n), LvcStatus::BufferTooSmall);
        assert_eq!(n, 5);
        let mut buf = vec![
            LvcEquilibrium {
                u: 0.0,
                v: 0.0,
                kind: LvcEquilibriumKind::Origin,
                stability: LvcStability::Unclassifiable,
                trace: 0.0,
                det: 0.0
            };
            n
        ];
        assert_eq!(lvc_equilibria(k, buf.as_mut_ptr(), buf.len(), &mut n), LvcStatus::Ok);
        let saddle =
            buf.iter().find(|e| e.kind == LvcEquilibriumKind::Interior && e.stability == LvcStability::Saddle).unwrap();
        assert!((saddle.u - 1.1323).abs() < 1e-3 && (saddle.v - 1.3354).abs() < 1e-3);
        assert!((saddle.trace + 1.3025).abs() < 1e-3 && (saddle.det + 0.9188).abs() < 1e-3);
        assert!(buf.iter().any(|e| e.kind == LvcEquilibriumKind::Interior && e.stability == LvcStability::Sink));
        lvc_params_free(k);
    }
}

#[test]
fn trajectory_handle() {
    let k = params(1.8, 3.0, 0.5, 1.8, 0.4, 1.0);
    unsafe {
        let mut f = 0.0;
        assert_eq!(lvc_fte_threshold(k, 1.0, &mut f), LvcStatus::Ok);
        assert!((f - 14.4).abs() < 1e-12);
        let mut traj = ptr::null_mut();
        assert_eq!(lvc_integrate(k, 0.8, 18.0, 200.0, 0.0, 0.0, &mut traj), LvcStatus::Ok);
        let mut len = 0;
        assert_eq!(lvc_trajectory_len(traj, &mut len), LvcStatus::Ok);
        assert!(len > 2);
        let (mut t, mut u, mut v) = (0.0, 0.0, 0.0);
        assert_eq!(lvc_trajectory_sample(traj, 0, &mut t, &mut u, &mut v), LvcStatus::Ok);
        assert_eq!((t, u, v), (0.0, 0.8, 18.0));
        assert_eq!(lvc_trajectory_sample(traj, len, &mut t, &mut u, &mut v), LvcStatus::OutOfRange);
        let mut ts = 0.0;
        assert_eq!(lvc_trajectory_extinction_time(traj, LvcSpecies::U, &mut ts), LvcStatus::Ok);
        assert!(ts > 0.0 && ts.is_finite());
        assert_eq!(lvc_trajectory_extinction_time(traj, LvcSpecies::V, &mut ts), LvcStatus::Ok);
        assert!(ts.is_nan());
        let mut decided = 0;
        assert_eq!(lvc_trajectory_terminal(traj, &mut u, &mut v, &mut decided), LvcStatus::Ok);
        assert_eq!(decided, 1);
        assert!(u.abs() < 1e-12 && (v - 3.0).abs() < 1e-4);
        lvc_trajectory_free(traj);
        lvc_params_free(k);
    }
}

#[test]
fn comparison_equation() {
    let (mut g, mut ts) = (0.0, 0.0);
    unsafe {
        assert_eq!(lvc_comparison(2.0, 0.3, 0.4, 0.5, 0.2, 0.0, &mut g, &mut ts), LvcStatus::Ok);
        assert!((g - 0.2).abs() < 1e-14);
        assert!(ts > 0.0);
        assert_eq!(lvc_comparison(1.0, 1.0, 0.5, 0.5, 1.0, 1.0, &mut g, &mut ts), LvcStatus::Ok);
        assert!(ts.is_nan());
        assert_eq!(lvc_comparison(1.0, 1.0, 0.5, 1.5, 1.0, 1.0, &mut g, &mut ts), LvcStatus::InvalidArgument);
    }
}

#[test]
fn resource_driven_pde() {
    let n = 64;
    let m: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).map(|x| x * (1.0 - x)).collect();
    let mut u: Vec<f64> = m.iter().map(|x| 0.5 * x + 0.01).collect();
    let mut v = u.clone();
    let mut summary = LvcPdeSummary {
        outcome: LvcOutcome::Undecided,
        t_reached: 0.0,
        u_extinction_time: 0.0,
        v_extinction_time: 0.0,
        steps: 0,
    };
    let s = unsafe {
        lvc_pde_inhomogeneous(
            m.as_ptr(),
            n,
            1.0,
            0.999,
            0.999,
            0.7,
            0.00012425,
            0.00033167,
            5e4,
            u.as_mut_ptr(),
            v.as_mut_ptr(),
            &mut summary,
        )
    };
    assert_eq!(s, LvcStatus::Ok, "{}", last_error());
    assert_eq!(summary.outcome, LvcOutcome::VWins);
    assert!(summary.u_extinction_time.is_finite() && summary.v_extinction_time.is_nan());
    assert!(u.iter().all(|x| *x == 0.0));
    assert!(v.iter().any(|x| *x > 1e-2));

    let s = unsafe {
        lvc_pde_inhomogeneous(
            m.as_ptr(),
            4,
            1.0,
            0.999,
            0.999,
            0.7,
            1e-3,
            1e-3,
            1.0,
            u.as_mut_ptr(),
            v.as_mut_ptr(),
            &mut summary,
        )
    };
    assert_eq!(s, LvcStatus::InvalidArgument);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/lvcomp.h")).unwrap();
    for name in [
        "lvc_last_error_message",
        "lvc_params_new",
        "lvc_params_free",
        "lvc_equilibria",
        "lvc_integrate",
        "lvc_trajectory_free",
        "lvc_comparison",
        "lvc_pde_inhomogeneous",
        "typedef struct LvcParams LvcParams",
        "LVC_STATUS_NUMERICAL_FAILURE = 3",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("liblvcomp_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
