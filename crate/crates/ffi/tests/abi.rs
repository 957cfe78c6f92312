use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use kato_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = kato_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Run {
    problem: *mut KatoProblem,
    scheme: *mut KatoScheme,
    mesh: *mut KatoMesh,
}

impl Run {
    fn new(problem: &str, scheme: &str, contour: &str) -> Run {
        let mut run = Run {
            problem: ptr::null_mut(),
            scheme: ptr::null_mut(),
            mesh: ptr::null_mut(),
        };
        unsafe {
            assert_eq!(
                kato_problem_new(cstr(problem).as_ptr(), &mut run.problem),
                KatoStatus::Ok
            );
            assert_eq!(kato_scheme_new(cstr(scheme).as_ptr(), &mut run.scheme), KatoStatus::Ok);
            assert_eq!(kato_mesh_new(cstr(contour).as_ptr(), &mut run.mesh), KatoStatus::Ok);
        }
        run
    }
}

impl Drop for Run {
    fn drop(&mut self) {
        unsafe {
            kato_mesh_free(self.mesh);
            kato_scheme_free(self.scheme);
            kato_problem_free(self.problem);
        }
    }
}

#[test]
fn continue_through_the_abi_matches_the_library() {
    let run = Run::new("rank1", "rich2", "circle:0,0:0.5:32");
    let mut report = ptr::null_mut();
    let status = unsafe { kato_continue(run.problem, run.scheme, run.mesh, ptr::null(), 0, 0, false, &mut report) };
    assert_eq!(status, KatoStatus::Ok);
    assert_eq!(unsafe { kato_report_frames(report) }, 33);

    let mut closure = f64::NAN;
    assert_eq!(
        unsafe { kato_report_closure_error(report, &mut closure) },
        KatoStatus::Ok
    );

    let spec = kato::problems::family_rank1();
    let mesh = "circle:0,0:0.5:32"
        .parse::<kato::contour::ContourSpec>()
        .unwrap()
        .mesh()
        .unwrap();
    let r0 = kato::contour::auto_basis(spec.family.as_ref(), mesh.start()).unwrap();
    let lib = kato::contour::continue_basis(
        spec.family.as_ref(),
        &kato::schemes::SchemeSpec::Rich2,
        &mesh,
        &r0,
        &kato::contour::RunOptions::default(),
    )
    .unwrap();
    assert_eq!(closure, lib.closure_error.unwrap());

    let mut lambda = KatoComplex::default();
    let mut basis = [KatoComplex::default(); 2];
    assert_eq!(
        unsafe { kato_report_frame(report, 17, &mut lambda, basis.as_mut_ptr(), 2) },
        KatoStatus::Ok
    );
    assert_eq!(lambda.re, lib.frames[17].lambda.re);
    assert_eq!(basis[1].im, lib.frames[17].r[(1, 0)].im);

    let mut counters = KatoCounters::default();
    assert_eq!(unsafe { kato_report_counters(report, &mut counters) }, KatoStatus::Ok);
    assert_eq!((counters.steps, counters.p_evals, counters.mat_mults), (32, 64, 64));

    unsafe { kato_report_free(report) };
}

#[test]
fn explicit_basis_and_init_policy() {
    let run = Run::new("rank1", "greedy1", "circle:0,0:0.5:16");
    // e2 is not in range P(0.5)
    let e2 = [KatoComplex { re: 0.0, im: 0.0 }, KatoComplex { re: 1.0, im: 0.0 }];
    let mut report = ptr::null_mut();
    let status = unsafe { kato_continue(run.problem, run.scheme, run.mesh, e2.as_ptr(), 2, 1, false, &mut report) };
    assert_eq!(status, KatoStatus::InitNotInRange);
    assert!(!kato_status_is_numerical(status));
    assert!(report.is_null());
    assert!(last_error().contains("range"));

    let status = unsafe { kato_continue(run.problem, run.scheme, run.mesh, e2.as_ptr(), 2, 1, true, &mut report) };
    assert_eq!(status, KatoStatus::Ok);
    unsafe { kato_report_free(report) };

    let status = unsafe { kato_continue(run.problem, run.scheme, run.mesh, e2.as_ptr(), 1, 2, false, &mut report) };
    assert_eq!(status, KatoStatus::DimensionMismatch);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { kato_problem_new(cstr("nosuch").as_ptr(), &mut problem) },
        KatoStatus::InvalidArgument
    );
    assert!(last_error().contains("nosuch"));
    assert_eq!(
        unsafe { kato_problem_new(ptr::null(), &mut problem) },
        KatoStatus::NullPointer
    );
    assert!(problem.is_null());

    let mut mesh = ptr::null_mut();
    assert_eq!(
        unsafe { kato_mesh_new(cstr("circle:0,0").as_ptr(), &mut mesh) },
        KatoStatus::Parse
    );

    let run = Run::new("rank1", "greedy1", "circle:0,0:2:16");
    let mut report = ptr::null_mut();
    let status = unsafe { kato_continue(run.problem, run.scheme, run.mesh, ptr::null(), 0, 0, false, &mut report) };
    assert_eq!(status, KatoStatus::DomainViolation);
    assert!(kato_status_is_numerical(status));

    let mut out = [KatoComplex::default(); 3];
    let status = unsafe { kato_problem_eval(run.problem, KatoComplex { re: 0.5, im: 0.0 }, out.as_mut_ptr(), 3) };
    assert_eq!(status, KatoStatus::BufferTooSmall);
}

#[test]
fn open_mesh_has_no_closure_error() {
    let run = Run::new("evans-toy", "greedy2", "polyline:1,0;1.2,0.3;1.4,0:8");
    assert!(!unsafe { kato_mesh_closed(run.mesh) });
    assert_eq!(unsafe { kato_mesh_points(run.mesh) }, 17);
    let mut report = ptr::null_mut();
    let status = unsafe { kato_continue(run.problem, run.scheme, run.mesh, ptr::null(), 0, 0, false, &mut report) };
    assert_eq!(status, KatoStatus::Ok);
    let mut closure = 0.0;
    assert_eq!(
        unsafe { kato_report_closure_error(report, &mut closure) },
        KatoStatus::InvalidArgument
    );
    let (mut d, mut dr) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { kato_report_drift(report, &mut d, &mut dr) }, KatoStatus::Ok);
    assert!(dr <= 1e-12);
    unsafe { kato_report_free(report) };
}

#[test]
fn problem_eval_and_projector() {
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { kato_problem_new(cstr("rank1").as_ptr(), &mut problem) },
        KatoStatus::Ok
    );
    assert_eq!(
        unsafe { (kato_problem_dim(problem), kato_problem_rank(problem)) },
        (2, 1)
    );
    let mut p = [KatoComplex::default(); 4];
    assert_eq!(
        unsafe { kato_problem_eval(problem, KatoComplex { re: 0.5, im: 0.0 }, p.as_mut_ptr(), 4) },
        KatoStatus::Ok
    );
    let expect = [0.8, 0.4, 0.4, 0.2];
    for (z, e) in p.iter().zip(expect) {
        assert!((z.re - e).abs() < 1e-15 && z.im == 0.0);
    }
    unsafe { kato_problem_free(problem) };

    let re = |x: f64| KatoComplex { re: x, im: 0.0 };
    let a = [re(0.0), re(1.0), re(4.0), re(0.0)];
    let mut out = [KatoComplex::default(); 4];
    let mut rank = 0usize;
    let status = unsafe { kato_stable_projector(a.as_ptr(), 2, KatoHalf::Stable, out.as_mut_ptr(), 4, &mut rank) };
    assert_eq!(status, KatoStatus::Ok);
    assert_eq!(rank, 1);
    let expect = [0.5, -0.25, -1.0, 0.5];
    for (z, e) in out.iter().zip(expect) {
        assert!((z.re - e).abs() < 1e-12 && z.im.abs() < 1e-12);
    }

    let imaginary = [re(0.0), re(-1.0), re(1.0), re(0.0)];
    let status =
        unsafe { kato_stable_projector(imaginary.as_ptr(), 2, KatoHalf::Stable, out.as_mut_ptr(), 4, &mut rank) };
    assert_eq!(status, KatoStatus::SpectralGapViolation);
}

#[test]
fn scheme_orders() {
    for (id, order) in [
        ("greedy1", 1),
        ("brz1", 1),
        ("greedy2", 2),
        ("rich3", 3),
        ("lift:greedy3", 4),
    ] {
        let mut scheme = ptr::null_mut();
        assert_eq!(
            unsafe { kato_scheme_new(cstr(id).as_ptr(), &mut scheme) },
            KatoStatus::Ok
        );
        assert_eq!(unsafe { kato_scheme_order(scheme) }, order);
        unsafe { kato_scheme_free(scheme) };
    }
    assert_eq!(unsafe { kato_scheme_order(ptr::null()) }, 0);
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_c_client_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include/kato.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in [
        "kato_continue",
        "kato_report_frame",
        "KATO_STATUS_RANK_COLLAPSE",
        "typedef struct KatoReport KatoReport",
    ] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    if !have_cc() {
        eprintln!("cc not found; C client not built");
        return;
    }
    let lib = target_dir().join("libkato_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let build = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("steps=64 p_evals=128 mults=192"));
}
