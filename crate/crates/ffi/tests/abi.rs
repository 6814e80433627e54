use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stencilkit_ffi::*;

fn seven_point() -> SkStencilSpec {
    SkStencilSpec {
        dimensions: 3,
        radius: 1,
        kind: SkStencilKind::Star as u32,
        weighting: SkWeighting::Homogeneous as u32,
        storage: SkCoefficientStorage::Constant as u32,
        element: SkElementType::Float64 as u32,
    }
}

fn kernel(spec: SkStencilSpec) -> *mut SkKernel {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { sk_kernel_new(&spec, &mut k) }, SkStatus::Ok);
    assert!(!k.is_null());
    k
}

fn machine(name: &str) -> *mut SkMachine {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sk_machine_load(name.as_ptr(), &mut m) }, SkStatus::Ok);
    m
}

fn last_error() -> String {
    let p = sk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_shape() {
    let k = kernel(seven_point());
    let mut n = 0;
    let mut ops = SkOpCounts::default();
    unsafe {
        assert_eq!(sk_kernel_term_count(k, &mut n), SkStatus::Ok);
        assert_eq!(sk_kernel_op_counts(k, &mut ops), SkStatus::Ok);
        sk_kernel_free(k);
    }
    assert_eq!(n, 7);
    // c0 * (sum of 7 reads)
    assert_eq!((ops.adds, ops.muls, ops.loads, ops.stores), (6, 1, 7, 1));

    let box_r2 = SkStencilSpec {
        kind: SkStencilKind::Box as u32,
        radius: 2,
        ..seven_point()
    };
    let k = kernel(box_r2);
    unsafe {
        sk_kernel_term_count(k, &mut n);
        sk_kernel_free(k);
    }
    assert_eq!(n, 125);
}

#[test]
fn invalid_arguments_report_codes_and_messages() {
    let mut k = ptr::null_mut();
    let bad_kind = SkStencilSpec {
        kind: 9,
        ..seven_point()
    };
    assert_eq!(unsafe { sk_kernel_new(&bad_kind, &mut k) }, SkStatus::InvalidArgument);
    assert!(last_error().contains("kind"));
    assert!(k.is_null());

    let bad_dim = SkStencilSpec {
        dimensions: 4,
        ..seven_point()
    };
    assert_eq!(unsafe { sk_kernel_new(&bad_dim, &mut k) }, SkStatus::UnsupportedStencil);

    assert_eq!(unsafe { sk_kernel_new(ptr::null(), &mut k) }, SkStatus::NullPointer);
    assert_eq!(
        unsafe { sk_kernel_term_count(ptr::null(), ptr::null_mut()) },
        SkStatus::NullPointer
    );

    let missing = CString::new("/nonexistent/machine.toml").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sk_machine_load(missing.as_ptr(), &mut m) }, SkStatus::Io);

    let broken = CString::new("name = 3").unwrap();
    assert_eq!(unsafe { sk_machine_parse(broken.as_ptr(), &mut m) }, SkStatus::Machine);
    assert!(m.is_null());

    // freeing null handles is a no-op
    unsafe {
        sk_kernel_free(ptr::null_mut());
        sk_machine_free(ptr::null_mut());
        sk_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_thread_local() {
    let mut k = ptr::null_mut();
    let bad = SkStencilSpec {
        weighting: 77,
        ..seven_point()
    };
    assert_ne!(unsafe { sk_kernel_new(&bad, &mut k) }, SkStatus::Ok);
    let other = std::thread::spawn(|| sk_last_error_message().is_null()).join().unwrap();
    assert!(other);
    assert!(last_error().contains("weighting"));
}

#[test]
fn emitted_source_matches_library() {
    let k = kernel(seven_point());
    let mut src = ptr::null_mut();
    assert_eq!(unsafe { sk_kernel_emit_c(k, false, 0, &mut src) }, SkStatus::Ok);
    let text = unsafe { CStr::from_ptr(src) }.to_str().unwrap().to_owned();
    unsafe { sk_string_free(src) };

    let spec = stencilkit::stencil::StencilSpec::new(
        3,
        1,
        stencilkit::stencil::StencilKind::Star,
        stencilkit::stencil::Weighting::Homogeneous,
        stencilkit::stencil::CoefficientStorage::Constant,
        stencilkit::stencil::ElementType::Float64,
    )
    .unwrap();
    let ir = stencilkit::stencil::build_kernel(&spec).unwrap();
    let direct = stencilkit::stencil::emit_c(&ir, &stencilkit::stencil::EmitOptions::plain()).unwrap();
    assert_eq!(text, direct);

    let mut blocked = ptr::null_mut();
    assert_eq!(unsafe { sk_kernel_emit_c(k, true, 16, &mut blocked) }, SkStatus::Ok);
    let b = unsafe { CStr::from_ptr(blocked) }.to_str().unwrap().to_owned();
    unsafe {
        sk_string_free(blocked);
        sk_kernel_free(k);
    }
    assert_ne!(b, text);
    assert!(b.contains("#pragma omp"));
}

#[test]
fn layer_conditions_query_then_fill() {
    let k = kernel(seven_point());
    let m = machine("hsw");
    let grid = SkGrid { m: 100, n: 100, p: 100 };
    let mut len = 0;
    let st = unsafe { sk_layer_conditions(k, m, grid, ptr::null_mut(), 0, &mut len, ptr::null_mut()) };
    assert_eq!(st, SkStatus::BufferTooSmall);
    assert_eq!(len, 9);

    let blank = SkLayerCondition {
        level: [0; 16],
        dimensionality: 0,
        holds: false,
        break_size: 0,
        requirement_bytes: 0.0,
        effective_size_bytes: 0.0,
    };
    let mut conds = vec![blank; len];
    let mut traffic = SkTraffic::default();
    let st = unsafe { sk_layer_conditions(k, m, grid, conds.as_mut_ptr(), conds.len(), &mut len, &mut traffic) };
    assert_eq!(st, SkStatus::Ok);
    let l3_3d = conds
        .iter()
        .find(|c| unsafe { CStr::from_ptr(c.level.as_ptr()) }.to_str() == Ok("L3") && c.dimensionality == 3)
        .unwrap();
    assert!(l3_3d.holds);
    assert!((l3_3d.break_size as f64 - 760.0).abs() <= 76.0, "{}", l3_3d.break_size);
    // the 1D conditions never break
    assert!(conds
        .iter()
        .filter(|c| c.dimensionality == 1)
        .all(|c| c.break_size == 0));
    // 3D condition in L3 holds: memory sees one load and one store stream plus write allocate
    assert_eq!(traffic.load_bytes[2], 128.0);
    assert_eq!(traffic.store_bytes[2], 64.0);
    unsafe {
        sk_kernel_free(k);
        sk_machine_free(m);
    }
}

#[test]
fn ecm_and_conversion() {
    let k = kernel(seven_point());
    let m = machine("hsw");
    let mut e = SkEcm::default();
    let st = unsafe { sk_ecm(k, m, SkGrid { m: 100, n: 100, p: 100 }, &mut e) };
    assert_eq!(st, SkStatus::Ok);
    let sum = e.t_reg_l1 + e.t_l1l2 + e.t_l2l3 + e.t_l3mem;
    assert_eq!(e.t_total, e.t_comp.max(sum));
    let mut mlups = 0.0;
    unsafe { sk_convert_to_mlups(e.t_total, 2.3e9, 8.0, &mut mlups) };
    assert!((mlups - e.lups / 1e6).abs() < 1e-9);

    unsafe { sk_convert_to_mlups(40.0, 2.3e9, 8.0, &mut mlups) };
    assert!((mlups - 460.0).abs() < 1e-9);
    assert_eq!(
        unsafe { sk_convert_to_mlups(0.0, 2.3e9, 8.0, &mut mlups) },
        SkStatus::InvalidArgument
    );

    let tiny = SkGrid { m: 2, n: 2, p: 2 };
    assert_eq!(unsafe { sk_ecm(k, m, tiny, &mut e) }, SkStatus::InvalidGrid);
    unsafe {
        sk_kernel_free(k);
        sk_machine_free(m);
    }
}

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/abi-<hash>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn c_compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[test]
fn header_compiles_and_links_from_c() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    let lib = target_dir().join("libstencilkit_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "stencilkit.h"
int main(void) {
    SkStencilSpec spec = {3, 1, SK_STENCIL_KIND_STAR, SK_WEIGHTING_HOMOGENEOUS,
                          SK_COEFFICIENT_STORAGE_CONSTANT, SK_ELEMENT_TYPE_FLOAT64};
    SkKernel *k = NULL;
    SkMachine *m = NULL;
    size_t terms = 0;
    SkEcm e;
    SkGrid g = {100, 100, 100};
    if (sk_kernel_new(&spec, &k) != SK_STATUS_OK) return 1;
    if (sk_kernel_term_count(k, &terms) != SK_STATUS_OK) return 2;
    if (sk_machine_load("hsw", &m) != SK_STATUS_OK) return 3;
    if (sk_ecm(k, m, g, &e) != SK_STATUS_OK) return 4;
    spec.dimensions = 5;
    if (sk_kernel_new(&spec, &k) != SK_STATUS_UNSUPPORTED_STENCIL) return 5;
    printf("terms=%zu total=%g err=%s\n", terms, e.t_total, sk_last_error_message());
    sk_machine_free(m);
    sk_kernel_free(k);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}", include.display()))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("terms=7 total="), "{stdout}");
    assert!(stdout.contains("err=unsupported stencil"), "{stdout}");
}
