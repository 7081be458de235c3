use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tailex_ffi::*;

fn last_error() -> String {
    let p = tailex_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            tailex_gen_pareto(alpha, 1.0, n, seed, &mut s),
            TailexStatus::Ok
        );
        let v = std::slice::from_raw_parts(tailex_series_data(s), tailex_series_len(s)).to_vec();
        tailex_series_free(s);
        v
    }
}

#[test]
fn series_and_mle() {
    let x = pareto(3.0, 20_000, 1);
    assert_eq!(x.len(), 20_000);
    let mut alpha = 0.0;
    let st = unsafe { tailex_mle_alpha(x.as_ptr(), x.len(), 1.0, false, &mut alpha) };
    assert_eq!(st, TailexStatus::Ok);
    assert!((alpha - 3.0).abs() < 0.1, "{alpha}");
    assert!(tailex_last_error().is_null());

    let mut ks = 0.0;
    assert_eq!(
        unsafe { tailex_ks_statistic(x.as_ptr(), x.len(), 1.0, alpha, &mut ks) },
        TailexStatus::Ok
    );
    assert!(ks > 0.0 && ks < 0.02);
}

#[test]
fn fit_tail_with_and_without_options() {
    let x = pareto(2.5, 5_000, 2);
    let mut fit = TailexTailFit::default();
    assert_eq!(
        unsafe {
            tailex_fit_tail(
                x.as_ptr(),
                x.len(),
                TailexSign::Positive,
                ptr::null(),
                &mut fit,
            )
        },
        TailexStatus::Ok
    );
    assert!((fit.alpha - 2.5).abs() < 0.2);
    assert!(fit.gof_p_value.is_nan());

    let mut opts = tailex_tail_options_default();
    opts.min_tail = 10_000;
    let st = unsafe { tailex_fit_tail(x.as_ptr(), x.len(), TailexSign::Positive, &opts, &mut fit) };
    assert_eq!(st, TailexStatus::InsufficientData);
    assert!(!last_error().is_empty());

    // no negative values at all
    let st = unsafe {
        tailex_fit_tail(
            x.as_ptr(),
            x.len(),
            TailexSign::Negative,
            ptr::null(),
            &mut fit,
        )
    };
    assert_ne!(st, TailexStatus::Ok);
}

#[test]
fn qgaussian_entry_points() {
    let mut d = 0.0;
    assert_eq!(
        unsafe { tailex_qgaussian_pdf(0.0, 1.0, 1.0, &mut d) },
        TailexStatus::Ok
    );
    assert!((d - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(
        unsafe { tailex_qgaussian_pdf(0.0, -1.0, 1.0, &mut d) },
        TailexStatus::InvalidArgument
    );

    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            tailex_gen_student_t(4.0, 200_000, 3, &mut s),
            TailexStatus::Ok
        );
        let mut fit = TailexQGaussianFit::default();
        assert_eq!(
            tailex_fit_qgaussian(tailex_series_data(s), tailex_series_len(s), false, &mut fit),
            TailexStatus::Ok
        );
        tailex_series_free(s);
        assert!((fit.alpha - 4.0).abs() < 0.5, "{}", fit.alpha);
        assert!((fit.scale - 1.0).abs() < 0.1, "{}", fit.scale);
    }
}

#[test]
fn ols_handle() {
    // y = 1 + 2 x1 - x2 + small noise
    let rows: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, ((i * 7) % 11) as f64]).collect();
    let x: Vec<f64> = rows.iter().flatten().copied().collect();
    let y: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| 1.0 + 2.0 * r[0] - r[1] + if i % 2 == 0 { 0.01 } else { -0.01 })
        .collect();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(
            tailex_ols_fit(x.as_ptr(), 30, 2, y.as_ptr(), &mut h),
            TailexStatus::Ok
        );
        assert_eq!(tailex_ols_coefficient_count(h), 3);
        assert_eq!(tailex_ols_df(h), 27);
        assert!(tailex_ols_r_squared(h) > 0.999);
        let mut c = TailexCoefficient::default();
        for (i, want) in [1.0, 2.0, -1.0].into_iter().enumerate() {
            assert_eq!(tailex_ols_coefficient(h, i, &mut c), TailexStatus::Ok);
            assert!((c.estimate - want).abs() < 0.02, "{i}: {}", c.estimate);
            assert!(c.std_error > 0.0 && c.half_width > c.std_error);
        }
        assert_eq!(
            tailex_ols_coefficient(h, 3, &mut c),
            TailexStatus::InvalidArgument
        );
        tailex_ols_free(h);
    }

    let dup: Vec<f64> = (0..10).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
    let y = [1.0; 10];
    let mut h = ptr::null_mut();
    let st = unsafe { tailex_ols_fit(dup.as_ptr(), 10, 2, y.as_ptr(), &mut h) };
    assert_eq!(st, TailexStatus::Collinear);
    assert!(h.is_null());
}

#[test]
fn null_handling() {
    let mut alpha = 0.0;
    unsafe {
        assert_eq!(
            tailex_mle_alpha(ptr::null(), 5, 1.0, false, &mut alpha),
            TailexStatus::NullPointer
        );
        assert!(last_error().contains("tail"));
        let x = [2.0, 3.0];
        assert_eq!(
            tailex_mle_alpha(x.as_ptr(), 2, 1.0, false, ptr::null_mut()),
            TailexStatus::NullPointer
        );
        assert_eq!(tailex_ols_coefficient_count(ptr::null()), 0);
        assert!(tailex_ols_r_squared(ptr::null()).is_nan());
        assert_eq!(tailex_series_len(ptr::null()), 0);
        assert!(tailex_series_data(ptr::null()).is_null());
        tailex_ols_free(ptr::null_mut());
        tailex_series_free(ptr::null_mut());
    }
    let s = unsafe { CStr::from_ptr(tailex_status_str(TailexStatus::Collinear)) };
    assert_eq!(s.to_str().unwrap(), "collinear design");
    let v = unsafe { CStr::from_ptr(tailex_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/tailex.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 10);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}

/// Compiles the C smoke program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    }) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libtailex_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(cc)
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("alpha="));
}
