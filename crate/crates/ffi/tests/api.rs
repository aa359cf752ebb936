use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sppkit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sppkit_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn storm_summary_and_spectrum() {
    let mut storm = ptr::null_mut();
    let (q0, q1) = ([1.0, 0.0, 0.0, 0.0], [0.97, 0.01, 0.01, 0.01]);
    unsafe {
        assert_eq!(sppkit_storm_new(0.1, 0.3, q0.as_ptr(), q1.as_ptr(), &mut storm), SppkitStatus::Ok);
        let mut s = SppkitStormSummary::default();
        assert_eq!(sppkit_storm_summary(storm, &mut s), SppkitStatus::Ok);
        assert!((s.lambda_star - 0.6).abs() < 1e-12 && (s.pi_calm - 0.75).abs() < 1e-12);
        let mut spec = SppkitSpectrum::default();
        assert_eq!(sppkit_storm_spectrum(storm, &mut spec), SppkitStatus::Ok);
        assert!((spec.lambda_star - 0.6).abs() < 1e-12 && !spec.non_ergodic);

        let mut mps = ptr::null_mut();
        assert_eq!(sppkit_storm_to_mps(storm, 5, &mut mps), SppkitStatus::Ok);
        let f = [0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0; 3];
        assert_eq!(sppkit_mps_covariance(mps, f.as_ptr(), f.as_ptr(), 4, 3, c.as_mut_ptr(), 3), SppkitStatus::Ok);
        let want = 0.75 * 0.25 * 0.03f64.powi(2);
        for (i, v) in c.iter().enumerate() {
            assert!((v - want * 0.6f64.powi(i as i32 + 1)).abs() < 1e-12, "tau {}: {v}", i + 1);
        }
        let mut faults = vec![0u8; 3 * 50];
        assert_eq!(sppkit_storm_sample_faults(storm, 3, 50, 9, faults.as_mut_ptr(), faults.len()), SppkitStatus::Ok);
        assert!(faults.iter().all(|&x| x < 4));
        sppkit_mps_free(mps);
        sppkit_storm_free(storm);
    }
}

#[test]
fn storm_from_correlation_length() {
    let mut storm = ptr::null_mut();
    unsafe {
        assert_eq!(sppkit_storm_from_xi(2.0, 0.001, 0.03, &mut storm), SppkitStatus::Ok);
        let mut s = SppkitStormSummary::default();
        sppkit_storm_summary(storm, &mut s);
        assert!((s.correlation_length - 2.0).abs() < 1e-12);
        assert!((1.0 - s.marginals[0] - 0.001).abs() < 1e-12);
        sppkit_storm_free(storm);
        assert_eq!(sppkit_storm_from_xi(0.5, 0.001, 0.03, &mut storm), SppkitStatus::InvalidArgument);
    }
}

#[test]
fn crx_process_weights_and_sampling() {
    let mut dil = ptr::null_mut();
    let mut mps = ptr::null_mut();
    unsafe {
        assert_eq!(sppkit_dilation_worked(SppkitModel::Crx, std::f64::consts::FRAC_PI_2, 2, &mut dil), SppkitStatus::Ok);
        assert_eq!(sppkit_mps_from_dilation(dil, &mut mps), SppkitStatus::Ok);
        assert_eq!((sppkit_mps_labels(mps), sppkit_mps_steps(mps)), (4, 2));
        let mut w = [0.0; 16];
        let mut len = 0;
        assert_eq!(sppkit_mps_weights(mps, w.as_mut_ptr(), 16, &mut len), SppkitStatus::Ok);
        let total: f64 = w.iter().sum();
        assert!((w[0] / total - 0.5).abs() < 1e-9 && (w[5] / total - 0.5).abs() < 1e-9);
        let mut one = 0.0;
        assert_eq!(sppkit_mps_weight(mps, [1u32, 1].as_ptr(), 2, &mut one), SppkitStatus::Ok);
        assert!((one - w[5]).abs() < 1e-12);

        let mut samples = vec![0u32; 2 * 200];
        assert_eq!(sppkit_mps_sample(mps, 3, 200, samples.as_mut_ptr(), samples.len()), SppkitStatus::Ok);
        assert!(samples.chunks(2).all(|t| t == [0, 0] || t == [1, 1]));
        let mut again = vec![0u32; 2 * 200];
        sppkit_mps_sample(mps, 3, 200, again.as_mut_ptr(), again.len());
        assert_eq!(samples, again);

        let mut dims = [0usize; 3];
        assert_eq!(sppkit_mps_bond_dims(mps, dims.as_mut_ptr(), 3, &mut len), SppkitStatus::Ok);
        assert_eq!((dims[0], dims[2], len), (1, 1, 3));
        let mut spec = SppkitSpectrum::default();
        assert_eq!(sppkit_mps_spectrum(mps, &mut spec), SppkitStatus::InvalidArgument);
        assert!(last_error().contains("three steps"));
        sppkit_mps_free(mps);
        sppkit_dilation_free(dil);
    }
}

#[test]
fn json_round_trips() {
    let mut dil = ptr::null_mut();
    let mut text = ptr::null_mut();
    let mut back = ptr::null_mut();
    let (mut m1, mut m2) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(sppkit_dilation_haar(2, 2, 3, 17, &mut dil), SppkitStatus::Ok);
        assert_eq!(sppkit_dilation_to_json(dil, &mut text), SppkitStatus::Ok);
        assert_eq!(sppkit_dilation_from_json(text, &mut back), SppkitStatus::Ok);
        sppkit_string_free(text);
        assert_eq!(sppkit_mps_from_dilation(dil, &mut m1), SppkitStatus::Ok);
        assert_eq!(sppkit_mps_to_json(m1, &mut text), SppkitStatus::Ok);
        assert_eq!(sppkit_mps_from_json(text, &mut m2), SppkitStatus::Ok);
        sppkit_string_free(text);
        let (mut a, mut b) = ([0.0; 64], [0.0; 64]);
        sppkit_mps_weights(m1, a.as_mut_ptr(), 64, ptr::null_mut());
        sppkit_mps_weights(m2, b.as_mut_ptr(), 64, ptr::null_mut());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        let mut spec = SppkitSpectrum::default();
        assert_eq!(sppkit_mps_spectrum(m1, &mut spec), SppkitStatus::Ok);
        assert!(spec.dim <= 4 && spec.gap > 0.0);
        for h in [m1, m2] {
            sppkit_mps_free(h);
        }
        sppkit_dilation_free(dil);
        sppkit_dilation_free(back);
    }
}

#[test]
fn errors_are_reported() {
    let mut dil = ptr::null_mut();
    let bad = CString::new("{\"d_s\": 2}").unwrap();
    unsafe {
        assert_eq!(sppkit_dilation_from_json(bad.as_ptr(), &mut dil), SppkitStatus::InvalidArgument);
        assert!(dil.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(sppkit_dilation_from_json(ptr::null(), &mut dil), SppkitStatus::NullPointer);
        assert_eq!(sppkit_mps_from_dilation(ptr::null(), ptr::null_mut()), SppkitStatus::NullPointer);
        assert_eq!(sppkit_mps_steps(ptr::null()), 0);
        sppkit_mps_free(ptr::null_mut());
    }
}

/// Compiles the C smoke program against the generated header and static library.
#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libsppkit_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("sppkit_smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-D_DEFAULT_SOURCE")
        .arg("-Wall")
        .arg("-Werror")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}
