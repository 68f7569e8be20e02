use std::ffi::{CStr, CString};
use std::ptr;

use multiprop_ffi::*;

const CONFIG: &str = r#"
[sampler]
id = "rw-multi"
p = 4
scale = 0.8

[target]
id = "gaussian"
dim = 2

[run]
n_iters = 50
seed = 9
"#;

fn last_error() -> String {
    let p = mp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn experiment(text: &str) -> Result<*mut MpExperiment, MpStatus> {
    let toml = CString::new(text).unwrap();
    let mut exp = ptr::null_mut();
    match unsafe { mp_experiment_from_toml(toml.as_ptr(), &mut exp) } {
        MpStatus::Ok => Ok(exp),
        s => Err(s),
    }
}

#[test]
fn run_and_copy_samples() {
    let exp = experiment(CONFIG).unwrap();
    let mut chain = ptr::null_mut();
    assert_eq!(
        unsafe { mp_experiment_run_chain(exp, 0, 1, &mut chain) },
        MpStatus::Ok
    );
    let (len, dim) = unsafe { (mp_chain_len(chain), mp_chain_dim(chain)) };
    assert_eq!((len, dim), (51, 2));

    let mut buf = vec![f64::NAN; len * dim];
    assert_eq!(
        unsafe { mp_chain_copy_samples(chain, buf.as_mut_ptr(), buf.len()) },
        MpStatus::Ok
    );
    assert_eq!(&buf[..2], &[0.0, 0.0]);
    assert!(buf.iter().all(|x| x.is_finite()));

    let mut rate = -1.0;
    assert_eq!(
        unsafe { mp_chain_move_rate(chain, &mut rate) },
        MpStatus::Ok
    );
    assert!((0.0..=1.0).contains(&rate));

    // same chain id, different worker count: identical output
    let mut again = ptr::null_mut();
    assert_eq!(
        unsafe { mp_experiment_run_chain(exp, 0, 3, &mut again) },
        MpStatus::Ok
    );
    let mut buf2 = vec![0.0; len * dim];
    unsafe { mp_chain_copy_samples(again, buf2.as_mut_ptr(), buf2.len()) };
    assert_eq!(buf, buf2);

    unsafe {
        mp_chain_free(chain);
        mp_chain_free(again);
        mp_experiment_free(exp);
    }
}

#[test]
fn short_buffer_is_rejected() {
    let exp = experiment(CONFIG).unwrap();
    let mut chain = ptr::null_mut();
    unsafe { mp_experiment_run_chain(exp, 0, 1, &mut chain) };
    let mut buf = vec![0.0; 3];
    assert_eq!(
        unsafe { mp_chain_copy_samples(chain, buf.as_mut_ptr(), buf.len()) },
        MpStatus::BufferTooSmall
    );
    assert!(last_error().contains("102"));
    unsafe {
        mp_chain_free(chain);
        mp_experiment_free(exp);
    }
}

#[test]
fn config_errors_map_to_config_status() {
    let bad = CONFIG.replace("rw-multi", "no-such-sampler");
    assert_eq!(experiment(&bad).unwrap_err(), MpStatus::Config);
    assert!(last_error().contains("no-such-sampler"));
    assert_eq!(experiment("not toml [").unwrap_err(), MpStatus::Config);
}

#[test]
fn null_pointers_are_reported() {
    let mut exp = ptr::null_mut();
    assert_eq!(
        unsafe { mp_experiment_from_toml(ptr::null(), &mut exp) },
        MpStatus::NullPointer
    );
    assert_eq!(unsafe { mp_chain_len(ptr::null()) }, 0);
    unsafe {
        mp_chain_free(ptr::null_mut());
        mp_experiment_free(ptr::null_mut());
    }
}

#[test]
fn barker_weights_and_ess() {
    let lm = [0.0, 2f64.ln(), f64::NEG_INFINITY];
    let mut w = [0.0; 3];
    assert_eq!(
        unsafe { mp_barker_weights(lm.as_ptr(), 3, w.as_mut_ptr()) },
        MpStatus::Ok
    );
    assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(w[2], 0.0);

    let none = [f64::NEG_INFINITY; 2];
    assert_eq!(
        unsafe { mp_barker_weights(none.as_ptr(), 2, w.as_mut_ptr()) },
        MpStatus::Runtime
    );

    let series: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
    let mut e = 0.0;
    assert_eq!(
        unsafe { mp_ess(series.as_ptr(), series.len(), &mut e) },
        MpStatus::Ok
    );
    assert!(e > 0.0);
    let flat = [1.0; 10];
    assert_eq!(
        unsafe { mp_ess(flat.as_ptr(), 10, &mut e) },
        MpStatus::Runtime
    );
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/multiprop.h");
    let src = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("use_header.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ MpExperiment *e = 0; \
             MpStatus s = mp_experiment_from_toml(\"\", &e); mp_experiment_free(e); \
             return s == MP_STATUS_OK; }}\n"
        ),
    )
    .unwrap();
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
