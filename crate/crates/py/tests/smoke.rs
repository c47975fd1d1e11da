use std::path::PathBuf;
use std::process::Command;

/// Runs python/smoke_test.py against the extension built alongside this test.
#[test]
fn python_smoke_test() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = ["libqer_py.so", "libqer_py.dylib"].iter().map(|n| profile_dir.join(n)).find(|p| p.exists());
    let Some(lib) = lib else {
        panic!("extension library not found in {}", profile_dir.display());
    };
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../python/smoke_test.py");
    let out = match Command::new("python3").arg(&script).env("QER_PY_LIB", &lib).output() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("python3 unavailable, skipping: {e}");
            return;
        }
    };
    assert!(
        out.status.success(),
        "smoke test failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
