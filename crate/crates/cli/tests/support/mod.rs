#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Outcome {
    pub code: i32,
    pub stderr: String,
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn names_691() -> PathBuf {
    fixtures().join("celeb_names_691.txt")
}

pub fn face(name: &str) -> PathBuf {
    fixtures().join("faces").join(format!("{name}.png"))
}

/// Run the binary in `dir` and capture its exit code and stderr.
pub fn run(dir: &Path, args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_celebbasis"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn celebbasis");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(dir: &Path, args: &[&str]) {
    let o = run(dir, args);
    assert_eq!(o.code, 0, "{args:?} failed: {}", o.stderr);
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
