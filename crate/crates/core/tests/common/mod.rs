//! Helpers shared by the integration-test targets.

#![allow(dead_code)] // each test target uses a different subset

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

/// Path of the compiled CLI binary.
pub fn nalm_bin() -> &'static str {
    env!("CARGO_BIN_EXE_nalm")
}

/// Tempdir paths in these tests are always valid UTF-8.
pub fn path_str(path: &Path) -> &str {
    path.to_str().expect("UTF-8 path")
}

/// Run the CLI in `dir`, returning (exit code, stdout, stderr).
pub fn run_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> (i32, String, String) {
    let output = Command::new(nalm_bin())
        .args(args)
        .current_dir(dir)
        .envs(envs.iter().map(|&(k, v)| (k, v)))
        .output()
        .expect("run nalm");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

/// Run the CLI and require exit 0, returning stdout.
pub fn run_ok(dir: &Path, args: &[&str]) -> String {
    let (code, stdout, stderr) = run_in(dir, args, &[]);
    assert_eq!(code, 0, "nalm {args:?} failed:\n{stdout}{stderr}");
    stdout
}

/// A `nalm serve` child bound to an ephemeral port.
pub struct ServeProc {
    child: Child,
    pub base_url: String,
}

impl ServeProc {
    pub fn start(data_dir: &Path) -> ServeProc {
        Self::start_with(
            &["--listen", "127.0.0.1:0", "--data-dir", path_str(data_dir)],
            &[],
        )
    }

    /// `nalm serve` with explicit extra args and environment.
    pub fn start_with(args: &[&str], envs: &[(&str, &str)]) -> ServeProc {
        let mut child = Command::new(nalm_bin())
            .arg("serve")
            .args(args)
            .envs(envs.iter().map(|&(k, v)| (k, v)))
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn nalm serve");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut line = String::new();
        BufReader::new(stdout)
            .read_line(&mut line)
            .expect("read readiness line");
        let base_url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected readiness line: {line:?}"))
            .to_string();
        ServeProc { child, base_url }
    }

    /// SIGKILL the process — a crash, not a shutdown: only durable data may
    /// survive.
    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ServeProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
