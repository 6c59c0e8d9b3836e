//! Sandboxed execution of generated test commands: command allowlist,
//! path containment, scrubbed environment, watchdog timeout, output cap.

use std::io::Read;
use std::path::{Component, Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variables forwarded into test processes; everything else
/// is dropped.
pub const ENV_PASSTHROUGH: &[&str] = &["PATH", "HOME", "CARGO_HOME", "RUSTUP_HOME", "TMPDIR", "TERM"];

/// Extra time a child gets after its timeout before the watchdog kills it.
pub const KILL_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandboxPolicy {
    pub allowed_commands: Vec<String>,
    pub timeout: Duration,
    pub output_cap: usize,
}

impl SandboxPolicy {
    pub fn new(allowed_commands: &[&str]) -> SandboxPolicy {
        SandboxPolicy {
            allowed_commands: allowed_commands.iter().map(|s| s.to_string()).collect(),
            timeout: Duration::from_secs(120),
            output_cap: 1024 * 1024,
        }
    }
}

/// Rejects absolute paths and any traversal outside the repo root. Returns
/// the normalized relative path.
pub fn validate_relative_path(path: &str) -> Result<PathBuf> {
    let candidate = Path::new(path);
    if candidate.is_absolute() {
        return Err(Error::PathEscape(path.to_string()));
    }
    let mut normalized = PathBuf::new();
    for component in candidate.components() {
        match component {
            Component::Normal(part) => normalized.push(part),
            Component::CurDir => {}
            _ => return Err(Error::PathEscape(path.to_string())),
        }
    }
    if normalized.as_os_str().is_empty() {
        return Err(Error::PathEscape(path.to_string()));
    }
    Ok(normalized)
}

const SHELL_METACHARACTERS: &[char] = &[';', '|', '&', '<', '>', '`', '$', '(', ')', '\n'];

/// Splits a test command into leading KEY=VALUE environment assignments and
/// argv, enforcing the allowlist on the program token. No shell is ever
/// involved, so metacharacters are refused outright.
pub fn parse_command(
    command: &str,
    policy: &SandboxPolicy,
) -> Result<(Vec<(String, String)>, Vec<String>)> {
    if command.contains(SHELL_METACHARACTERS) {
        return Err(Error::CommandNotAllowed(command.to_string()));
    }
    let mut env = Vec::new();
    let mut argv: Vec<String> = Vec::new();
    for token in command.split_whitespace() {
        if argv.is_empty() {
            if let Some((key, value)) = token.split_once('=') {
                if !key.is_empty() && key.chars().all(|c| c.is_ascii_uppercase() || c == '_') {
                    env.push((key.to_string(), value.to_string()));
                    continue;
                }
            }
        }
        argv.push(token.to_string());
    }
    match argv.first() {
        Some(program) if policy.allowed_commands.iter().any(|a| a == program) => Ok((env, argv)),
        _ => Err(Error::CommandNotAllowed(command.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub duration: Duration,
}

fn capped_reader(mut source: impl Read + Send + 'static, cap: usize) -> mpsc::Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut captured = Vec::new();
        let mut buf = [0u8; 8192];
        // keep draining past the cap so the child never blocks on a full pipe
        while let Ok(n) = source.read(&mut buf) {
            if n == 0 {
                break;
            }
            if captured.len() < cap {
                let take = n.min(cap - captured.len());
                captured.extend_from_slice(&buf[..take]);
            }
        }
        let _ = tx.send(captured);
    });
    rx
}

/// Runs an already-validated command in `workdir` with a scrubbed
/// environment. The watchdog kills the child once the timeout elapses;
/// the kill itself stays within [`KILL_GRACE`].
pub fn run_command(
    workdir: &Path,
    env: &[(String, String)],
    argv: &[String],
    policy: &SandboxPolicy,
) -> Result<RunResult> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::CommandNotAllowed(String::new()))?;
    let mut command = Command::new(program);
    command
        .args(args)
        .current_dir(workdir)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for key in ENV_PASSTHROUGH {
        if let Ok(value) = std::env::var(key) {
            command.env(key, value);
        }
    }
    for (key, value) in env {
        command.env(key, value);
    }

    let start = Instant::now();
    let mut child = command.spawn().map_err(|e| Error::Sandbox(format!("{program}: {e}")))?;
    let stdout_rx = capped_reader(child.stdout.take().expect("piped stdout"), policy.output_cap);
    let stderr_rx = capped_reader(child.stderr.take().expect("piped stderr"), policy.output_cap);

    let mut timed_out = false;
    let status = loop {
        match child.try_wait().map_err(|e| Error::Sandbox(e.to_string()))? {
            Some(status) => break status,
            None if start.elapsed() >= policy.timeout => {
                timed_out = true;
                let _ = child.kill();
                break child.wait().map_err(|e| Error::Sandbox(e.to_string()))?;
            }
            None => std::thread::sleep(Duration::from_millis(20)),
        }
    };
    let duration = start.elapsed();

    // Bounded drain: surviving grandchildren may still hold the pipes open,
    // and they must not stall the harness past the kill grace.
    let stdout = stdout_rx.recv_timeout(KILL_GRACE).unwrap_or_default();
    let stderr = stderr_rx.recv_timeout(KILL_GRACE).unwrap_or_default();
    Ok(RunResult {
        exit_code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
        timed_out,
        duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> SandboxPolicy {
        SandboxPolicy::new(&["bash", "sleep"])
    }

    #[test]
    fn path_validation() {
        assert_eq!(
            validate_relative_path("tests/generated_probe.rs").unwrap(),
            PathBuf::from("tests/generated_probe.rs")
        );
        assert_eq!(validate_relative_path("./tests/a.rs").unwrap(), PathBuf::from("tests/a.rs"));
        assert!(matches!(validate_relative_path("../../etc/passwd"), Err(Error::PathEscape(_))));
        assert!(matches!(validate_relative_path("/etc/passwd"), Err(Error::PathEscape(_))));
        assert!(matches!(validate_relative_path("a/../../b"), Err(Error::PathEscape(_))));
    }

    #[test]
    fn command_allowlist_and_metacharacters() {
        let policy = policy();
        let (env, argv) = parse_command("bash -c true", &policy).unwrap();
        assert!(env.is_empty());
        assert_eq!(argv[0], "bash");

        assert!(matches!(parse_command("rm -rf /", &policy), Err(Error::CommandNotAllowed(_))));
        assert!(matches!(
            parse_command("bash -c 'true; rm x'", &policy),
            Err(Error::CommandNotAllowed(_))
        ));
        assert!(matches!(parse_command("", &policy), Err(Error::CommandNotAllowed(_))));

        let (env, argv) = parse_command("RUST_LOG=debug bash script.sh", &policy).unwrap();
        assert_eq!(env, vec![("RUST_LOG".to_string(), "debug".to_string())]);
        assert_eq!(argv, vec!["bash", "script.sh"]);
    }

    #[test]
    fn captures_output_and_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.sh"), "echo out-line\necho err-line >&2\nexit 3\n")
            .unwrap();
        let result = run_command(
            dir.path(),
            &[],
            &["bash".into(), "t.sh".into()],
            &policy(),
        )
        .unwrap();
        assert_eq!(result.exit_code, 3);
        assert_eq!(result.stdout.trim(), "out-line");
        assert_eq!(result.stderr.trim(), "err-line");
        assert!(!result.timed_out);
    }

    #[test]
    fn environment_is_scrubbed() {
        let dir = tempfile::tempdir().unwrap();
        std::env::set_var("QP_SANDBOX_CANARY", "leaked");
        std::fs::write(dir.path().join("t.sh"), "echo canary=${QP_SANDBOX_CANARY:-unset}\n")
            .unwrap();
        let result =
            run_command(dir.path(), &[], &["bash".into(), "t.sh".into()], &policy()).unwrap();
        assert_eq!(result.stdout.trim(), "canary=unset");
        std::env::remove_var("QP_SANDBOX_CANARY");
    }

    #[test]
    fn output_capped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.sh"), "yes x | head -c 100000\n").unwrap();
        let mut policy = policy();
        policy.output_cap = 4096;
        let result =
            run_command(dir.path(), &[], &["bash".into(), "t.sh".into()], &policy).unwrap();
        assert_eq!(result.stdout.len(), 4096);
    }

    #[test]
    fn sleep_forever_killed_within_grace() {
        let dir = tempfile::tempdir().unwrap();
        let mut policy = policy();
        policy.timeout = Duration::from_millis(300);
        let start = Instant::now();
        let result =
            run_command(dir.path(), &[], &["sleep".into(), "3600".into()], &policy).unwrap();
        assert!(result.timed_out);
        assert!(start.elapsed() < policy.timeout + KILL_GRACE);
    }
}
