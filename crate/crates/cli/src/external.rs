//! Line protocol for black-box evaluators run as shell commands.
//!
//! Each batch spawns `sh -c <command>` once. The tool writes one point per
//! line to the child's stdin, coordinates separated by single spaces and
//! formatted with 17 significant digits, then closes stdin. The child answers
//! with one decimal per line, in input order, and exits with status zero.

use std::io::{Read, Write};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::Duration;

use lanczos_composite::composite::{BatchFailure, Evaluate};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::output::format_float;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("failed to start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o with `{command}` failed: {source}")]
    Io {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("`{command}` exited with {status}{}", stderr_tail(.stderr))]
    Exit {
        command: String,
        status: ExitStatus,
        stderr: String,
    },

    #[error("`{command}` timed out after {seconds} s")]
    Timeout { command: String, seconds: f64 },

    #[error("expected {expected} output lines, got {received}")]
    CountMismatch { expected: usize, received: usize },

    /// `line` is 1-based.
    #[error("output line {line}: {reason}: {content:?}")]
    BadLine {
        line: usize,
        content: String,
        reason: &'static str,
    },
}

fn stderr_tail(stderr: &str) -> String {
    let trimmed = stderr.trim();
    if trimmed.is_empty() {
        String::new()
    } else {
        format!(": {}", trimmed.lines().last().unwrap_or_default())
    }
}

/// A shell command speaking the line protocol.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    command: String,
    timeout: Option<Duration>,
}

impl ExternalCommand {
    pub fn new(command: impl Into<String>, timeout: Option<Duration>) -> Self {
        Self {
            command: command.into(),
            timeout,
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Runs one batch.
    pub fn run(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, ProtocolError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| ProtocolError::Spawn {
                command: self.command.clone(),
                source,
            })?;

        let request = format_request(points);
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || {
            let result = stdin.write_all(request.as_bytes());
            drop(stdin);
            match result {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other,
            }
        });
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        });

        let io_err = |source| ProtocolError::Io {
            command: self.command.clone(),
            source,
        };
        let status = match self.timeout {
            Some(limit) => match child.wait_timeout(limit).map_err(io_err)? {
                Some(status) => status,
                None => {
                    let _ = child.kill();
                    let _ = child.wait();
                    // Grandchildren may still hold the pipes, so the reader
                    // threads are left detached.
                    return Err(ProtocolError::Timeout {
                        command: self.command.clone(),
                        seconds: limit.as_secs_f64(),
                    });
                }
            },
            None => child.wait().map_err(io_err)?,
        };

        let stdout = reader
            .join()
            .expect("stdout reader panicked")
            .map_err(io_err)?;
        writer
            .join()
            .expect("stdin writer panicked")
            .map_err(io_err)?;
        let stderr = err_reader.join().expect("stderr reader panicked");
        if !status.success() {
            return Err(ProtocolError::Exit {
                command: self.command.clone(),
                status,
                stderr,
            });
        }
        parse_response(&stdout, points.len())
    }
}

impl Evaluate for ExternalCommand {
    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>, BatchFailure> {
        self.run(points).map_err(|e| {
            let index = match &e {
                ProtocolError::BadLine { line, .. } if *line <= points.len() => Some(line - 1),
                _ => None,
            };
            BatchFailure::new(index, e)
        })
    }
}

/// The stdin payload for a batch, newline-terminated.
pub fn format_request(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for p in points {
        let line: Vec<String> = p.iter().map(|&v| format_float(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses one finite decimal per line. A trailing newline is optional.
pub fn parse_response(text: &str, expected: usize) -> Result<Vec<f64>, ProtocolError> {
    let mut values = Vec::with_capacity(expected);
    for (i, raw) in text.lines().enumerate() {
        let content = raw.trim();
        let bad = |reason| ProtocolError::BadLine {
            line: i + 1,
            content: raw.to_string(),
            reason,
        };
        let value: f64 = content.parse().map_err(|_| bad("not a number"))?;
        if !value.is_finite() {
            return Err(bad("non-finite value"));
        }
        values.push(value);
    }
    if values.len() != expected {
        return Err(ProtocolError::CountMismatch {
            expected,
            received: values.len(),
        });
    }
    Ok(values)
}
