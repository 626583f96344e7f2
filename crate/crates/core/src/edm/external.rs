use std::io::Write;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{mpsc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::denoiser::Denoiser;
use crate::data::ImageVec;
use crate::error::{Error, Result};
use crate::io::Tensor;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: Option<ChildStdout>,
}

impl Session {
    fn shutdown(mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Denoiser backed by a long-lived child process. Each request writes one
/// TNSR message (the image with its noise level) to the child's stdin and
/// reads one TNSR reply of the same shape from its stdout.
pub struct ExternalDenoiser {
    program: String,
    args: Vec<String>,
    timeout: Duration,
    session: Mutex<Option<Session>>,
}

impl std::fmt::Debug for ExternalDenoiser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalDenoiser")
            .field("program", &self.program)
            .field("args", &self.args)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalDenoiser {
    pub fn new(program: impl Into<String>, args: Vec<String>, timeout: Duration) -> Result<Self> {
        let program = program.into();
        if program.is_empty() {
            return Err(Error::InvalidArgument("denoiser command is empty".into()));
        }
        Ok(Self {
            program,
            args,
            timeout,
            session: Mutex::new(None),
        })
    }

    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str, timeout: Duration) -> Result<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_owned);
        let program = parts.next().unwrap_or_default();
        Self::new(program, parts.collect(), timeout)
    }

    fn spawn(&self) -> Result<Session> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Denoiser(format!("cannot start `{}`: {e}", self.program)))?;
        Ok(Session {
            stdin: child.stdin.take(),
            stdout: child.stdout.take(),
            child,
        })
    }

    fn fail(&self, mut s: Session, what: &str) -> Error {
        // A child that closed its pipes is usually exiting; give it a moment.
        let deadline = Instant::now() + Duration::from_millis(300);
        let status = loop {
            match s.child.try_wait() {
                Ok(Some(st)) => break Some(st),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => {
                    let _ = s.child.kill();
                    break None;
                }
            }
        };
        let _ = s.child.wait();
        match status {
            Some(st) if !st.success() => {
                Error::Denoiser(format!("`{}` exited with {st}: {what}", self.program))
            }
            _ => Error::Denoiser(format!("`{}`: {what}", self.program)),
        }
    }

    fn request(&self, msg: &Tensor) -> Result<Tensor> {
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let mut s = match guard.take() {
            Some(s) => s,
            None => self.spawn()?,
        };
        let (Some(mut stdin), Some(mut stdout)) = (s.stdin.take(), s.stdout.take()) else {
            return Err(self.fail(s, "pipes unavailable"));
        };

        let bytes = msg.encode();
        let writer = thread::spawn(move || {
            let r = stdin.write_all(&bytes).and_then(|_| stdin.flush());
            (stdin, r)
        });
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let r = Tensor::read_from(&mut stdout);
            let _ = tx.send((stdout, r));
        });

        match rx.recv_timeout(self.timeout) {
            Ok((stdout, Ok(reply))) => {
                let (stdin, wr) = writer.join().expect("writer thread");
                if let Err(e) = wr {
                    return Err(self.fail(s, &format!("write failed: {e}")));
                }
                s.stdin = Some(stdin);
                s.stdout = Some(stdout);
                *guard = Some(s);
                Ok(reply)
            }
            Ok((_, Err(e))) => Err(self.fail(s, &format!("bad reply: {e}"))),
            Err(_) => {
                let _ = s.child.kill();
                let _ = s.child.wait();
                Err(Error::Denoiser(format!(
                    "`{}` timed out after {:?}",
                    self.program, self.timeout
                )))
            }
        }
    }
}

impl Denoiser for ExternalDenoiser {
    fn evaluate(&self, x: &ImageVec, sigma: f64) -> Result<ImageVec> {
        if sigma == 0.0 {
            return Ok(x.clone());
        }
        let reply = self.request(&Tensor::from_image(x, sigma))?;
        let expected = Tensor::from_image(x, sigma).dims;
        if reply.dims != expected {
            return Err(Error::Denoiser(format!(
                "`{}` replied with dims {:?}, expected {:?}",
                self.program, reply.dims, expected
            )));
        }
        x.with_data(reply.data)
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        let slot = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        if let Some(s) = slot.take() {
            s.shutdown();
        }
    }
}
