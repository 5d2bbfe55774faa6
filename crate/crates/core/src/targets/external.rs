//! Line-oriented request/reply client for out-of-process simulators.
//!
//! ```text
//! server: READY 1
//! client: EVAL <id> <dim> <x1> ... <xdim>
//! server: OK <id> <value>      or      ERR <id> <message>
//! ```
//!
//! Floats are written in shortest round-trip decimal form.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::targets::example4::ex4_f;

/// Protocol version announced in the handshake.
pub const PROTOCOL_VERSION: u32 = 1;
/// Default reply timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

enum Incoming {
    Line(String),
    Closed,
}

/// One connection to a simulator. Not shareable across chains.
pub struct ExternalEvaluator {
    writer: Box<dyn Write + Send>,
    lines: Receiver<Incoming>,
    child: Option<Child>,
    timeout: Duration,
    next_id: u64,
    pending: HashMap<u64, Result<f64>>,
    closed: bool,
}

impl std::fmt::Debug for ExternalEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalEvaluator").field("next_id", &self.next_id).field("timeout", &self.timeout).finish()
    }
}

impl ExternalEvaluator {
    /// Starts `program` with `args` and waits for its handshake.
    pub fn spawn<S: AsRef<std::ffi::OsStr>>(program: S, args: &[S], timeout: Duration) -> Result<Self> {
        let mut child = Command::new(program).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut ev = Self::from_parts(stdout, stdin, timeout);
        ev.child = Some(child);
        ev.handshake()?;
        Ok(ev)
    }

    /// Uses an existing byte stream pair, e.g. a socket, and waits for the
    /// handshake.
    pub fn connect<R, W>(reader: R, writer: W, timeout: Duration) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let mut ev = Self::from_parts(reader, writer, timeout);
        ev.handshake()?;
        Ok(ev)
    }

    fn from_parts<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) | Err(_) => {
                        let _ = tx.send(Incoming::Closed);
                        return;
                    }
                    Ok(_) => {
                        if tx.send(Incoming::Line(line)).is_err() {
                            return;
                        }
                    }
                }
            }
        });
        Self { writer: Box::new(writer), lines: rx, child: None, timeout, next_id: 1, pending: HashMap::new(), closed: false }
    }

    fn next_line(&mut self, deadline: Instant) -> Result<String> {
        if self.closed {
            return Err(self.died());
        }
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Incoming::Line(l)) => Ok(l.trim_end_matches(['\n', '\r']).to_string()),
            Ok(Incoming::Closed) | Err(RecvTimeoutError::Disconnected) => {
                self.closed = true;
                Err(self.died())
            }
            Err(RecvTimeoutError::Timeout) => Err(Error::SimulatorTimeout),
        }
    }

    fn died(&mut self) -> Error {
        if let Some(c) = self.child.as_mut() {
            let _ = c.wait();
        }
        Error::SimulatorDied
    }

    fn handshake(&mut self) -> Result<()> {
        let line = self.next_line(Instant::now() + self.timeout)?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next().and_then(|v| v.parse::<u32>().ok()), parts.next()) {
            (Some("READY"), Some(PROTOCOL_VERSION), None) => Ok(()),
            _ => Err(Error::MalformedReply(line)),
        }
    }

    /// Sends a request without waiting; returns its id.
    pub fn submit(&mut self, x: &[f64]) -> Result<u64> {
        let id = self.next_id;
        self.next_id += 1;
        let mut msg = format!("EVAL {id} {}", x.len());
        for v in x {
            msg.push(' ');
            msg.push_str(&v.to_string());
        }
        msg.push('\n');
        if self.writer.write_all(msg.as_bytes()).and_then(|_| self.writer.flush()).is_err() {
            return Err(self.died());
        }
        Ok(id)
    }

    /// Blocks until the reply to `id` arrives, buffering replies to other
    /// outstanding ids.
    pub fn wait(&mut self, id: u64) -> Result<f64> {
        let deadline = Instant::now() + self.timeout;
        loop {
            if let Some(r) = self.pending.remove(&id) {
                return r;
            }
            let line = self.next_line(deadline)?;
            let (rid, reply) = parse_reply(&line)?;
            self.pending.insert(rid, reply);
        }
    }

    /// One synchronous evaluation.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        let id = self.submit(x)?;
        self.wait(id)
    }
}

fn parse_reply(line: &str) -> Result<(u64, Result<f64>)> {
    let malformed = || Error::MalformedReply(line.to_string());
    let (tag, rest) = line.split_once(' ').ok_or_else(malformed)?;
    let (id, payload) = rest.split_once(' ').ok_or_else(malformed)?;
    let id: u64 = id.parse().map_err(|_| malformed())?;
    match tag {
        "OK" => {
            let v: f64 = payload.trim().parse().map_err(|_| malformed())?;
            Ok((id, Ok(v)))
        }
        "ERR" => Ok((id, Err(Error::Simulator { id, message: payload.to_string() }))),
        _ => Err(malformed()),
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

/// Serves the built-in simulator response over the wire protocol until the
/// input closes.
pub fn serve_stub<R: BufRead, W: Write>(input: R, mut output: W) -> std::io::Result<()> {
    writeln!(output, "READY {PROTOCOL_VERSION}")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        let reply = match parse_request(&line) {
            Ok((id, x)) => format!("OK {id} {}", ex4_f(&x)),
            Err((id, msg)) => format!("ERR {id} {msg}"),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

fn parse_request(line: &str) -> std::result::Result<(u64, Vec<f64>), (u64, String)> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("EVAL") {
        return Err((0, "expected EVAL".into()));
    }
    let id: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or((0, "bad id".to_string()))?;
    let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or((id, "bad dim".to_string()))?;
    let x: Vec<f64> = parts.map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| (id, "bad coordinate".to_string()))?;
    if x.len() != dim || dim == 0 {
        return Err((id, "dimension mismatch".into()));
    }
    Ok((id, x))
}
