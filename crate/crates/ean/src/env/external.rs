//! Client side of the wire protocol: evaluate schemes against an external
//! process (over its standard streams) or a TCP endpoint.

use super::protocol::{EvalRequest, EvalResponse};
use super::Evaluator;
use crate::error::{Error, Result};
use crate::scheme::ConnectionScheme;
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

/// Where the evaluator lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Spawn `program args...` and speak over its stdin/stdout.
    Command(Vec<String>),
    /// Connect to `host:port`.
    Tcp(String),
}

impl Endpoint {
    /// Parse `"tcp:HOST:PORT"` or `"cmd:PROGRAM ARGS..."`.
    pub fn parse(text: &str) -> Result<Endpoint> {
        if let Some(addr) = text.strip_prefix("tcp:") {
            if addr.is_empty() {
                return Err(Error::InvalidConfig("empty tcp endpoint".into()));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = text.strip_prefix("cmd:") {
            let parts: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if parts.is_empty() {
                return Err(Error::InvalidConfig("empty command endpoint".into()));
            }
            Ok(Endpoint::Command(parts))
        } else {
            Err(Error::InvalidConfig(format!(
                "endpoint {text:?} must start with tcp: or cmd:"
            )))
        }
    }
}

/// Byte transport plus a background thread that turns the peer's output into
/// a stream of lines.
struct Transport {
    writer: Option<Box<dyn Write + Send>>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
}

impl Transport {
    fn spawn_reader<R: Read + Send + 'static>(reader: R) -> Receiver<std::io::Result<String>> {
        let (tx, rx) = channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        while line.ends_with('\n') || line.ends_with('\r') {
                            line.pop();
                        }
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        rx
    }

    fn connect(endpoint: &Endpoint) -> Result<Transport> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)
                    .map_err(|e| Error::Transport(format!("connect {addr}: {e}")))?;
                let read_half = stream
                    .try_clone()
                    .map_err(|e| Error::Transport(format!("clone stream: {e}")))?;
                Ok(Transport {
                    writer: Some(Box::new(stream)),
                    lines: Self::spawn_reader(read_half),
                    child: None,
                })
            }
            Endpoint::Command(parts) => {
                let mut child = Command::new(&parts[0])
                    .args(&parts[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| Error::Transport(format!("spawn {:?}: {e}", parts[0])))?;
                let stdin = child
                    .stdin
                    .take()
                    .ok_or_else(|| Error::Transport("child stdin unavailable".into()))?;
                let stdout = child
                    .stdout
                    .take()
                    .ok_or_else(|| Error::Transport("child stdout unavailable".into()))?;
                Ok(Transport {
                    writer: Some(Box::new(stdin)),
                    lines: Self::spawn_reader(stdout),
                    child: Some(child),
                })
            }
        }
    }

    fn send_line(&mut self, line: &str) -> Result<()> {
        let writer = self
            .writer
            .as_mut()
            .ok_or_else(|| Error::Transport("connection closed".into()))?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .and_then(|_| writer.flush())
            .map_err(|e| Error::Transport(format!("send: {e}")))
    }
}

impl Drop for Transport {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved child exit on its own.
        self.writer.take();
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_millis(200);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => {
                        std::thread::sleep(Duration::from_millis(10))
                    }
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
    }
}

/// Wire-protocol client. One request is in flight at a time; request ids are
/// strictly increasing, and each timeout retry re-sends under a fresh id.
pub struct ExternalEvaluator {
    transport: Transport,
    stage_sizes: Vec<usize>,
    next_id: u64,
    /// Ids whose requests timed out; late responses to them are discarded.
    abandoned: HashSet<u64>,
    timeout: Duration,
    retry_limit: u32,
}

impl ExternalEvaluator {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
    pub const DEFAULT_RETRY_LIMIT: u32 = 2;

    pub fn connect(
        endpoint: &Endpoint,
        stage_sizes: &[usize],
        timeout: Duration,
        retry_limit: u32,
    ) -> Result<Self> {
        Ok(ExternalEvaluator {
            transport: Transport::connect(endpoint)?,
            stage_sizes: stage_sizes.to_vec(),
            next_id: 1,
            abandoned: HashSet::new(),
            timeout,
            retry_limit,
        })
    }

    fn parse_response(&self, line: &str) -> Result<EvalResponse> {
        serde_json::from_str(line).map_err(|e| Error::Protocol {
            message: format!("malformed response: {e}"),
            raw: line.to_string(),
        })
    }

    /// Send one request and wait for its matching response. Times out per
    /// attempt, so a silent peer costs `(retry_limit + 1) * timeout` overall.
    fn request(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        for _attempt in 0..=self.retry_limit {
            let id = self.next_id;
            self.next_id += 1;
            let request = EvalRequest {
                id,
                op: "eval".into(),
                scheme: scheme.encode(),
            };
            self.transport.send_line(&serde_json::to_string(&request)?)?;
            let deadline = Instant::now() + self.timeout;
            loop {
                let remaining = deadline.saturating_duration_since(Instant::now());
                if remaining.is_zero() {
                    self.abandoned.insert(id);
                    break;
                }
                match self.transport.lines.recv_timeout(remaining) {
                    Ok(Ok(line)) => {
                        let response = self.parse_response(&line)?;
                        if self.abandoned.remove(&response.id()) {
                            continue; // late answer to a timed-out attempt
                        }
                        match response {
                            EvalResponse::Value { id: rid, g_val } if rid == id => {
                                if !g_val.is_finite() || !(0.0..=1.0).contains(&g_val) {
                                    return Err(Error::Protocol {
                                        message: format!("g_val {g_val} outside [0, 1]"),
                                        raw: line,
                                    });
                                }
                                return Ok(g_val);
                            }
                            EvalResponse::Error { id: rid, error } if rid == id => {
                                return Err(Error::Protocol {
                                    message: format!("evaluator error: {error}"),
                                    raw: line,
                                });
                            }
                            other => {
                                return Err(Error::Protocol {
                                    message: format!(
                                        "response id {} does not match request id {id}",
                                        other.id()
                                    ),
                                    raw: line,
                                });
                            }
                        }
                    }
                    Ok(Err(e)) => return Err(Error::Transport(format!("read: {e}"))),
                    Err(RecvTimeoutError::Timeout) => {
                        self.abandoned.insert(id);
                        break;
                    }
                    Err(RecvTimeoutError::Disconnected) => {
                        return Err(Error::Transport("peer closed the connection".into()))
                    }
                }
            }
        }
        Err(Error::Transport(format!(
            "no response after {} attempts of {:?}",
            self.retry_limit + 1,
            self.timeout
        )))
    }
}

impl Evaluator for ExternalEvaluator {
    fn m(&self) -> usize {
        self.stage_sizes.iter().sum()
    }

    fn eval(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        if scheme.m() != self.m() {
            return Err(Error::Shape {
                context: "external evaluation scheme",
                expected: self.m(),
                actual: scheme.m(),
            });
        }
        self.request(scheme)
    }

    /// External evaluators are expected to be deterministic; the live value is
    /// reused rather than issuing a second request.
    fn eval_both(&mut self, scheme: &ConnectionScheme) -> Result<(f64, f64)> {
        let v = self.eval(scheme)?;
        Ok((v, v))
    }
}
