//! Out-of-process scorer speaking newline-delimited JSON.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"hello","version":1,"labels":["l0","l1"]}
//! -> {"type":"score","id":7,"texts":["..."]}
//! <- {"type":"score","id":7,"probs":[[0.3,0.7]]}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{check_label_count, Classifier, ModelError};

pub const PROTOCOL_VERSION: u32 = 1;
const SCORER_NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Request<'a> {
    Hello { version: u32 },
    Score { id: u64, texts: &'a [&'a str] },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Response {
    Hello {
        version: u32,
        labels: Vec<String>,
    },
    Score {
        id: u64,
        probs: Vec<Vec<f64>>,
    },
    Error {
        #[serde(default)]
        id: Option<u64>,
        message: String,
    },
}

/// Where the scorer lives.
#[derive(Debug, Clone)]
pub enum ScorerEndpoint {
    /// Spawned child; the protocol runs over its stdin/stdout.
    Process { program: String, args: Vec<String> },
    /// A shell command line run through `sh -c`.
    Shell(String),
    /// Stream socket, `host:port`.
    Tcp(String),
}

#[derive(Debug, Clone)]
pub struct ScorerOptions {
    pub timeout: Duration,
    /// Texts per score request.
    pub max_batch: usize,
}

impl Default for ScorerOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            max_batch: 64,
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    socket: Option<TcpStream>,
    next_id: u64,
    poisoned: bool,
}

impl Connection {
    fn send(&mut self, request: &Request<'_>) -> Result<(), ModelError> {
        let mut line = serde_json::to_string(request).map_err(|e| ModelError::Malformed(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn receive(&mut self, timeout: Duration) -> Result<Response, ModelError> {
        let line = match self.lines.recv_timeout(timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(ModelError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(ModelError::Transport(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "scorer closed its output",
                )))
            }
        };
        serde_json::from_str(&line).map_err(|e| ModelError::Malformed(format!("{e}: {line}")))
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        // Closing our write side signals end of input to the scorer.
        self.writer = Box::new(std::io::sink());
        if let Some(socket) = self.socket.take() {
            let _ = socket.shutdown(std::net::Shutdown::Both);
        }
        if let Some(child) = self.child.as_mut() {
            let deadline = Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
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

fn spawn_reader<R: std::io::Read + Send + 'static>(reader: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(reader).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

/// Client for an external scorer. Requests on one handle are serialized.
pub struct ExternalScorer {
    labels: Vec<String>,
    options: ScorerOptions,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalScorer")
            .field("labels", &self.labels)
            .field("options", &self.options)
            .finish()
    }
}

/// Connects to a scorer, performs the handshake, and checks its labels against `labels`.
pub fn open_scorer(
    endpoint: &ScorerEndpoint,
    labels: &[String],
    options: ScorerOptions,
) -> Result<ExternalScorer, ModelError> {
    check_label_count(labels.len())?;
    if options.max_batch == 0 {
        return Err(ModelError::BadConfig("scorer batch size must be at least 1".into()));
    }
    let mut conn = match endpoint {
        ScorerEndpoint::Process { program, args } => {
            let mut cmd = Command::new(program);
            cmd.args(args);
            spawn(cmd)?
        }
        ScorerEndpoint::Shell(line) => {
            let mut cmd = Command::new("sh");
            cmd.arg("-c").arg(line);
            spawn(cmd)?
        }
        ScorerEndpoint::Tcp(addr) => {
            let stream = TcpStream::connect(addr)?;
            stream.set_nodelay(true)?;
            let read_half = stream.try_clone()?;
            let control = stream.try_clone()?;
            Connection {
                writer: Box::new(stream),
                lines: spawn_reader(read_half),
                child: None,
                socket: Some(control),
                next_id: 0,
                poisoned: false,
            }
        }
    };

    conn.send(&Request::Hello {
        version: PROTOCOL_VERSION,
    })?;
    match conn.receive(options.timeout)? {
        Response::Hello {
            version,
            labels: remote,
        } => {
            if version != PROTOCOL_VERSION {
                return Err(ModelError::Handshake(format!(
                    "protocol version {version}, expected {PROTOCOL_VERSION}"
                )));
            }
            if remote != labels {
                return Err(ModelError::Handshake(format!(
                    "scorer labels {remote:?} do not match expected {labels:?}"
                )));
            }
        }
        Response::Error { message, .. } => return Err(ModelError::Handshake(message)),
        other => return Err(ModelError::Handshake(format!("unexpected reply {other:?}"))),
    }
    Ok(ExternalScorer {
        labels: labels.to_vec(),
        options,
        conn: Mutex::new(conn),
    })
}

fn spawn(mut cmd: Command) -> Result<Connection, ModelError> {
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    Ok(Connection {
        writer: Box::new(stdin),
        lines: spawn_reader(stdout),
        child: Some(child),
        socket: None,
        next_id: 0,
        poisoned: false,
    })
}

impl ExternalScorer {
    pub fn options(&self) -> &ScorerOptions {
        &self.options
    }

    fn validate(&self, row: &[f64]) -> Result<Vec<f64>, ModelError> {
        if row.len() != self.labels.len() {
            return Err(ModelError::Malformed(format!(
                "distribution has {} entries for {} labels",
                row.len(),
                self.labels.len()
            )));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::NotNormalized(format!("invalid probability in {row:?}")));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > SCORER_NORMALIZATION_TOL {
            return Err(ModelError::NotNormalized(format!("{row:?} sums to {total}")));
        }
        Ok(row.iter().map(|p| p / total).collect())
    }

    fn score_chunk(&self, conn: &mut Connection, texts: &[&str]) -> Result<Vec<Vec<f64>>, ModelError> {
        let id = conn.next_id;
        conn.next_id += 1;
        conn.send(&Request::Score { id, texts })?;
        match conn.receive(self.options.timeout)? {
            Response::Score { id: got, probs } => {
                if got != id {
                    return Err(ModelError::Malformed(format!("response id {got}, expected {id}")));
                }
                if probs.len() != texts.len() {
                    return Err(ModelError::Malformed(format!(
                        "{} distributions for {} texts",
                        probs.len(),
                        texts.len()
                    )));
                }
                probs.iter().map(|row| self.validate(row)).collect()
            }
            Response::Error { id: Some(got), .. } if got != id => {
                Err(ModelError::Malformed(format!("error reply id {got}, expected {id}")))
            }
            Response::Error { message, .. } => Err(ModelError::Remote(message)),
            Response::Hello { .. } => Err(ModelError::Malformed("unexpected hello".into())),
        }
    }
}

impl Classifier for ExternalScorer {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        Ok(self.predict_batch(&[text])?.pop().expect("one row per text"))
    }

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ModelError> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        if conn.poisoned {
            return Err(ModelError::Poisoned);
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.options.max_batch) {
            match self.score_chunk(&mut conn, chunk) {
                Ok(rows) => out.extend(rows),
                Err(e) => {
                    // Validation failures leave the stream in sync; transport faults may not.
                    if matches!(
                        e,
                        ModelError::Timeout(_) | ModelError::Transport(_) | ModelError::Malformed(_)
                    ) {
                        conn.poisoned = true;
                    }
                    return Err(e);
                }
            }
        }
        Ok(out)
    }
}
