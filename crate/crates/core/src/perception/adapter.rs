//! Client side of the line-delimited JSON adapter protocol.
//!
//! One request line in, one response line out. The response must echo every
//! request item id, in order. Child-process adapters announce themselves with
//! a manifest line before serving requests.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::BBox;

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterOp {
    Identify,
    Intensity,
    Ocr,
    Synthesize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterItem {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[u32; 4]>,
    #[serde(flatten)]
    pub fields: Map<String, Value>,
}

impl AdapterItem {
    pub fn boxed(id: &str, bbox: BBox) -> Self {
        Self {
            id: id.to_string(),
            bbox: Some(bbox.to_array()),
            fields: Map::new(),
        }
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.fields.get(key).and_then(Value::as_str)
    }

    pub fn f64_field(&self, key: &str) -> Option<f64> {
        self.fields.get(key).and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub op: AdapterOp,
    pub title: String,
    pub page: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub items: Vec<AdapterItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub items: Vec<AdapterItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Handshake line sent by child-process adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterManifest {
    pub adapter: String,
    pub ops: Vec<AdapterOp>,
    #[serde(default)]
    pub models: Map<String, Value>,
    pub protocol_version: String,
    #[serde(default = "default_true")]
    pub single_flight: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Arity { expected: usize, got: usize },
    Order { position: usize, expected: String, got: String },
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter transport failed: {0}")]
    Transport(String),
    #[error("adapter timed out after {0:?}")]
    Timeout(Duration),
    #[error("adapter protocol violation: {0}")]
    Protocol(String),
    #[error("adapter reported an error: {0}")]
    Remote(String),
}

/// Compares a response against its request: same ids, same order.
pub fn check_conformance(request: &AdapterRequest, response: &AdapterResponse) -> Vec<Violation> {
    let mut out = Vec::new();
    if request.items.len() != response.items.len() {
        out.push(Violation::Arity {
            expected: request.items.len(),
            got: response.items.len(),
        });
    }
    for (position, (want, got)) in request.items.iter().zip(&response.items).enumerate() {
        if want.id != got.id {
            out.push(Violation::Order {
                position,
                expected: want.id.clone(),
                got: got.id.clone(),
            });
        }
    }
    out
}

/// Moves one request line to an adapter and returns its response line.
pub trait Transport: Send + Sync {
    fn exchange(&self, line: &str) -> Result<String, AdapterError>;

    /// Whether the adapter handles one request at a time.
    fn single_flight(&self) -> bool {
        true
    }
}

impl<F> Transport for F
where
    F: Fn(&str) -> Result<String, AdapterError> + Send + Sync,
{
    fn exchange(&self, line: &str) -> Result<String, AdapterError> {
        self(line)
    }
}

struct ChildIo {
    _child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// An adapter running as a child process speaking over stdin/stdout.
pub struct ProcessTransport {
    io: Mutex<ChildIo>,
    timeout: Duration,
    pub manifest: AdapterManifest,
}

impl ProcessTransport {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, AdapterError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| AdapterError::Transport("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Transport(format!("spawning {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let handshake = recv_line(&rx, timeout)?;
        let manifest: AdapterManifest = serde_json::from_str(&handshake)
            .map_err(|e| AdapterError::Protocol(format!("bad handshake {handshake:?}: {e}")))?;
        if manifest.protocol_version != PROTOCOL_VERSION {
            return Err(AdapterError::Protocol(format!(
                "adapter speaks protocol {}, expected {PROTOCOL_VERSION}",
                manifest.protocol_version
            )));
        }
        Ok(Self {
            io: Mutex::new(ChildIo {
                _child: child,
                stdin,
                lines: rx,
            }),
            timeout,
            manifest,
        })
    }
}

fn recv_line(rx: &Receiver<std::io::Result<String>>, timeout: Duration) -> Result<String, AdapterError> {
    match rx.recv_timeout(timeout) {
        Ok(Ok(line)) => Ok(line),
        Ok(Err(e)) => Err(AdapterError::Transport(e.to_string())),
        Err(mpsc::RecvTimeoutError::Timeout) => Err(AdapterError::Timeout(timeout)),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err(AdapterError::Transport("adapter closed its output".into())),
    }
}

impl Transport for ProcessTransport {
    fn exchange(&self, line: &str) -> Result<String, AdapterError> {
        let mut io = self.io.lock().map_err(|_| AdapterError::Transport("adapter lock poisoned".into()))?;
        writeln!(io.stdin, "{line}").map_err(|e| AdapterError::Transport(e.to_string()))?;
        io.stdin.flush().map_err(|e| AdapterError::Transport(e.to_string()))?;
        recv_line(&io.lines, self.timeout)
    }

    fn single_flight(&self) -> bool {
        self.manifest.single_flight
    }
}

/// An adapter reachable over HTTP: the request line is POSTed, the body is the response line.
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self { url: url.into(), agent }
    }
}

impl Transport for HttpTransport {
    fn exchange(&self, line: &str) -> Result<String, AdapterError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(line)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AdapterError::Timeout(Duration::ZERO),
                other => AdapterError::Transport(other.to_string()),
            })?;
        resp.body_mut()
            .read_to_string()
            .map(|s| s.trim_end().to_string())
            .map_err(|e| AdapterError::Transport(e.to_string()))
    }

    fn single_flight(&self) -> bool {
        false
    }
}

/// Typed request/response calls over any transport.
pub struct AdapterClient {
    transport: Box<dyn Transport>,
    image_root: Option<PathBuf>,
}

impl AdapterClient {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            image_root: None,
        }
    }

    /// Page images are referenced as `<root>/<title>/<page:03>.jpg`.
    pub fn with_image_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.image_root = Some(root.into());
        self
    }

    pub fn single_flight(&self) -> bool {
        self.transport.single_flight()
    }

    pub fn image_path(&self, title: &str, page: u32) -> Option<String> {
        self.image_root
            .as_ref()
            .map(|r| r.join(title).join(format!("{page:03}.jpg")).display().to_string())
    }

    pub fn call(&self, request: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let line = serde_json::to_string(request).expect("request serializes");
        let reply = self.transport.exchange(&line)?;
        let response: AdapterResponse = serde_json::from_str(&reply)
            .map_err(|e| AdapterError::Protocol(format!("unparseable response: {e}")))?;
        if let Some(err) = &response.error {
            if response.items.is_empty() {
                return Err(AdapterError::Remote(err.clone()));
            }
        }
        let violations = check_conformance(request, &response);
        if !violations.is_empty() {
            return Err(AdapterError::Protocol(format!("{violations:?}")));
        }
        Ok(response)
    }
}

/// Handshake announced by the built-in echo adapter.
pub fn echo_manifest() -> AdapterManifest {
    AdapterManifest {
        adapter: "echo".into(),
        ops: vec![AdapterOp::Identify, AdapterOp::Intensity, AdapterOp::Ocr, AdapterOp::Synthesize],
        models: Map::new(),
        protocol_version: PROTOCOL_VERSION.into(),
        single_flight: true,
    }
}

/// The echo adapter's answer to one request line.
///
/// OCR returns each item's `text` field (empty when absent), identity answers
/// OTHERS at confidence 0.5, intensity answers logit 0, and synthesis names a
/// path derived from the item id. Unparseable lines get an error response.
pub fn echo_response(line: &str) -> String {
    let reply = match serde_json::from_str::<AdapterRequest>(line) {
        Ok(req) => AdapterResponse {
            items: req
                .items
                .iter()
                .map(|item| {
                    let mut fields = Map::new();
                    match req.op {
                        AdapterOp::Ocr => {
                            let text = item.str_field("text").unwrap_or_default();
                            fields.insert("text".into(), Value::String(text.into()));
                        }
                        AdapterOp::Identify => {
                            fields.insert("label".into(), Value::String("OTHERS".into()));
                            fields.insert("confidence".into(), Value::from(0.5));
                        }
                        AdapterOp::Intensity => {
                            fields.insert("logit".into(), Value::from(0.0));
                        }
                        AdapterOp::Synthesize => {
                            fields.insert("audio_path".into(), Value::String(format!("echo/{}.wav", item.id)));
                        }
                    }
                    AdapterItem { id: item.id.clone(), bbox: None, fields }
                })
                .collect(),
            error: None,
        },
        Err(e) => AdapterResponse { items: Vec::new(), error: Some(format!("bad request: {e}")) },
    };
    serde_json::to_string(&reply).expect("response serializes")
}
