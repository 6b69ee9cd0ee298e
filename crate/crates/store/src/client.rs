//! Synchronous store client: one connection, one request in flight.
//!
//! A client handle is single-session; give each thread of control its own
//! handle. All keys pass through the optional data-source prefix, which
//! scopes an ensemble member's traffic without server support.

use std::io;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use crate::protocol::{
    decode_response, encode_command, read_frame, write_frame, Command, Cursor, FrameError,
    Response, DEFAULT_MAX_FRAME_BYTES,
};
use crate::{Dataset, Kind, Polled, PollSpec, StoreError, Tensor};

/// Environment variable all clients read for the store endpoint
/// (`host:port`).
pub const STORE_ADDR_ENV: &str = "SIMORCH_STORE_ADDR";

#[derive(Debug)]
pub enum ClientError {
    Io(io::Error),
    /// Response framing or body failed to parse.
    Protocol(String),
    /// A target of the request is missing where absence is a fault
    /// (e.g. `run_model`); plain getters return `None` instead.
    NotFound,
    /// Status-2 reason string from the server.
    Server(String),
    /// An aggregation list grew past the expected length: a missed deletion.
    Overshoot { expected: u64, actual: u64 },
    /// Local validation failed before anything hit the wire.
    Invalid(StoreError),
}

impl std::fmt::Display for ClientError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClientError::Io(e) => write!(f, "transport: {e}"),
            ClientError::Protocol(msg) => write!(f, "protocol: {msg}"),
            ClientError::NotFound => write!(f, "not found"),
            ClientError::Server(msg) => write!(f, "server error: {msg}"),
            ClientError::Overshoot { expected, actual } => {
                write!(f, "list overshoot: expected {expected}, found {actual}")
            }
            ClientError::Invalid(e) => write!(f, "invalid request: {e}"),
        }
    }
}

impl std::error::Error for ClientError {}

impl From<io::Error> for ClientError {
    fn from(e: io::Error) -> Self {
        ClientError::Io(e)
    }
}

impl From<StoreError> for ClientError {
    fn from(e: StoreError) -> Self {
        ClientError::Invalid(e)
    }
}

pub struct StoreClient {
    stream: TcpStream,
    max_frame: u32,
    prefix: Option<String>,
    requests_sent: u64,
}

impl StoreClient {
    pub fn connect(addr: &str) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true).ok();
        Ok(Self {
            stream,
            max_frame: DEFAULT_MAX_FRAME_BYTES,
            prefix: None,
            requests_sent: 0,
        })
    }

    /// Connect to the address in `SIMORCH_STORE_ADDR`.
    pub fn connect_env() -> Result<Self, ClientError> {
        let addr = std::env::var(STORE_ADDR_ENV).map_err(|_| {
            ClientError::Protocol(format!("{STORE_ADDR_ENV} is not set"))
        })?;
        Self::connect(&addr)
    }

    /// Retry the connection until `timeout`; covers server start-up races.
    pub fn connect_retry(addr: &str, timeout: Duration) -> Result<Self, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            match Self::connect(addr) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    if Instant::now() >= deadline {
                        return Err(e);
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
            }
        }
    }

    /// Scope all subsequent keys with `<member>.`, mirroring per-ensemble
    /// data sources.
    pub fn set_data_source(&mut self, member: Option<&str>) {
        self.prefix = member.map(|m| format!("{m}."));
    }

    /// Total requests issued on this handle; lets tests count poll queries.
    pub fn requests_sent(&self) -> u64 {
        self.requests_sent
    }

    fn key(&self, key: &str) -> String {
        match &self.prefix {
            Some(p) => format!("{p}{key}"),
            None => key.to_string(),
        }
    }

    fn request(&mut self, cmd: &Command) -> Result<Response, ClientError> {
        let payload = encode_command(cmd).map_err(|e| ClientError::Protocol(e.reason))?;
        write_frame(&mut self.stream, &payload)?;
        self.requests_sent += 1;
        let raw = match read_frame(&mut self.stream, self.max_frame) {
            Ok(r) => r,
            Err(FrameError::Io(e)) => return Err(ClientError::Io(e)),
            Err(FrameError::Empty) => {
                return Err(ClientError::Protocol("empty response frame".into()))
            }
            Err(FrameError::Oversize { declared, max }) => {
                return Err(ClientError::Protocol(format!(
                    "response frame of {declared} bytes exceeds {max}"
                )))
            }
        };
        decode_response(&raw).map_err(|e| ClientError::Protocol(e.reason))
    }

    /// OK with a body -> `Ok(Some)`, NOT_FOUND -> `Ok(None)`, error -> `Err`.
    fn request_optional(&mut self, cmd: &Command) -> Result<Option<Vec<u8>>, ClientError> {
        match self.request(cmd)? {
            Response::Ok(body) => Ok(Some(body)),
            Response::NotFound => Ok(None),
            Response::Error(reason) => Err(ClientError::Server(reason)),
        }
    }

    /// OK -> body, anything else -> `Err`.
    fn request_ok(&mut self, cmd: &Command) -> Result<Vec<u8>, ClientError> {
        match self.request(cmd)? {
            Response::Ok(body) => Ok(body),
            Response::NotFound => Err(ClientError::NotFound),
            Response::Error(reason) => Err(ClientError::Server(reason)),
        }
    }

    // -- single-key operations ------------------------------------------

    pub fn ping(&mut self) -> Result<(), ClientError> {
        self.request_ok(&Command::Ping).map(|_| ())
    }

    pub fn put_tensor(&mut self, key: &str, tensor: &Tensor) -> Result<(), ClientError> {
        self.request_ok(&Command::PutTensor {
            key: self.key(key),
            tensor: tensor.clone(),
        })
        .map(|_| ())
    }

    pub fn get_tensor(&mut self, key: &str) -> Result<Option<Tensor>, ClientError> {
        match self.request_optional(&Command::GetTensor { key: self.key(key) })? {
            Some(body) => {
                let mut c = Cursor::new(&body);
                let t = c.tensor().map_err(|e| ClientError::Protocol(e.reason))?;
                Ok(Some(t))
            }
            None => Ok(None),
        }
    }

    pub fn delete(&mut self, kind: Kind, key: &str) -> Result<(), ClientError> {
        self.request_ok(&Command::Delete {
            kind,
            key: self.key(key),
        })
        .map(|_| ())
    }

    pub fn exists(&mut self, kind: Kind, key: &str) -> Result<bool, ClientError> {
        let body = self.request_ok(&Command::Exists {
            kind,
            key: self.key(key),
        })?;
        Ok(body.first().copied() == Some(1))
    }

    pub fn put_dataset(&mut self, dataset: &Dataset) -> Result<(), ClientError> {
        let mut ds = dataset.clone();
        ds.rename(self.key(dataset.name()));
        self.request_ok(&Command::PutDataset { dataset: ds }).map(|_| ())
    }

    pub fn get_dataset(&mut self, key: &str) -> Result<Option<Dataset>, ClientError> {
        match self.request_optional(&Command::GetDataset { key: self.key(key) })? {
            Some(body) => {
                let mut c = Cursor::new(&body);
                let ds = c.dataset().map_err(|e| ClientError::Protocol(e.reason))?;
                Ok(Some(ds))
            }
            None => Ok(None),
        }
    }

    pub fn list_append(&mut self, list: &str, dataset: &str) -> Result<u64, ClientError> {
        let body = self.request_ok(&Command::ListAppend {
            list: self.key(list),
            dataset: self.key(dataset),
        })?;
        parse_u64(&body)
    }

    pub fn list_length(&mut self, key: &str) -> Result<Option<u64>, ClientError> {
        match self.request_optional(&Command::ListLength { key: self.key(key) })? {
            Some(body) => Ok(Some(parse_u64(&body)?)),
            None => Ok(None),
        }
    }

    pub fn list_get(&mut self, key: &str) -> Result<Option<Vec<String>>, ClientError> {
        match self.request_optional(&Command::ListGet { key: self.key(key) })? {
            Some(body) => {
                if body.len() < 4 {
                    return Err(ClientError::Protocol("short list body".into()));
                }
                let count = u32::from_be_bytes(body[..4].try_into().unwrap());
                let mut c = Cursor::new(&body[4..]);
                let mut entries = Vec::with_capacity(count as usize);
                for _ in 0..count {
                    entries.push(c.string().map_err(|e| ClientError::Protocol(e.reason))?);
                }
                Ok(Some(entries))
            }
            None => Ok(None),
        }
    }

    pub fn put_model(&mut self, key: &str, bytes: &[u8]) -> Result<(), ClientError> {
        self.request_ok(&Command::PutModel {
            key: self.key(key),
            bytes: bytes.to_vec(),
        })
        .map(|_| ())
    }

    pub fn model_exists(&mut self, key: &str) -> Result<bool, ClientError> {
        let body = self.request_ok(&Command::ModelExists { key: self.key(key) })?;
        Ok(body.first().copied() == Some(1))
    }

    /// Run a stored model; `Err(NotFound)` means the model or an input is
    /// gone and the caller should re-poll availability.
    pub fn run_model(
        &mut self,
        model: &str,
        inputs: &[&str],
        outputs: &[&str],
    ) -> Result<(), ClientError> {
        self.request_ok(&Command::RunModel {
            model: self.key(model),
            inputs: inputs.iter().map(|k| self.key(k)).collect(),
            outputs: outputs.iter().map(|k| self.key(k)).collect(),
        })
        .map(|_| ())
    }

    pub fn shutdown_server(&mut self) -> Result<(), ClientError> {
        self.request_ok(&Command::Shutdown).map(|_| ())
    }

    // -- flags ------------------------------------------------------------

    /// Flags are one-element tensors with value 1.0; presence is the signal.
    pub fn put_flag(&mut self, key: &str) -> Result<(), ClientError> {
        self.put_tensor(key, &Tensor::flag())
    }

    pub fn flag_exists(&mut self, key: &str) -> Result<bool, ClientError> {
        self.exists(Kind::Tensor, key)
    }

    // -- polling ------------------------------------------------------------

    /// Query existence every `spec.interval` until found or the attempt
    /// budget runs out. Never consumes the value.
    pub fn poll_key(
        &mut self,
        kind: Kind,
        key: &str,
        spec: &PollSpec,
    ) -> Result<Polled, ClientError> {
        for attempt in 1..=spec.max_attempts {
            if self.exists(kind, key)? {
                return Ok(Polled::Found { attempts: attempt });
            }
            if attempt < spec.max_attempts {
                std::thread::sleep(spec.interval);
            }
        }
        Ok(Polled::Timeout {
            attempts: spec.max_attempts,
        })
    }

    /// Poll until the list reaches exactly `expected` entries. A longer list
    /// is a protocol violation (a missed deletion) and fails immediately.
    pub fn poll_list_length(
        &mut self,
        key: &str,
        expected: u64,
        spec: &PollSpec,
    ) -> Result<Polled, ClientError> {
        for attempt in 1..=spec.max_attempts {
            let len = self.list_length(key)?.unwrap_or(0);
            if len == expected {
                return Ok(Polled::Found { attempts: attempt });
            }
            if len > expected {
                return Err(ClientError::Overshoot {
                    expected,
                    actual: len,
                });
            }
            if attempt < spec.max_attempts {
                std::thread::sleep(spec.interval);
            }
        }
        Ok(Polled::Timeout {
            attempts: spec.max_attempts,
        })
    }
}

fn parse_u64(body: &[u8]) -> Result<u64, ClientError> {
    let arr: [u8; 8] = body
        .try_into()
        .map_err(|_| ClientError::Protocol("expected a u64 body".into()))?;
    Ok(u64::from_be_bytes(arr))
}
