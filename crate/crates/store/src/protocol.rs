//! Binary wire protocol.
//!
//! Framing and integer fields are big-endian; float payloads are
//! little-endian IEEE 754 doubles. A frame is a `u32` payload byte count
//! followed by the payload, whose first byte is the command (or response
//! status) code. Strings are a `u16` length plus UTF-8 bytes. Tensors travel
//! as dtype byte, ndim byte, `ndim` dims as `u64`, then the row-major data.
//!
//! The format is pinned bit-exactly so clients in other languages can
//! interoperate; see the README for the field tables.

use std::io::{self, Read, Write};

use crate::{Dataset, Dtype, Kind, StoreError, Tensor};

pub const DEFAULT_MAX_FRAME_BYTES: u32 = 256 * 1024 * 1024;

pub mod code {
    pub const PING: u8 = 0;
    pub const PUT_TENSOR: u8 = 1;
    pub const GET_TENSOR: u8 = 2;
    pub const DELETE: u8 = 3;
    pub const EXISTS: u8 = 4;
    pub const PUT_DATASET: u8 = 5;
    pub const GET_DATASET: u8 = 6;
    pub const LIST_APPEND: u8 = 7;
    pub const LIST_LENGTH: u8 = 8;
    pub const LIST_GET: u8 = 9;
    pub const PUT_MODEL: u8 = 10;
    pub const MODEL_EXISTS: u8 = 11;
    pub const RUN_MODEL: u8 = 12;
    pub const SHUTDOWN: u8 = 13;
}

pub mod status {
    pub const OK: u8 = 0;
    pub const NOT_FOUND: u8 = 1;
    pub const ERROR: u8 = 2;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Ping,
    PutTensor { key: String, tensor: Tensor },
    GetTensor { key: String },
    Delete { kind: Kind, key: String },
    Exists { kind: Kind, key: String },
    PutDataset { dataset: Dataset },
    GetDataset { key: String },
    ListAppend { list: String, dataset: String },
    ListLength { key: String },
    ListGet { key: String },
    PutModel { key: String, bytes: Vec<u8> },
    ModelExists { key: String },
    RunModel { model: String, inputs: Vec<String>, outputs: Vec<String> },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Ok(Vec<u8>),
    NotFound,
    Error(String),
}

/// Decode failure with the ASCII reason that goes back on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolError {
    pub reason: String,
}

impl ProtocolError {
    fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

impl std::fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "protocol error: {}", self.reason)
    }
}

impl std::error::Error for ProtocolError {}

// ---------------------------------------------------------------------------
// Framing
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum FrameError {
    Io(io::Error),
    /// Declared payload length exceeds the configured maximum; the
    /// connection must be closed.
    Oversize { declared: u32, max: u32 },
    /// Zero-length payload; answered with a status-2 frame.
    Empty,
}

impl From<io::Error> for FrameError {
    fn from(e: io::Error) -> Self {
        FrameError::Io(e)
    }
}

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

pub fn read_frame(r: &mut impl Read, max_bytes: u32) -> Result<Vec<u8>, FrameError> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let len = u32::from_be_bytes(len_buf);
    if len == 0 {
        return Err(FrameError::Empty);
    }
    if len > max_bytes {
        return Err(FrameError::Oversize {
            declared: len,
            max: max_bytes,
        });
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(payload)
}

// ---------------------------------------------------------------------------
// Command encode / decode
// ---------------------------------------------------------------------------

pub fn encode_command(cmd: &Command) -> Result<Vec<u8>, ProtocolError> {
    let mut out = Vec::new();
    match cmd {
        Command::Ping => out.push(code::PING),
        Command::PutTensor { key, tensor } => {
            out.push(code::PUT_TENSOR);
            put_string(&mut out, key)?;
            put_tensor(&mut out, tensor)?;
        }
        Command::GetTensor { key } => {
            out.push(code::GET_TENSOR);
            put_string(&mut out, key)?;
        }
        Command::Delete { kind, key } => {
            out.push(code::DELETE);
            out.push(*kind as u8);
            put_string(&mut out, key)?;
        }
        Command::Exists { kind, key } => {
            out.push(code::EXISTS);
            out.push(*kind as u8);
            put_string(&mut out, key)?;
        }
        Command::PutDataset { dataset } => {
            out.push(code::PUT_DATASET);
            put_dataset(&mut out, dataset)?;
        }
        Command::GetDataset { key } => {
            out.push(code::GET_DATASET);
            put_string(&mut out, key)?;
        }
        Command::ListAppend { list, dataset } => {
            out.push(code::LIST_APPEND);
            put_string(&mut out, list)?;
            put_string(&mut out, dataset)?;
        }
        Command::ListLength { key } => {
            out.push(code::LIST_LENGTH);
            put_string(&mut out, key)?;
        }
        Command::ListGet { key } => {
            out.push(code::LIST_GET);
            put_string(&mut out, key)?;
        }
        Command::PutModel { key, bytes } => {
            out.push(code::PUT_MODEL);
            put_string(&mut out, key)?;
            out.extend_from_slice(bytes);
        }
        Command::ModelExists { key } => {
            out.push(code::MODEL_EXISTS);
            put_string(&mut out, key)?;
        }
        Command::RunModel {
            model,
            inputs,
            outputs,
        } => {
            out.push(code::RUN_MODEL);
            put_string(&mut out, model)?;
            put_string_list(&mut out, inputs)?;
            put_string_list(&mut out, outputs)?;
        }
        Command::Shutdown => out.push(code::SHUTDOWN),
    }
    Ok(out)
}

pub fn decode_command(payload: &[u8]) -> Result<Command, ProtocolError> {
    let mut c = Cursor::new(payload);
    let cmd_code = c.u8("empty payload")?;
    let cmd = match cmd_code {
        code::PING => Command::Ping,
        code::PUT_TENSOR => Command::PutTensor {
            key: c.string()?,
            tensor: c.tensor()?,
        },
        code::GET_TENSOR => Command::GetTensor { key: c.string()? },
        code::DELETE => Command::Delete {
            kind: c.kind()?,
            key: c.string()?,
        },
        code::EXISTS => Command::Exists {
            kind: c.kind()?,
            key: c.string()?,
        },
        code::PUT_DATASET => Command::PutDataset {
            dataset: c.dataset()?,
        },
        code::GET_DATASET => Command::GetDataset { key: c.string()? },
        code::LIST_APPEND => Command::ListAppend {
            list: c.string()?,
            dataset: c.string()?,
        },
        code::LIST_LENGTH => Command::ListLength { key: c.string()? },
        code::LIST_GET => Command::ListGet { key: c.string()? },
        code::PUT_MODEL => Command::PutModel {
            key: c.string()?,
            bytes: c.rest(),
        },
        code::MODEL_EXISTS => Command::ModelExists { key: c.string()? },
        code::RUN_MODEL => Command::RunModel {
            model: c.string()?,
            inputs: c.string_list()?,
            outputs: c.string_list()?,
        },
        code::SHUTDOWN => Command::Shutdown,
        _ => return Err(ProtocolError::new("unknown command byte")),
    };
    // PUT_MODEL consumes the remainder by definition; everything else must
    // end exactly at the payload boundary.
    if !matches!(cmd, Command::PutModel { .. }) && c.remaining() != 0 {
        return Err(ProtocolError::new("trailing bytes after command body"));
    }
    Ok(cmd)
}

// ---------------------------------------------------------------------------
// Response encode / decode
// ---------------------------------------------------------------------------

pub fn encode_response(resp: &Response) -> Vec<u8> {
    match resp {
        Response::Ok(body) => {
            let mut out = Vec::with_capacity(1 + body.len());
            out.push(status::OK);
            out.extend_from_slice(body);
            out
        }
        Response::NotFound => vec![status::NOT_FOUND],
        Response::Error(reason) => {
            let mut out = Vec::with_capacity(1 + reason.len());
            out.push(status::ERROR);
            out.extend_from_slice(reason.as_bytes());
            out
        }
    }
}

pub fn decode_response(payload: &[u8]) -> Result<Response, ProtocolError> {
    let (&code, body) = payload
        .split_first()
        .ok_or_else(|| ProtocolError::new("empty response"))?;
    match code {
        status::OK => Ok(Response::Ok(body.to_vec())),
        status::NOT_FOUND => Ok(Response::NotFound),
        status::ERROR => Ok(Response::Error(
            String::from_utf8_lossy(body).into_owned(),
        )),
        _ => Err(ProtocolError::new("unknown status byte")),
    }
}

// ---------------------------------------------------------------------------
// Body field encoders (public for response bodies)
// ---------------------------------------------------------------------------

pub fn put_string(out: &mut Vec<u8>, s: &str) -> Result<(), ProtocolError> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(ProtocolError::new("string longer than 65535 bytes"));
    }
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

pub fn put_string_list(out: &mut Vec<u8>, items: &[String]) -> Result<(), ProtocolError> {
    if items.len() > u16::MAX as usize {
        return Err(ProtocolError::new("string list longer than 65535"));
    }
    out.extend_from_slice(&(items.len() as u16).to_be_bytes());
    for s in items {
        put_string(out, s)?;
    }
    Ok(())
}

pub fn put_tensor(out: &mut Vec<u8>, t: &Tensor) -> Result<(), ProtocolError> {
    out.push(t.dtype() as u8);
    if t.dims().len() > u8::MAX as usize {
        return Err(ProtocolError::new("tensor rank exceeds 255"));
    }
    out.push(t.dims().len() as u8);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_be_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn put_dataset(out: &mut Vec<u8>, ds: &Dataset) -> Result<(), ProtocolError> {
    put_string(out, ds.name())?;
    if ds.tensor_count() > u16::MAX as usize {
        return Err(ProtocolError::new("dataset tensor count exceeds 65535"));
    }
    out.extend_from_slice(&(ds.tensor_count() as u16).to_be_bytes());
    for (field, tensor) in ds.tensors() {
        put_string(out, field)?;
        put_tensor(out, tensor)?;
    }
    let meta_count = ds.meta().count();
    if meta_count > u16::MAX as usize {
        return Err(ProtocolError::new("dataset meta count exceeds 65535"));
    }
    out.extend_from_slice(&(meta_count as u16).to_be_bytes());
    for (key, values) in ds.meta() {
        put_string(out, key)?;
        if values.len() > u16::MAX as usize {
            return Err(ProtocolError::new("meta list longer than 65535"));
        }
        out.extend_from_slice(&(values.len() as u16).to_be_bytes());
        for v in values {
            put_string(out, v)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cursor-based decoding
// ---------------------------------------------------------------------------

pub struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, short_reason: &str) -> Result<&'a [u8], ProtocolError> {
        if self.remaining() < n {
            return Err(ProtocolError::new(short_reason));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn rest(&mut self) -> Vec<u8> {
        let s = self.bytes[self.pos..].to_vec();
        self.pos = self.bytes.len();
        s
    }

    pub fn u8(&mut self, short_reason: &str) -> Result<u8, ProtocolError> {
        Ok(self.take(1, short_reason)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_be_bytes(
            self.take(2, "short integer field")?.try_into().unwrap(),
        ))
    }

    pub fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(
            self.take(8, "short integer field")?.try_into().unwrap(),
        ))
    }

    pub fn string(&mut self) -> Result<String, ProtocolError> {
        let len = self.u16()? as usize;
        let raw = self.take(len, "short string")?;
        String::from_utf8(raw.to_vec()).map_err(|_| ProtocolError::new("bad utf-8 in string"))
    }

    pub fn string_list(&mut self) -> Result<Vec<String>, ProtocolError> {
        let n = self.u16()? as usize;
        let mut items = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            items.push(self.string()?);
        }
        Ok(items)
    }

    pub fn kind(&mut self) -> Result<Kind, ProtocolError> {
        let b = self.u8("short kind field")?;
        Kind::from_byte(b).ok_or_else(|| ProtocolError::new("bad kind byte"))
    }

    pub fn tensor(&mut self) -> Result<Tensor, ProtocolError> {
        let dtype = self.u8("short tensor body")?;
        if dtype != Dtype::Float64 as u8 {
            return Err(ProtocolError::new("bad dtype byte"));
        }
        let ndim = self.u8("short tensor body")? as usize;
        let mut dims = Vec::with_capacity(ndim);
        let mut count: u64 = 1;
        for _ in 0..ndim {
            let d = self.u64().map_err(|_| ProtocolError::new("short tensor body"))?;
            count = count
                .checked_mul(d)
                .ok_or_else(|| ProtocolError::new("tensor size overflow"))?;
            dims.push(d as usize);
        }
        let byte_len = count
            .checked_mul(8)
            .ok_or_else(|| ProtocolError::new("tensor size overflow"))?;
        if (self.remaining() as u64) < byte_len {
            return Err(ProtocolError::new("short tensor body"));
        }
        let raw = self.take(byte_len as usize, "short tensor body")?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(dims, data).map_err(|e| match e {
            StoreError::ZeroSized => ProtocolError::new("zero-sized tensor"),
            other => ProtocolError::new(other.to_string()),
        })
    }

    pub fn dataset(&mut self) -> Result<Dataset, ProtocolError> {
        let name = self.string()?;
        let mut ds = Dataset::new(name);
        let n_tensors = self.u16()? as usize;
        for _ in 0..n_tensors {
            let field = self.string()?;
            let tensor = self.tensor()?;
            ds.put_tensor(field, tensor);
        }
        let n_meta = self.u16()? as usize;
        for _ in 0..n_meta {
            let key = self.string()?;
            let n_items = self.u16()? as usize;
            for _ in 0..n_items {
                let value = self.string()?;
                ds.add_meta_string(&key, value);
            }
        }
        Ok(ds)
    }
}
