//! TCP server exposing a [`Store`] over the wire protocol.
//!
//! One session thread per connection, one request in flight per session.
//! The server never blocks a request on a missing key; waiting is the
//! client's job (poll loops). SHUTDOWN acknowledges, stops the accept loop,
//! and lets in-flight requests finish.

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::protocol::{
    decode_command, encode_response, put_dataset, put_string, put_tensor, read_frame,
    write_frame, Command, FrameError, Response, DEFAULT_MAX_FRAME_BYTES,
};
use crate::{Store, StoreError};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_frame_bytes: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_frame_bytes: DEFAULT_MAX_FRAME_BYTES,
        }
    }
}

/// Handle to a server running on a background thread. Used by tests and by
/// workflows that embed the store in-process.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn addr_string(&self) -> String {
        self.addr.to_string()
    }

    /// Stop accepting and join the accept loop.
    pub fn shutdown(mut self) {
        self.signal_shutdown();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn signal_shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.signal_shutdown();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Bind and run on a background thread; `bind_addr` may use port 0.
pub fn spawn(store: Arc<Store>, bind_addr: &str, config: ServerConfig) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(bind_addr)?;
    let addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&shutdown);
    let thread = thread::spawn(move || run_accept_loop(store, listener, config, flag));
    Ok(ServerHandle {
        addr,
        shutdown,
        thread: Some(thread),
    })
}

/// Run the accept loop on the calling thread until SHUTDOWN arrives.
pub fn serve(store: Arc<Store>, listener: TcpListener, config: ServerConfig) {
    let shutdown = Arc::new(AtomicBool::new(false));
    run_accept_loop(store, listener, config, shutdown);
}

fn run_accept_loop(
    store: Arc<Store>,
    listener: TcpListener,
    config: ServerConfig,
    shutdown: Arc<AtomicBool>,
) {
    listener
        .set_nonblocking(true)
        .expect("listener nonblocking");
    loop {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        match listener.accept() {
            Ok((stream, _peer)) => {
                let store = Arc::clone(&store);
                let flag = Arc::clone(&shutdown);
                let max = config.max_frame_bytes;
                // Sessions are detached; they exit on EOF, oversize frames,
                // or after acknowledging SHUTDOWN.
                thread::spawn(move || session(store, stream, max, flag));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(2));
            }
            Err(_) => break,
        }
    }
}

fn session(store: Arc<Store>, mut stream: TcpStream, max_frame: u32, shutdown: Arc<AtomicBool>) {
    stream.set_nodelay(true).ok();
    loop {
        let payload = match read_frame(&mut stream, max_frame) {
            Ok(p) => p,
            Err(FrameError::Empty) => {
                let resp = Response::Error("empty payload".into());
                if write_frame(&mut stream, &encode_response(&resp)).is_err() {
                    return;
                }
                continue;
            }
            // Oversize or I/O trouble: drop the connection.
            Err(_) => return,
        };

        let (response, stop) = match decode_command(&payload) {
            Ok(Command::Shutdown) => {
                shutdown.store(true, Ordering::SeqCst);
                (Response::Ok(Vec::new()), true)
            }
            Ok(cmd) => (execute(&store, cmd), false),
            Err(e) => (Response::Error(e.reason), false),
        };

        if write_frame(&mut stream, &encode_response(&response)).is_err() {
            return;
        }
        if stop {
            let _ = stream.flush();
            return;
        }
    }
}

fn execute(store: &Store, cmd: Command) -> Response {
    match cmd {
        Command::Ping => Response::Ok(Vec::new()),
        Command::PutTensor { key, tensor } => {
            store.put_tensor(key, tensor);
            Response::Ok(Vec::new())
        }
        Command::GetTensor { key } => match store.get_tensor(&key) {
            Some(t) => {
                let mut body = Vec::new();
                match put_tensor(&mut body, &t) {
                    Ok(()) => Response::Ok(body),
                    Err(e) => Response::Error(e.reason),
                }
            }
            None => Response::NotFound,
        },
        Command::Delete { kind, key } => {
            store.delete(kind, &key);
            Response::Ok(Vec::new())
        }
        Command::Exists { kind, key } => {
            Response::Ok(vec![u8::from(store.exists(kind, &key))])
        }
        Command::PutDataset { dataset } => {
            store.put_dataset(dataset);
            Response::Ok(Vec::new())
        }
        Command::GetDataset { key } => match store.get_dataset(&key) {
            Some(ds) => {
                let mut body = Vec::new();
                match put_dataset(&mut body, &ds) {
                    Ok(()) => Response::Ok(body),
                    Err(e) => Response::Error(e.reason),
                }
            }
            None => Response::NotFound,
        },
        Command::ListAppend { list, dataset } => match store.list_append(&list, &dataset) {
            Ok(len) => Response::Ok((len as u64).to_be_bytes().to_vec()),
            Err(e) => store_error_response(e),
        },
        Command::ListLength { key } => match store.list_length(&key) {
            Some(len) => Response::Ok((len as u64).to_be_bytes().to_vec()),
            None => Response::NotFound,
        },
        Command::ListGet { key } => match store.list_get(&key) {
            // Body: u32 entry count, then each entry as a wire string.
            Some(entries) => {
                let mut body = Vec::new();
                body.extend_from_slice(&(entries.len() as u32).to_be_bytes());
                for entry in &entries {
                    if let Err(e) = put_string(&mut body, entry) {
                        return Response::Error(e.reason);
                    }
                }
                Response::Ok(body)
            }
            None => Response::NotFound,
        },
        Command::PutModel { key, bytes } => match store.put_model(key, &bytes) {
            Ok(()) => Response::Ok(Vec::new()),
            Err(e) => store_error_response(e),
        },
        Command::ModelExists { key } => Response::Ok(vec![u8::from(store.model_exists(&key))]),
        Command::RunModel {
            model,
            inputs,
            outputs,
        } => match store.run_model(&model, &inputs, &outputs) {
            Ok(()) => Response::Ok(Vec::new()),
            Err(e) => store_error_response(e),
        },
        Command::Shutdown => unreachable!("handled by the session loop"),
    }
}

fn store_error_response(e: StoreError) -> Response {
    match e {
        StoreError::NotFound => Response::NotFound,
        other => Response::Error(other.to_string()),
    }
}
