//! Real-time scoring over TCP.
//!
//! A client streams length-prefixed revision payloads; the server answers
//! one `<revision_id>\t<score>\n` line per frame, scores formatted to six
//! fixed decimals, per-connection order preserved. A frame whose payload
//! fails to decode answers `<revision_id or 0>\tERROR\n` and the connection
//! continues. The model is immutable shared state; connections never lock.

mod wire;

pub use wire::{
    decode_record, encode_frame, encode_record, salvage_revision_id, WireError, MAX_FRAME_BYTES,
};

use crate::corpus::RevisionRecord;
use crate::learn::LinearModel;
use crate::pipeline::{format_score, score_record};
use std::collections::VecDeque;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

/// Default bound on unanswered in-flight frames for [`stream_client`].
pub const DEFAULT_WINDOW: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("failed to bind {addr}: {reason}")]
    BindFailure { addr: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-record result collected by the client: the score text exactly as the
/// server sent it (six decimals), or the server's in-band error marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoreOutcome {
    Score(String),
    ServerError,
}

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("connect failed: {0}")]
    Connect(String),
    #[error("connection lost after {} responses: {reason}", received.len())]
    ConnectionLost {
        received: Vec<(u64, ScoreOutcome)>,
        reason: String,
    },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("frame error: {0}")]
    Wire(#[from] WireError),
}

/// A scoring server bound to a listen address. `run` blocks until the
/// shutdown flag is raised, then drains live connections and returns.
pub struct Server {
    listener: TcpListener,
    model: Arc<LinearModel>,
}

impl Server {
    pub fn bind(addr: &str, model: Arc<LinearModel>) -> Result<Server, ServeError> {
        let listener = TcpListener::bind(addr).map_err(|e| ServeError::BindFailure {
            addr: addr.to_string(),
            reason: e.to_string(),
        })?;
        Ok(Server { listener, model })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ServeError> {
        Ok(self.listener.local_addr()?)
    }

    pub fn run(self, shutdown: Arc<AtomicBool>) -> Result<(), ServeError> {
        self.listener.set_nonblocking(true)?;
        let mut workers: Vec<std::thread::JoinHandle<()>> = Vec::new();
        while !shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, _peer)) => {
                    let model = Arc::clone(&self.model);
                    let flag = Arc::clone(&shutdown);
                    workers.push(std::thread::spawn(move || {
                        let _ = handle_connection(stream, &model, &flag);
                    }));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(_) => std::thread::sleep(Duration::from_millis(10)),
            }
            workers.retain(|w| !w.is_finished());
        }
        for worker in workers {
            let _ = worker.join();
        }
        Ok(())
    }
}

/// Read exactly `buf.len()` bytes, retrying on read timeouts. Returns false
/// on clean EOF at a frame boundary (`allow_eof` and nothing read yet).
fn read_full(
    stream: &mut impl Read,
    buf: &mut [u8],
    allow_eof: bool,
    shutdown: &AtomicBool,
) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) => {
                if filled == 0 && allow_eof {
                    return Ok(false);
                }
                return Err(std::io::Error::new(
                    ErrorKind::UnexpectedEof,
                    "peer closed mid-frame",
                ));
            }
            Ok(n) => filled += n,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if filled == 0 && shutdown.load(Ordering::SeqCst) {
                    return Ok(false);
                }
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn handle_connection(
    stream: TcpStream,
    model: &LinearModel,
    shutdown: &AtomicBool,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(100)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut header = [0u8; 4];

    loop {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        if !read_full(&mut reader, &mut header, true, shutdown)? {
            break; // clean close or shutdown between frames
        }
        let length = u32::from_be_bytes(header);
        if length > MAX_FRAME_BYTES {
            // the stream cannot be trusted past an oversized header
            writer.write_all(b"0\tERROR\n")?;
            writer.flush()?;
            break;
        }
        let mut payload = vec![0u8; length as usize];
        if !read_full(&mut reader, &mut payload, false, shutdown)? {
            break;
        }

        let response = match decode_record(&payload) {
            Ok(record) => match score_record(model, &record) {
                Ok(score) => format!("{}\t{}\n", record.revision_id, format_score(score)),
                Err(_) => format!("{}\tERROR\n", record.revision_id),
            },
            Err(_) => format!("{}\tERROR\n", salvage_revision_id(&payload).unwrap_or(0)),
        };
        writer.write_all(response.as_bytes())?;
        writer.flush()?;
    }
    writer.flush()?;
    Ok(())
}

/// Convenience: bind, run in a background thread, and return the bound
/// address plus a handle for shutdown. Used by the CLI and tests.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: std::thread::JoinHandle<Result<(), ServeError>>,
}

impl ServerHandle {
    pub fn spawn(addr: &str, model: Arc<LinearModel>) -> Result<ServerHandle, ServeError> {
        let server = Server::bind(addr, model)?;
        let addr = server.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let thread = std::thread::spawn(move || server.run(flag));
        Ok(ServerHandle {
            addr,
            shutdown,
            thread,
        })
    }

    pub fn shutdown(self) -> Result<(), ServeError> {
        self.shutdown.store(true, Ordering::SeqCst);
        self.thread.join().expect("server thread panicked")
    }
}

fn read_response_line(reader: &mut impl Read) -> std::io::Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(std::io::Error::new(
                ErrorKind::UnexpectedEof,
                "peer closed mid-response",
            ));
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 4096 {
            return Err(std::io::Error::new(
                ErrorKind::InvalidData,
                "response line too long",
            ));
        }
    }
    String::from_utf8(line)
        .map_err(|_| std::io::Error::new(ErrorKind::InvalidData, "response not UTF-8"))
}

fn parse_response(line: &str) -> Result<(u64, ScoreOutcome), StreamError> {
    let (id, value) = line
        .split_once('\t')
        .ok_or_else(|| StreamError::BadResponse(line.to_string()))?;
    let id: u64 = id
        .parse()
        .map_err(|_| StreamError::BadResponse(line.to_string()))?;
    let outcome = if value == "ERROR" {
        ScoreOutcome::ServerError
    } else {
        ScoreOutcome::Score(value.to_string())
    };
    Ok((id, outcome))
}

/// Stream records to a scoring server with a bounded in-flight window and
/// collect one outcome per record, in send order. On a lost connection the
/// responses received so far ride along with the error.
pub fn stream_client(
    addr: &str,
    records: &[RevisionRecord],
    window: usize,
) -> Result<Vec<(u64, ScoreOutcome)>, StreamError> {
    let window = window.max(1);
    let stream = TcpStream::connect(addr).map_err(|e| StreamError::Connect(e.to_string()))?;
    let mut reader = BufReader::new(
        stream
            .try_clone()
            .map_err(|e| StreamError::Connect(e.to_string()))?,
    );
    let mut writer = BufWriter::new(stream);

    let mut results: Vec<(u64, ScoreOutcome)> = Vec::with_capacity(records.len());
    let mut in_flight: VecDeque<u64> = VecDeque::with_capacity(window);

    let receive_one = |reader: &mut BufReader<TcpStream>,
                           in_flight: &mut VecDeque<u64>,
                           results: &mut Vec<(u64, ScoreOutcome)>|
     -> Result<(), StreamError> {
        let line = match read_response_line(reader) {
            Ok(line) => line,
            Err(e) => {
                return Err(StreamError::ConnectionLost {
                    received: results.clone(),
                    reason: e.to_string(),
                })
            }
        };
        let (id, outcome) = parse_response(&line)?;
        let expected = in_flight.pop_front();
        if expected != Some(id) {
            return Err(StreamError::BadResponse(format!(
                "response for {id} while waiting for {expected:?}"
            )));
        }
        results.push((id, outcome));
        Ok(())
    };

    for record in records {
        if in_flight.len() == window {
            receive_one(&mut reader, &mut in_flight, &mut results)?;
        }
        let frame = encode_frame(&encode_record(record))?;
        if let Err(e) = writer.write_all(&frame).and_then(|_| writer.flush()) {
            return Err(StreamError::ConnectionLost {
                received: results,
                reason: e.to_string(),
            });
        }
        in_flight.push_back(record.revision_id);
    }
    while !in_flight.is_empty() {
        receive_one(&mut reader, &mut in_flight, &mut results)?;
    }
    Ok(results)
}
