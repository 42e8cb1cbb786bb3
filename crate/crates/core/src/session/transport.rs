use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Duration;

use thiserror::Error;

use super::codec::{frame_len_hint, FrameScan};

/// Upper bound on a single frame read from a stream.
pub const MAX_FRAME_LEN: usize = 16 << 20;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer closed the connection")]
    Closed,
    #[error("frame of {0} bytes exceeds the stream limit")]
    Oversized(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Ordered, reliable, duplex frame channel. Each `send` is delivered as
/// exactly one `recv` on the other end.
pub trait Transport: Send {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError>;
    fn recv(&mut self) -> Result<Vec<u8>, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        (**self).send(frame)
    }

    fn recv(&mut self) -> Result<Vec<u8>, TransportError> {
        (**self).recv()
    }
}

/// One end of an in-process channel pair.
#[derive(Debug)]
pub struct MemoryTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl MemoryTransport {
    pub fn pair() -> (MemoryTransport, MemoryTransport) {
        let (a_tx, b_rx) = channel();
        let (b_tx, a_rx) = channel();
        (
            MemoryTransport { tx: a_tx, rx: a_rx },
            MemoryTransport { tx: b_tx, rx: b_rx },
        )
    }
}

impl Transport for MemoryTransport {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.tx.send(frame.to_vec()).map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self) -> Result<Vec<u8>, TransportError> {
        self.rx.recv().map_err(|_| TransportError::Closed)
    }
}

/// Plain frames over a TCP stream. Frames are self-delimiting, so no extra
/// length prefix is added.
#[derive(Debug)]
pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn from_stream(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?)
    }

    /// Connects, retrying until `timeout` elapses. Useful when the listener is
    /// started concurrently.
    pub fn connect_with_retry(addr: &str, timeout: Duration) -> io::Result<Self> {
        let start = std::time::Instant::now();
        loop {
            match TcpStream::connect(addr) {
                Ok(s) => return Self::from_stream(s),
                Err(e) if start.elapsed() >= timeout => return Err(e),
                Err(_) => std::thread::sleep(Duration::from_millis(20)),
            }
        }
    }

    /// Accepts a single peer on `listener`.
    pub fn accept(listener: &TcpListener) -> io::Result<Self> {
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream)
    }

    fn read_exact_or_closed(&mut self, buf: &mut [u8]) -> Result<(), TransportError> {
        match self.stream.read_exact(buf) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(TransportError::Closed),
            Err(e) => Err(e.into()),
        }
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.stream.write_all(frame)?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Vec<u8>, TransportError> {
        let mut buf = Vec::new();
        loop {
            match frame_len_hint(&buf) {
                FrameScan::Complete(total) => {
                    if total > MAX_FRAME_LEN {
                        return Err(TransportError::Oversized(total));
                    }
                    let have = buf.len();
                    buf.resize(total, 0);
                    self.read_exact_or_closed(&mut buf[have..])?;
                    return Ok(buf);
                }
                FrameScan::NeedAtLeast(n) => {
                    if n > MAX_FRAME_LEN {
                        return Err(TransportError::Oversized(n));
                    }
                    let have = buf.len();
                    buf.resize(n, 0);
                    self.read_exact_or_closed(&mut buf[have..])?;
                }
            }
        }
    }
}
