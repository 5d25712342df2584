use std::fs::File;
use std::io::{self, BufRead, BufReader, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use smartbag_core::frame::{encode_frame, parse_frame};

use super::sim::Simulator;
use super::Intake;
use crate::clock::{sleep_or_stop, Clock};

/// Longest pause inserted between two trace frames, however far apart their
/// timestamps are.
const MAX_TRACE_GAP_MS: u64 = 60_000;

/// Produces wire lines. `None` means the source is exhausted or `stop` was
/// set.
pub trait FrameSource: Send {
    fn next_line(&mut self, stop: &AtomicBool) -> Option<io::Result<Vec<u8>>>;
}

/// Paces lines by the gap between consecutive frame timestamps.
struct Pacer {
    clock: Arc<dyn Clock>,
    last_ts: Option<u64>,
}

impl Pacer {
    fn wait(&mut self, line: &[u8], stop: &AtomicBool) -> bool {
        let Ok(frame) = parse_frame(line) else {
            return true;
        };
        let gap = self.last_ts.map_or(0, |prev| {
            frame.ts.saturating_sub(prev).min(MAX_TRACE_GAP_MS)
        });
        self.last_ts = Some(frame.ts);
        gap == 0 || sleep_or_stop(self.clock.as_ref(), gap, stop)
    }
}

/// Reads a recorded trace (one frame per line), optionally paced by frame
/// timestamps on the given clock.
pub struct TraceSource<R> {
    reader: R,
    pacer: Option<Pacer>,
}

impl TraceSource<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, pacing: Option<Arc<dyn Clock>>) -> io::Result<Self> {
        Ok(Self::new(BufReader::new(File::open(path)?), pacing))
    }
}

impl<R: BufRead + Send> TraceSource<R> {
    pub fn new(reader: R, pacing: Option<Arc<dyn Clock>>) -> Self {
        Self {
            reader,
            pacer: pacing.map(|clock| Pacer {
                clock,
                last_ts: None,
            }),
        }
    }
}

impl<R: BufRead + Send> FrameSource for TraceSource<R> {
    fn next_line(&mut self, stop: &AtomicBool) -> Option<io::Result<Vec<u8>>> {
        if stop.load(Ordering::SeqCst) {
            return None;
        }
        let mut line = Vec::new();
        match self.reader.read_until(b'\n', &mut line) {
            Ok(0) => None,
            Ok(_) => {
                if let Some(p) = &mut self.pacer {
                    if !p.wait(&line, stop) {
                        return None;
                    }
                }
                Some(Ok(line))
            }
            Err(e) => Some(Err(e)),
        }
    }
}

/// Accepts TCP connections one at a time and yields the lines they send.
pub struct TcpSource {
    listener: TcpListener,
    conn: Option<TcpStream>,
    pending: Vec<u8>,
}

const POLL: Duration = Duration::from_millis(50);

impl TcpSource {
    pub fn bind(addr: SocketAddr) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            conn: None,
            pending: Vec::new(),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    fn take_line(&mut self) -> Option<Vec<u8>> {
        let end = self.pending.iter().position(|&b| b == b'\n')?;
        Some(self.pending.drain(..=end).collect())
    }
}

impl FrameSource for TcpSource {
    fn next_line(&mut self, stop: &AtomicBool) -> Option<io::Result<Vec<u8>>> {
        let mut chunk = [0u8; 4096];
        loop {
            if let Some(line) = self.take_line() {
                return Some(Ok(line));
            }
            if stop.load(Ordering::SeqCst) {
                return None;
            }
            let Some(conn) = &mut self.conn else {
                match self.listener.accept() {
                    Ok((stream, peer)) => {
                        tracing::info!(%peer, "frame source connected");
                        if let Err(e) = stream
                            .set_nonblocking(false)
                            .and_then(|_| stream.set_read_timeout(Some(POLL)))
                        {
                            return Some(Err(e));
                        }
                        self.conn = Some(stream);
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
                    Err(e) => return Some(Err(e)),
                }
                continue;
            };
            match conn.read(&mut chunk) {
                Ok(0) => {
                    tracing::info!("frame source disconnected");
                    self.conn = None;
                    // A final line without terminator is still a line.
                    if !self.pending.is_empty() {
                        return Some(Ok(std::mem::take(&mut self.pending)));
                    }
                }
                Ok(n) => self.pending.extend_from_slice(&chunk[..n]),
                Err(e)
                    if matches!(
                        e.kind(),
                        ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                    ) => {}
                Err(e) => {
                    self.conn = None;
                    self.pending.clear();
                    tracing::warn!(error = %e, "frame source connection failed");
                }
            }
        }
    }
}

/// Live simulator emitting one frame per `interval_ms` of clock time, up to
/// `limit` frames if given.
pub struct SimSource {
    sim: Simulator,
    clock: Arc<dyn Clock>,
    interval_ms: u64,
    limit: Option<u64>,
    emitted: u64,
}

impl SimSource {
    pub fn new(
        sim: Simulator,
        clock: Arc<dyn Clock>,
        interval_ms: u64,
        limit: Option<u64>,
    ) -> Self {
        Self {
            sim,
            clock,
            interval_ms,
            limit,
            emitted: 0,
        }
    }
}

impl FrameSource for SimSource {
    fn next_line(&mut self, stop: &AtomicBool) -> Option<io::Result<Vec<u8>>> {
        if self.limit.is_some_and(|l| self.emitted >= l) {
            return None;
        }
        if self.emitted > 0 && !sleep_or_stop(self.clock.as_ref(), self.interval_ms, stop) {
            return None;
        }
        if stop.load(Ordering::SeqCst) {
            return None;
        }
        self.emitted += 1;
        let line = encode_frame(&self.sim.next_frame()).expect("simulated frames are valid");
        Some(Ok(line.into_bytes()))
    }
}

/// Feeds every line from `source` into `intake`, stamping receive time from
/// `clock`, until the source ends or `stop` is set. Returns lines read.
pub fn pump(
    source: &mut dyn FrameSource,
    intake: &Intake,
    clock: &dyn Clock,
    stop: &AtomicBool,
) -> u64 {
    let mut lines = 0;
    while let Some(next) = source.next_line(stop) {
        match next {
            Ok(line) => {
                lines += 1;
                intake.push_line(&line, clock.now_ms());
            }
            Err(e) => {
                tracing::error!(error = %e, "frame source failed");
                break;
            }
        }
    }
    lines
}

/// Copies trace lines to `out`, paced by frame timestamps on `clock` when
/// given. Used to replay a recorded trace into a gateway's TCP source.
pub fn stream_lines<R: BufRead + Send, W: Write>(
    trace: R,
    out: &mut W,
    pacing: Option<Arc<dyn Clock>>,
    stop: &AtomicBool,
) -> io::Result<u64> {
    let mut source = TraceSource::new(trace, pacing);
    let mut sent = 0;
    while let Some(line) = source.next_line(stop) {
        let mut line = line?;
        if !line.ends_with(b"\n") {
            line.push(b'\n');
        }
        out.write_all(&line)?;
        out.flush()?;
        sent += 1;
    }
    Ok(sent)
}
