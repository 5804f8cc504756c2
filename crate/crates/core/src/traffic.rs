//! Frame arrival streams: synthetic generators and a plain-text trace format.
//!
//! Trace files hold one frame per line as `timestamp_seconds,size_bytes`.
//! Blank lines and lines starting with `#` are ignored, except for an
//! optional `# duration=<seconds>` header that fixes the stream horizon.
//! Files whose name ends in `.gz` are read and written gzip-compressed.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::SeedableRng;
use rand_distr::{Exp, Pareto};
use rand_pcg::Pcg64;
use thiserror::Error;

/// Smallest Ethernet frame accepted by default.
pub const MIN_FRAME_BYTES: u32 = 64;
/// Largest (jumbo) frame accepted by default.
pub const MAX_FRAME_BYTES: u32 = 9000;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: timestamp {timestamp} precedes the previous frame")]
    NonMonotonic { line: usize, timestamp: f64 },
    #[error("invalid generator parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn bad(name: &'static str, reason: impl Into<String>) -> TraceError {
    TraceError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// One frame arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEvent {
    /// Seconds since the start of the stream.
    pub timestamp: f64,
    /// Frame size in bytes.
    pub size: u32,
}

impl FrameEvent {
    pub fn bits(&self) -> f64 {
        self.size as f64 * 8.0
    }
}

/// Time-ordered frames over a horizon `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceStream {
    events: Vec<FrameEvent>,
    duration: f64,
    total_bytes: u64,
}

impl TraceStream {
    /// Builds a stream, checking order and that every frame lies inside the horizon.
    pub fn new(events: Vec<FrameEvent>, duration: f64) -> Result<Self, TraceError> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(bad("duration", "must be finite and non-negative"));
        }
        let mut prev = 0.0;
        for (i, e) in events.iter().enumerate() {
            if !(e.timestamp >= prev) || !e.timestamp.is_finite() {
                return Err(TraceError::NonMonotonic {
                    line: i + 1,
                    timestamp: e.timestamp,
                });
            }
            prev = e.timestamp;
        }
        if let Some(last) = events.last() {
            if last.timestamp > duration {
                return Err(bad("duration", format!("frame at {} beyond horizon {duration}", last.timestamp)));
            }
        }
        let total_bytes = events.iter().map(|e| e.size as u64).sum();
        Ok(Self {
            events,
            duration,
            total_bytes,
        })
    }

    /// Horizon inferred from the arrivals: `last · n / (n − 1)` (one mean gap past the last frame).
    pub fn from_events(events: Vec<FrameEvent>) -> Result<Self, TraceError> {
        let n = events.len();
        let duration = match events.last() {
            Some(last) if n >= 2 => last.timestamp * n as f64 / (n - 1) as f64,
            Some(last) => last.timestamp,
            None => 0.0,
        };
        Self::new(events, duration)
    }

    pub fn events(&self) -> &[FrameEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<FrameEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    /// Offered rate in bits/second (zero for an empty horizon).
    pub fn mean_rate(&self) -> f64 {
        if self.duration > 0.0 {
            self.total_bytes as f64 * 8.0 / self.duration
        } else {
            0.0
        }
    }

    /// Mean frame size in bytes (zero for an empty stream).
    pub fn mean_size(&self) -> f64 {
        if self.events.is_empty() {
            0.0
        } else {
            self.total_bytes as f64 / self.events.len() as f64
        }
    }

    /// Appends a frame; it must not precede the last one.
    pub fn push(&mut self, event: FrameEvent) -> Result<(), TraceError> {
        let prev = self.events.last().map_or(0.0, |e| e.timestamp);
        if !(event.timestamp >= prev) {
            return Err(TraceError::NonMonotonic {
                line: self.events.len() + 1,
                timestamp: event.timestamp,
            });
        }
        self.total_bytes += event.size as u64;
        self.events.push(event);
        if event.timestamp > self.duration {
            self.duration = event.timestamp;
        }
        Ok(())
    }

    /// Checks every size against `[min, max]` bytes.
    pub fn check_sizes(&self, min: u32, max: u32) -> Result<(), TraceError> {
        for (i, e) in self.events.iter().enumerate() {
            if e.size < min || e.size > max {
                return Err(TraceError::Parse {
                    line: i + 1,
                    reason: format!("frame size {} outside [{min}, {max}]", e.size),
                });
            }
        }
        Ok(())
    }
}

fn check_frame_size(pkt_bytes: u32) -> Result<(), TraceError> {
    if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&pkt_bytes) {
        return Err(bad(
            "pkt_size",
            format!("{pkt_bytes} outside [{MIN_FRAME_BYTES}, {MAX_FRAME_BYTES}] bytes"),
        ));
    }
    Ok(())
}

fn check_horizon(rate: f64, duration: f64) -> Result<(), TraceError> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(bad("rate", "must be positive and finite"));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(bad("duration", "must be finite and non-negative"));
    }
    Ok(())
}

/// Renewal process over `[0, horizon)` with a fixed frame size.
#[derive(Debug, Clone)]
pub struct RenewalArrivals<D> {
    rng: Pcg64,
    gaps: D,
    now: f64,
    horizon: f64,
    size: u32,
}

impl<D: rand_distr::Distribution<f64>> Iterator for RenewalArrivals<D> {
    type Item = FrameEvent;

    fn next(&mut self) -> Option<FrameEvent> {
        self.now += self.gaps.sample(&mut self.rng);
        if self.now < self.horizon {
            Some(FrameEvent {
                timestamp: self.now,
                size: self.size,
            })
        } else {
            self.now = f64::INFINITY;
            None
        }
    }
}

/// Lazily generated Poisson arrivals.
pub type PoissonArrivals = RenewalArrivals<Exp<f64>>;
/// Lazily generated arrivals with Pareto inter-arrival times.
pub type ParetoArrivals = RenewalArrivals<Pareto<f64>>;

/// Poisson arrivals of `pkt_bytes` frames at `rate` bits/second, as an iterator.
pub fn poisson_arrivals(rate: f64, pkt_bytes: u32, duration: f64, seed: u64) -> Result<PoissonArrivals, TraceError> {
    check_horizon(rate, duration)?;
    check_frame_size(pkt_bytes)?;
    let mean_gap = 8.0 * pkt_bytes as f64 / rate;
    Ok(RenewalArrivals {
        rng: Pcg64::seed_from_u64(seed),
        gaps: Exp::new(1.0 / mean_gap).map_err(|e| bad("rate", e.to_string()))?,
        now: 0.0,
        horizon: duration,
        size: pkt_bytes,
    })
}

/// Pareto scale `x_m` giving mean inter-arrival `mean_gap` for shape `α`.
pub fn pareto_scale(shape: f64, mean_gap: f64) -> f64 {
    (shape - 1.0) / shape * mean_gap
}

/// Pareto(α, x_m) inter-arrivals with `x_m` chosen so the mean rate is `rate`, as an iterator.
pub fn pareto_arrivals(rate: f64, pkt_bytes: u32, shape: f64, duration: f64, seed: u64) -> Result<ParetoArrivals, TraceError> {
    check_horizon(rate, duration)?;
    check_frame_size(pkt_bytes)?;
    if !(shape > 2.0) || !shape.is_finite() {
        return Err(bad("shape", "must exceed 2 for a finite variance"));
    }
    let mean_gap = 8.0 * pkt_bytes as f64 / rate;
    Ok(RenewalArrivals {
        rng: Pcg64::seed_from_u64(seed),
        gaps: Pareto::new(pareto_scale(shape, mean_gap), shape).map_err(|e| bad("shape", e.to_string()))?,
        now: 0.0,
        horizon: duration,
        size: pkt_bytes,
    })
}

/// Materialized Poisson stream over `[0, duration)`.
pub fn gen_poisson(rate: f64, pkt_bytes: u32, duration: f64, seed: u64) -> Result<TraceStream, TraceError> {
    let events: Vec<_> = poisson_arrivals(rate, pkt_bytes, duration, seed)?.collect();
    TraceStream::new(events, duration)
}

/// Materialized Pareto stream over `[0, duration)`.
pub fn gen_pareto(rate: f64, pkt_bytes: u32, shape: f64, duration: f64, seed: u64) -> Result<TraceStream, TraceError> {
    let events: Vec<_> = pareto_arrivals(rate, pkt_bytes, shape, duration, seed)?.collect();
    TraceStream::new(events, duration)
}

fn open(path: &Path) -> Result<Box<dyn Read>, TraceError> {
    let file = File::open(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if is_gz(path) {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Reads a trace file (`timestamp,size` per line).
pub fn load_trace(path: impl AsRef<Path>) -> Result<TraceStream, TraceError> {
    let path = path.as_ref();
    let reader = BufReader::new(open(path)?);
    parse_trace(reader).map_err(|e| match e {
        TraceError::Io { source, .. } => TraceError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses trace text from any reader.
pub fn parse_trace(reader: impl BufRead) -> Result<TraceStream, TraceError> {
    let mut events = Vec::new();
    let mut duration = None;
    let mut prev = 0.0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| TraceError::Io {
            path: PathBuf::new(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("duration=") {
                let d: f64 = v.trim().parse().map_err(|_| TraceError::Parse {
                    line: lineno,
                    reason: format!("bad duration header `{v}`"),
                })?;
                duration = Some(d);
            }
            continue;
        }
        let (ts, size) = line.split_once(',').ok_or_else(|| TraceError::Parse {
            line: lineno,
            reason: format!("expected `timestamp,size`, got `{line}`"),
        })?;
        let timestamp: f64 = ts.trim().parse().map_err(|_| TraceError::Parse {
            line: lineno,
            reason: format!("bad timestamp `{}`", ts.trim()),
        })?;
        let size: u32 = size.trim().parse().map_err(|_| TraceError::Parse {
            line: lineno,
            reason: format!("bad frame size `{}`", size.trim()),
        })?;
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(TraceError::Parse {
                line: lineno,
                reason: format!("timestamp {timestamp} must be finite and non-negative"),
            });
        }
        if timestamp < prev {
            return Err(TraceError::NonMonotonic { line: lineno, timestamp });
        }
        prev = timestamp;
        events.push(FrameEvent { timestamp, size });
    }
    match duration {
        Some(d) => TraceStream::new(events, d),
        None => TraceStream::from_events(events),
    }
}

/// Writes `stream` with a duration header; gzip when the name ends in `.gz`.
pub fn write_trace(stream: &TraceStream, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io_err = |source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out: Box<dyn Write> = if is_gz(path) {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    write_trace_to(stream, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Writes trace text; `{}` formatting of `f64` round-trips exactly.
pub fn write_trace_to(stream: &TraceStream, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "# duration={}", stream.duration)?;
    for e in &stream.events {
        writeln!(out, "{},{}", e.timestamp, e.size)?;
    }
    Ok(())
}

/// Concatenates `copies` back-to-back repetitions and compresses time by `factor`.
///
/// Relative order and spacing inside each copy are preserved, so any
/// auto-correlation of the original trace carries over; the rate grows by `factor`.
pub fn scale_trace(stream: &TraceStream, factor: f64, copies: usize) -> Result<TraceStream, TraceError> {
    if !(factor >= 1.0) || !factor.is_finite() {
        return Err(bad("factor", "must be at least 1"));
    }
    if copies < 1 {
        return Err(bad("copies", "must be at least 1"));
    }
    let span = stream.duration;
    let mut events = Vec::with_capacity(stream.len() * copies);
    for k in 0..copies {
        let offset = k as f64 * span;
        events.extend(stream.events.iter().map(|e| FrameEvent {
            timestamp: (e.timestamp + offset) / factor,
            size: e.size,
        }));
    }
    TraceStream::new(events, span * copies as f64 / factor)
}
