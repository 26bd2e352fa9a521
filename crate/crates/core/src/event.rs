//! Event data model, the line-based event file format, and time slicing.
//!
//! File layout (ASCII, `\n` line endings):
//!
//! ```text
//! # optional comment lines
//! <width> <height>
//! <t>,<x>,<y>,<p>
//! ...
//! ```
//!
//! `t` is an integer timestamp in microseconds, `x`/`y` are pixel indices and
//! `p` is `1` (ON) or `-1` (OFF). Timestamps must be non-decreasing.

use std::fmt::Write as _;

/// Sign of the log-intensity change that triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u64,
    pub x: u32,
    pub y: u32,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u32, y: u32, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: polarity must be 1 or -1, got {value:?}")]
    Polarity { line: usize, value: String },
    #[error("line {line}: {axis}={value} out of range for {dim} {limit}")]
    OutOfRange { line: usize, axis: char, value: u32, dim: &'static str, limit: u32 },
    #[error("line {line}: timestamp {t} precedes previous timestamp {prev}")]
    DecreasingTimestamp { line: usize, t: u64, prev: u64 },
    #[error("missing `width height` header")]
    MissingHeader,
    #[error("event {index}: {msg}")]
    InvalidEvent { index: usize, msg: String },
    #[error("window start {start} is after window end {end}")]
    InvalidWindow { start: u64, end: u64 },
}

/// Time-ordered events from one sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u32,
    height: u32,
    events: Vec<Event>,
}

impl EventStream {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, events: Vec::new() }
    }

    /// Validates bounds and timestamp ordering.
    pub fn new(width: u32, height: u32, events: Vec<Event>) -> Result<Self, EventError> {
        let mut prev = 0u64;
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(EventError::InvalidEvent {
                    index,
                    msg: format!("({}, {}) outside {}x{}", e.x, e.y, width, height),
                });
            }
            if e.t < prev {
                return Err(EventError::InvalidEvent {
                    index,
                    msg: format!("timestamp {} precedes {}", e.t, prev),
                });
            }
            prev = e.t;
        }
        Ok(Self { width, height, events })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with `t_start <= t < t_end`, as a borrowed slice.
    pub fn window(&self, t_start: u64, t_end: u64) -> Result<&[Event], EventError> {
        if t_start > t_end {
            return Err(EventError::InvalidWindow { start: t_start, end: t_end });
        }
        let lo = self.events.partition_point(|e| e.t < t_start);
        let hi = self.events.partition_point(|e| e.t < t_end);
        Ok(&self.events[lo..hi.max(lo)])
    }
}

/// Parse the textual event format. Errors carry 1-based line numbers.
pub fn parse_event_file(bytes: &[u8]) -> Result<EventStream, EventError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        EventError::Malformed { line, msg: "invalid UTF-8".into() }
    })?;

    let mut header: Option<(u32, u32)> = None;
    let mut events = Vec::new();
    let mut prev_t = 0u64;

    for (i, raw) in text.split('\n').enumerate() {
        let line = i + 1;
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let Some((width, height)) = header else {
            header = Some(parse_header(raw, line)?);
            continue;
        };

        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 4 {
            return Err(EventError::Malformed {
                line,
                msg: format!("expected 4 comma-separated fields, found {}", fields.len()),
            });
        }
        let t: u64 = parse_uint(fields[0], line, "t")?;
        let x: u32 = parse_uint(fields[1], line, "x")?;
        let y: u32 = parse_uint(fields[2], line, "y")?;
        let p = match fields[3] {
            "1" => Polarity::On,
            "-1" => Polarity::Off,
            other => return Err(EventError::Polarity { line, value: other.to_string() }),
        };
        if x >= width {
            return Err(EventError::OutOfRange { line, axis: 'x', value: x, dim: "width", limit: width });
        }
        if y >= height {
            return Err(EventError::OutOfRange { line, axis: 'y', value: y, dim: "height", limit: height });
        }
        if t < prev_t {
            return Err(EventError::DecreasingTimestamp { line, t, prev: prev_t });
        }
        prev_t = t;
        events.push(Event { t, x, y, p });
    }

    let (width, height) = header.ok_or(EventError::MissingHeader)?;
    Ok(EventStream { width, height, events })
}

fn parse_header(raw: &str, line: usize) -> Result<(u32, u32), EventError> {
    let parts: Vec<&str> = raw.split(' ').collect();
    if parts.len() != 2 {
        return Err(EventError::Malformed { line, msg: "header must be `width height`".into() });
    }
    let w: u32 = parse_uint(parts[0], line, "width")?;
    let h: u32 = parse_uint(parts[1], line, "height")?;
    if w == 0 || h == 0 {
        return Err(EventError::Malformed { line, msg: format!("degenerate resolution {w}x{h}") });
    }
    Ok((w, h))
}

// Plain ASCII digits only: no sign, no whitespace.
fn parse_uint<N: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<N, EventError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(EventError::Malformed { line, msg: format!("{what}: not an unsigned integer: {s:?}") });
    }
    s.parse()
        .map_err(|_| EventError::Malformed { line, msg: format!("{what}: value too large: {s}") })
}

/// Canonical serialization; the inverse of [`parse_event_file`] on valid streams.
pub fn serialize_event_stream(stream: &EventStream) -> Vec<u8> {
    let mut out = String::with_capacity(16 + stream.events.len() * 16);
    let _ = writeln!(out, "{} {}", stream.width, stream.height);
    for e in &stream.events {
        let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.sign());
    }
    out.into_bytes()
}

/// Events with `t_start <= t < t_end`, same resolution, order preserved.
pub fn slice_window(stream: &EventStream, t_start: u64, t_end: u64) -> Result<EventStream, EventError> {
    let events = stream.window(t_start, t_end)?.to_vec();
    Ok(EventStream { width: stream.width, height: stream.height, events })
}
