//! Span records emitted by a running agent: line-delimited JSON ingest,
//! validation, and count/duration windowing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::catalogue::ArtefactRef;

label_enum! {
    /// Kind of traced operation.
    pub enum SpanKind ("span kind") {
        Goal => "goal",
        Reasoning => "reasoning",
        Planning => "planning",
        Workflow => "workflow",
        Task => "task",
        Tool => "tool",
        Evaluation => "evaluation",
        Fm => "fm",
        Feedback => "feedback",
        ContestOpened => "contest-opened",
        ContestResolved => "contest-resolved",
        Guardrail => "guardrail",
        Log => "log",
    }
}

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn add_millis(self, ms: i64) -> Self {
        Timestamp(self.0.saturating_add(ms))
    }

    pub fn to_rfc3339(self) -> String {
        DateTime::<Utc>::from_timestamp_millis(self.0)
            .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Millis, true))
            .unwrap_or_else(|| self.0.to_string())
    }
}

impl FromStr for Timestamp {
    type Err = String;

    /// RFC 3339 text; sub-millisecond digits are truncated.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateTime::parse_from_rfc3339(s)
            .map(|dt| Timestamp(dt.timestamp_millis()))
            .map_err(|e| format!("ts `{s}` is not an RFC 3339 timestamp ({e})"))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One telemetry event from an agent run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanRecord {
    pub ts: Timestamp,
    pub trace_id: String,
    pub span_kind: SpanKind,
    pub scenario_tags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artefact: Option<ArtefactRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    pub outcome_tags: Vec<String>,
    pub attrs: BTreeMap<String, String>,
}

impl SpanRecord {
    pub fn new(ts: Timestamp, trace_id: impl Into<String>, span_kind: SpanKind) -> Self {
        SpanRecord {
            ts,
            trace_id: trace_id.into(),
            span_kind,
            scenario_tags: Vec::new(),
            artefact: None,
            latency_ms: None,
            outcome_tags: Vec::new(),
            attrs: BTreeMap::new(),
        }
    }

    /// True when the span kind or one of the outcome tags equals `label`.
    pub fn has_label(&self, label: &str) -> bool {
        self.span_kind.as_str() == label || self.has_outcome(label)
    }

    pub fn has_outcome(&self, tag: &str) -> bool {
        self.outcome_tags.iter().any(|t| t == tag)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("span records serialise")
    }
}

const KNOWN_FIELDS: &[&str] = &[
    "ts",
    "trace_id",
    "span_kind",
    "scenario_tags",
    "artefact",
    "latency_ms",
    "outcome_tags",
    "attrs",
];

/// Parses one JSON line. Unknown top-level fields land in `attrs` (an
/// explicit `attrs` entry of the same name wins); `ts` accepts RFC 3339 text
/// or integer epoch milliseconds.
pub fn parse_record(line: &str) -> Result<SpanRecord, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(mut obj) = value else {
        return Err("record is not a JSON object".into());
    };

    let ts = match obj.remove("ts") {
        None | Some(Value::Null) => return Err("missing field ts".into()),
        Some(Value::String(s)) => s.parse::<Timestamp>()?,
        Some(Value::Number(n)) => match n.as_i64() {
            Some(ms) => Timestamp(ms),
            None => return Err(format!("ts `{n}` is not an integer millisecond count")),
        },
        Some(other) => return Err(format!("ts has unsupported type: {other}")),
    };
    let trace_id = match obj.remove("trace_id") {
        Some(Value::String(s)) if !s.is_empty() => s,
        Some(Value::String(_)) => return Err("trace_id is empty".into()),
        None | Some(Value::Null) => return Err("missing field trace_id".into()),
        Some(_) => return Err("trace_id must be a string".into()),
    };
    let span_kind = match obj.remove("span_kind") {
        Some(Value::String(s)) => s.parse::<SpanKind>().map_err(|e| e.to_string())?,
        None | Some(Value::Null) => return Err("missing field span_kind".into()),
        Some(_) => return Err("span_kind must be a string".into()),
    };
    let scenario_tags = string_list(obj.remove("scenario_tags"), "scenario_tags")?;
    let outcome_tags = string_list(obj.remove("outcome_tags"), "outcome_tags")?;
    let artefact = match obj.remove("artefact") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<ArtefactRef>().map_err(|e| e.to_string())?),
        Some(_) => return Err("artefact must be a string".into()),
    };
    let latency_ms = match obj.remove("latency_ms") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => {
            let v = n.as_f64().filter(|v| v.is_finite()).ok_or("latency_ms is not finite")?;
            if v < 0.0 {
                return Err("latency_ms < 0".into());
            }
            Some(v)
        }
        Some(_) => return Err("latency_ms must be a number".into()),
    };

    let mut attrs = BTreeMap::new();
    match obj.remove("attrs") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (k, v) in map {
                attrs.insert(k, flatten(v));
            }
        }
        Some(_) => return Err("attrs must be an object".into()),
    }
    for (k, v) in obj {
        debug_assert!(!KNOWN_FIELDS.contains(&k.as_str()));
        attrs.entry(k).or_insert_with(|| flatten(v));
    }

    Ok(SpanRecord {
        ts,
        trace_id,
        span_kind,
        scenario_tags,
        artefact,
        latency_ms,
        outcome_tags,
        attrs,
    })
}

fn string_list(value: Option<Value>, field: &str) -> Result<Vec<String>, String> {
    match value {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(format!("{field} entries must be strings")),
            })
            .collect(),
        Some(_) => Err(format!("{field} must be an array")),
    }
}

fn flatten(value: Value) -> String {
    match value {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// A line that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub accepted: Vec<SpanRecord>,
    pub rejected: Vec<Rejection>,
}

/// Reads JSONL span records. Blank lines are skipped; malformed lines are
/// rejected individually. Input order is preserved. Only I/O failures are
/// fatal.
pub fn ingest<R: BufRead>(reader: R) -> io::Result<Ingested> {
    let mut out = Ingested::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        push_line(&mut out, idx + 1, &line);
    }
    Ok(out)
}

pub fn ingest_str(text: &str) -> Ingested {
    let mut out = Ingested::default();
    for (idx, line) in text.lines().enumerate() {
        push_line(&mut out, idx + 1, line);
    }
    out
}

fn push_line(out: &mut Ingested, line_no: usize, line: &str) {
    if line.trim().is_empty() {
        return;
    }
    match parse_record(line) {
        Ok(rec) => out.accepted.push(rec),
        Err(reason) => out.rejected.push(Rejection { line: line_no, reason }),
    }
}

/// Records as JSONL, one per line, each line newline-terminated.
pub fn serialize_records(records: &[SpanRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

/// Stable sort by timestamp; equal timestamps keep input order.
pub fn sort_records(records: &mut [SpanRecord]) {
    records.sort_by_key(|r| r.ts);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    Count,
    Duration,
}

/// Window shape. Count windows measure size and stride in events; duration
/// windows in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowSpec {
    pub mode: WindowMode,
    pub size: u64,
    pub stride: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("window size must be positive")]
    ZeroSize,
    #[error("window stride must be positive")]
    ZeroStride,
    #[error("window stride {stride} exceeds size {size}")]
    StrideExceedsSize { size: u64, stride: u64 },
    #[error("cannot mix event counts and durations in one window spec")]
    MixedModes,
    #[error("invalid window `{0}`; expected e.g. `100`, `100/50`, `60s`, `60s/30s` or `1h`")]
    Syntax(String),
}

impl WindowSpec {
    pub fn count(size: u64, stride: u64) -> Result<Self, WindowError> {
        WindowSpec {
            mode: WindowMode::Count,
            size,
            stride,
        }
        .validated()
    }

    pub fn duration_ms(size: u64, stride: u64) -> Result<Self, WindowError> {
        WindowSpec {
            mode: WindowMode::Duration,
            size,
            stride,
        }
        .validated()
    }

    /// Tumbling window: stride equals size.
    pub fn tumbling(mode: WindowMode, size: u64) -> Result<Self, WindowError> {
        WindowSpec {
            mode,
            size,
            stride: size,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, WindowError> {
        if self.size == 0 {
            return Err(WindowError::ZeroSize);
        }
        if self.stride == 0 {
            return Err(WindowError::ZeroStride);
        }
        if self.stride > self.size {
            return Err(WindowError::StrideExceedsSize {
                size: self.size,
                stride: self.stride,
            });
        }
        Ok(self)
    }
}

/// Formats an amount of milliseconds in the largest exact unit among h, s, ms.
pub(crate) fn format_duration_ms(ms: u64) -> String {
    if ms.is_multiple_of(3_600_000) {
        format!("{}h", ms / 3_600_000)
    } else if ms.is_multiple_of(1000) {
        format!("{}s", ms / 1000)
    } else {
        format!("{ms}ms")
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let part = |v: u64| match self.mode {
            WindowMode::Count => v.to_string(),
            WindowMode::Duration => format_duration_ms(v),
        };
        if self.size == self.stride {
            write!(f, "{}", part(self.size))
        } else {
            write!(f, "{}/{}", part(self.size), part(self.stride))
        }
    }
}

impl FromStr for WindowSpec {
    type Err = WindowError;

    /// `size[/stride]`, where each part is an event count (`100`) or a
    /// duration with an `ms`, `s` or `h` suffix (`30s`, `1.5h`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || WindowError::Syntax(s.to_string());
        let part = |p: &str| -> Result<(WindowMode, u64), WindowError> {
            let p = p.trim();
            let split = p.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(p.len());
            let (num, unit) = p.split_at(split);
            let value: f64 = num.parse().map_err(|_| syntax())?;
            let (mode, factor) = match unit.trim() {
                "" | "events" => (WindowMode::Count, 1.0),
                "ms" => (WindowMode::Duration, 1.0),
                "s" => (WindowMode::Duration, 1000.0),
                "h" => (WindowMode::Duration, 3_600_000.0),
                _ => return Err(syntax()),
            };
            let scaled = value * factor;
            if scaled.fract() != 0.0 || !scaled.is_finite() || scaled < 0.0 {
                return Err(syntax());
            }
            Ok((mode, scaled as u64))
        };
        let (size_part, stride_part) = match s.split_once('/') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let (mode, size) = part(size_part)?;
        let stride = match stride_part {
            Some(p) => {
                let (m, v) = part(p)?;
                if m != mode {
                    return Err(WindowError::MixedModes);
                }
                v
            }
            None => size,
        };
        WindowSpec { mode, size, stride }.validated()
    }
}

impl Serialize for WindowSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for WindowSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contiguous run of time-sorted records.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub index: usize,
    pub start: Timestamp,
    /// Last instant the window covers (inclusive).
    pub end: Timestamp,
    pub records: &'a [SpanRecord],
}

/// Records sorted by `(ts, input order)` together with window bounds.
#[derive(Debug, Clone)]
pub struct Windowed {
    pub records: Vec<SpanRecord>,
    bounds: Vec<(usize, usize, Timestamp, Timestamp)>,
}

impl Windowed {
    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<Window<'_>> {
        self.bounds.get(index).map(|&(lo, hi, start, end)| Window {
            index,
            start,
            end,
            records: &self.records[lo..hi],
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Window<'_>> + '_ {
        (0..self.bounds.len()).filter_map(move |i| self.get(i))
    }
}

/// Sorts `records` and cuts them into windows.
///
/// Windows start at the first record and advance by `stride` until one
/// reaches past the last record. Duration windows are half-open
/// `[start, start + size)` and may be empty when the trace has gaps. With
/// `stride <= size` every record lands in at least one window.
pub fn windows(records: &[SpanRecord], spec: &WindowSpec) -> Result<Windowed, WindowError> {
    let spec = spec.validated()?;
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut bounds = Vec::new();
    if sorted.is_empty() {
        return Ok(Windowed {
            records: sorted,
            bounds,
        });
    }
    match spec.mode {
        WindowMode::Count => {
            let n = sorted.len();
            let size = usize::try_from(spec.size).unwrap_or(usize::MAX);
            let stride = usize::try_from(spec.stride).unwrap_or(usize::MAX);
            let mut lo = 0usize;
            loop {
                let hi = lo.saturating_add(size).min(n);
                bounds.push((lo, hi, sorted[lo].ts, sorted[hi - 1].ts));
                if hi >= n {
                    break;
                }
                lo += stride;
            }
        }
        WindowMode::Duration => {
            let first = sorted[0].ts.millis();
            let last = sorted[sorted.len() - 1].ts.millis();
            let size = i64::try_from(spec.size).unwrap_or(i64::MAX);
            let stride = i64::try_from(spec.stride).unwrap_or(i64::MAX);
            let mut start = first;
            let mut lo = 0usize;
            loop {
                let end = start.saturating_add(size);
                while lo < sorted.len() && sorted[lo].ts.millis() < start {
                    lo += 1;
                }
                let hi = lo + sorted[lo..].partition_point(|r| r.ts.millis() < end);
                bounds.push((lo, hi, Timestamp::from_millis(start), Timestamp::from_millis(end - 1)));
                if end > last {
                    break;
                }
                start = start.saturating_add(stride);
            }
        }
    }
    Ok(Windowed {
        records: sorted,
        bounds,
    })
}
