//! Response-measure expressions.
//!
//! ```text
//! measure := metric "(" args ")" comparator NUMBER unit? ("over" "window" "(" NUMBER window-unit ")")?
//! metric  := ratio | latency_pct | max_latency | completeness | resolve_within | judged
//! ```
//!
//! | metric                              | observed                                  | units      |
//! |-------------------------------------|-------------------------------------------|------------|
//! | `ratio(tag[, population])`          | share of in-scope events with outcome tag | ratio      |
//! | `latency_pct(p)`                    | nearest-rank p-th percentile latency      | ms, s      |
//! | `max_latency()`                     | largest latency                           | ms, s      |
//! | `completeness(kind, ...)`           | share of required span kinds per trace    | ratio      |
//! | `resolve_within(open, close[, f])`  | share of opens closed within the deadline | s, h       |
//! | `judged(name)`                      | recorded external assessment              | ratio      |

mod eval;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::lexer::{tokenize, Cursor, Pos, TokenKind};
use crate::telemetry::{format_duration_ms, SpanKind, WindowError, WindowMode, WindowSpec};

pub use eval::{
    evaluate, evaluate_scenario, evaluate_with, nearest_rank, EvalOptions, MeasureVerdict, Outcome, ScenarioVerdict,
    Scope,
};

label_enum! {
    pub enum Comparator ("comparator") {
        Lt => "<",
        Le => "<=",
        Gt => ">",
        Ge => ">=",
        Eq => "==",
    }
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }
}

label_enum! {
    pub enum MetricName ("metric") {
        Ratio => "ratio",
        LatencyPct => "latency_pct",
        MaxLatency => "max_latency",
        Completeness => "completeness",
        ResolveWithin => "resolve_within",
        Judged => "judged",
    }
}

impl MetricName {
    /// Units a threshold may carry, default first.
    pub fn units(self) -> &'static [Unit] {
        match self {
            MetricName::Ratio | MetricName::Completeness | MetricName::Judged => &[Unit::Ratio],
            MetricName::LatencyPct | MetricName::MaxLatency => &[Unit::Ms, Unit::S],
            MetricName::ResolveWithin => &[Unit::S, Unit::H],
        }
    }

    /// Whether the metric is computed from telemetry rather than recorded
    /// human judgement.
    pub fn is_machine(self) -> bool {
        self != MetricName::Judged
    }
}

label_enum! {
    pub enum Unit ("unit") {
        Ratio => "ratio",
        Ms => "ms",
        S => "s",
        H => "h",
        Count => "count",
    }
}

impl Unit {
    /// Milliseconds per unit for time units.
    pub fn millis(self) -> Option<f64> {
        match self {
            Unit::Ms => Some(1.0),
            Unit::S => Some(1000.0),
            Unit::H => Some(3_600_000.0),
            Unit::Ratio | Unit::Count => None,
        }
    }
}

/// A tag or label argument: `[a-z][a-z0-9_-]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(String);

impl Tag {
    pub fn new(s: &str) -> Option<Tag> {
        let mut chars = s.chars();
        let first_ok = chars.next().is_some_and(|c| c.is_ascii_lowercase());
        let rest_ok = chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_');
        (first_ok && rest_ok).then(|| Tag(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// Share of in-scope events carrying `tag` among those matching
    /// `population` (a span kind or outcome tag), or all in-scope events.
    Ratio {
        tag: Tag,
        population: Option<Tag>,
    },
    LatencyPct {
        percentile: f64,
    },
    MaxLatency,
    Completeness {
        kinds: Vec<SpanKind>,
    },
    /// Passes when at least `min_fraction` of opens are closed in time.
    ResolveWithin {
        open: Tag,
        close: Tag,
        min_fraction: f64,
    },
    Judged {
        name: Tag,
    },
}

impl Metric {
    pub fn name(&self) -> MetricName {
        match self {
            Metric::Ratio { .. } => MetricName::Ratio,
            Metric::LatencyPct { .. } => MetricName::LatencyPct,
            Metric::MaxLatency => MetricName::MaxLatency,
            Metric::Completeness { .. } => MetricName::Completeness,
            Metric::ResolveWithin { .. } => MetricName::ResolveWithin,
            Metric::Judged { .. } => MetricName::Judged,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        match self {
            Metric::Ratio { tag, population } => {
                write!(f, "{tag}")?;
                if let Some(p) = population {
                    write!(f, ", {p}")?;
                }
            }
            Metric::LatencyPct { percentile } => write!(f, "{percentile}")?,
            Metric::MaxLatency => {}
            Metric::Completeness { kinds } => {
                for (i, k) in kinds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}")?;
                }
            }
            Metric::ResolveWithin {
                open,
                close,
                min_fraction,
            } => {
                write!(f, "{open}, {close}")?;
                if *min_fraction != 1.0 {
                    write!(f, ", {min_fraction}")?;
                }
            }
            Metric::Judged { name } => write!(f, "{name}")?,
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub unit: Unit,
}

/// A parsed response measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    pub metric: Metric,
    pub comparator: Comparator,
    pub threshold: Threshold,
    /// Tumbling window for monitoring; `None` means the whole evaluation
    /// window.
    pub window: Option<WindowSpec>,
}

impl MeasureSpec {
    pub fn is_machine(&self) -> bool {
        self.metric.name().is_machine()
    }

    /// Name of the external assessment a judged measure reads.
    pub fn judged_name(&self) -> Option<&str> {
        match &self.metric {
            Metric::Judged { name } => Some(name.as_str()),
            _ => None,
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.metric, self.comparator, self.threshold.value)?;
        if self.threshold.unit != Unit::Ratio {
            write!(f, " {}", self.threshold.unit)?;
        }
        if let Some(w) = &self.window {
            match w.mode {
                WindowMode::Count => write!(f, " over window({} events)", w.size)?,
                WindowMode::Duration => {
                    let text = format_duration_ms(w.size);
                    let split = text.find(|c: char| !c.is_ascii_digit()).unwrap_or(text.len());
                    write!(f, " over window({} {})", &text[..split], &text[split..])?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for MeasureSpec {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_measure(s)
    }
}

impl Serialize for MeasureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MeasureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct MeasureError {
    pub pos: Pos,
    pub kind: MeasureErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unit `{unit}` does not apply to {metric}; expected {expected}")]
    UnitMismatch {
        metric: MetricName,
        unit: Unit,
        expected: String,
    },
    #[error("percentile must lie in (0, 100], got {0}")]
    PercentileRange(String),
    #[error("ratio threshold must lie in [0,1], got {0}")]
    RatioRange(String),
    #[error("invalid tag `{0}`; tags are lowercase labels like `correct-reference`")]
    BadTag(String),
    #[error(transparent)]
    Window(#[from] WindowError),
}

fn err<T>(pos: Pos, kind: MeasureErrorKind) -> Result<T, MeasureError> {
    Err(MeasureError { pos, kind })
}

fn syntax<T>(pos: Pos, msg: impl Into<String>) -> Result<T, MeasureError> {
    err(pos, MeasureErrorKind::Syntax(msg.into()))
}

/// Parses a standalone measure expression.
pub fn parse_measure(text: &str) -> Result<MeasureSpec, MeasureError> {
    let tokens = tokenize(text).map_err(|e| MeasureError {
        pos: e.pos,
        kind: MeasureErrorKind::Syntax(e.message),
    })?;
    let mut cursor = Cursor::new(&tokens);
    let spec = parse_measure_tokens(&mut cursor)?;
    cursor.skip_newlines();
    let t = cursor.peek();
    if t.kind != TokenKind::Eof {
        return syntax(t.pos, format!("unexpected {} after measure", t.kind.describe()));
    }
    Ok(spec)
}

/// Parses one measure from `cursor`, leaving it on the following token.
pub fn parse_measure_tokens(cursor: &mut Cursor<'_>) -> Result<MeasureSpec, MeasureError> {
    let head = cursor.next();
    let name = match &head.kind {
        TokenKind::Ident(s) => s.parse::<MetricName>().map_err(|_| MeasureError {
            pos: head.pos,
            kind: MeasureErrorKind::UnknownMetric(s.clone()),
        })?,
        other => return syntax(head.pos, format!("expected a metric, found {}", other.describe())),
    };
    expect(cursor, &TokenKind::LParen)?;
    let args = parse_args(cursor)?;
    let metric = build_metric(name, head.pos, args)?;

    let cmp_tok = cursor.next();
    let comparator = match cmp_tok.kind {
        TokenKind::Cmp(c) => c,
        ref other => {
            return syntax(
                cmp_tok.pos,
                format!("expected a comparator, found {}", other.describe()),
            )
        }
    };
    let num_tok = cursor.next();
    let value = match num_tok.kind {
        TokenKind::Number(n) => n,
        ref other => return syntax(num_tok.pos, format!("expected a threshold, found {}", other.describe())),
    };

    let unit_tok = cursor.peek();
    let unit = match &unit_tok.kind {
        TokenKind::Ident(s) if s != "over" => {
            cursor.next();
            let unit = s.parse::<Unit>().map_err(|_| MeasureError {
                pos: unit_tok.pos,
                kind: MeasureErrorKind::Syntax(format!("unknown unit `{s}`")),
            })?;
            if !name.units().contains(&unit) {
                return err(
                    unit_tok.pos,
                    MeasureErrorKind::UnitMismatch {
                        metric: name,
                        unit,
                        expected: name
                            .units()
                            .iter()
                            .map(|u| format!("`{u}`"))
                            .collect::<Vec<_>>()
                            .join(" or "),
                    },
                );
            }
            unit
        }
        _ => name.units()[0],
    };
    if unit == Unit::Ratio && !(0.0..=1.0).contains(&value) {
        return err(num_tok.pos, MeasureErrorKind::RatioRange(value.to_string()));
    }

    let window = match &cursor.peek().kind {
        TokenKind::Ident(s) if s == "over" => {
            cursor.next();
            Some(parse_window(cursor)?)
        }
        _ => None,
    };

    Ok(MeasureSpec {
        metric,
        comparator,
        threshold: Threshold { value, unit },
        window,
    })
}

enum Arg {
    Label(String),
    Number(f64),
}

fn expect(cursor: &mut Cursor<'_>, kind: &TokenKind) -> Result<(), MeasureError> {
    let t = cursor.next();
    if &t.kind == kind {
        Ok(())
    } else {
        syntax(
            t.pos,
            format!("expected {}, found {}", kind.describe(), t.kind.describe()),
        )
    }
}

fn parse_args(cursor: &mut Cursor<'_>) -> Result<Vec<(Pos, Arg)>, MeasureError> {
    let mut args = Vec::new();
    if cursor.eat(&TokenKind::RParen) {
        return Ok(args);
    }
    loop {
        let t = cursor.next();
        let arg = match &t.kind {
            TokenKind::Ident(s) => Arg::Label(s.clone()),
            TokenKind::Number(n) => Arg::Number(*n),
            other => return syntax(t.pos, format!("expected an argument, found {}", other.describe())),
        };
        args.push((t.pos, arg));
        let sep = cursor.next();
        match sep.kind {
            TokenKind::Comma => continue,
            TokenKind::RParen => return Ok(args),
            ref other => return syntax(sep.pos, format!("expected `,` or `)`, found {}", other.describe())),
        }
    }
}

fn build_metric(name: MetricName, pos: Pos, args: Vec<(Pos, Arg)>) -> Result<Metric, MeasureError> {
    let arity = |lo: usize, hi: usize| -> Result<(), MeasureError> {
        if args.len() < lo || args.len() > hi {
            let want = if lo == hi {
                format!("{lo}")
            } else if hi == usize::MAX {
                format!("at least {lo}")
            } else {
                format!("{lo} to {hi}")
            };
            return syntax(pos, format!("{name} takes {want} argument(s), got {}", args.len()));
        }
        Ok(())
    };
    let tag = |(p, a): &(Pos, Arg)| -> Result<Tag, MeasureError> {
        match a {
            Arg::Label(s) => Tag::new(s).ok_or_else(|| MeasureError {
                pos: *p,
                kind: MeasureErrorKind::BadTag(s.clone()),
            }),
            Arg::Number(n) => err(*p, MeasureErrorKind::BadTag(n.to_string())),
        }
    };
    let number = |(p, a): &(Pos, Arg)| -> Result<f64, MeasureError> {
        match a {
            Arg::Number(n) => Ok(*n),
            Arg::Label(s) => syntax(*p, format!("expected a number, found `{s}`")),
        }
    };
    Ok(match name {
        MetricName::Ratio => {
            arity(1, 2)?;
            Metric::Ratio {
                tag: tag(&args[0])?,
                population: args.get(1).map(tag).transpose()?,
            }
        }
        MetricName::LatencyPct => {
            arity(1, 1)?;
            let p = number(&args[0])?;
            if !(p > 0.0 && p <= 100.0) {
                return err(args[0].0, MeasureErrorKind::PercentileRange(p.to_string()));
            }
            Metric::LatencyPct { percentile: p }
        }
        MetricName::MaxLatency => {
            arity(0, 0)?;
            Metric::MaxLatency
        }
        MetricName::Completeness => {
            arity(1, usize::MAX)?;
            let mut kinds = Vec::new();
            for arg in &args {
                let (p, label) = match arg {
                    (p, Arg::Label(s)) => (*p, s),
                    (p, Arg::Number(n)) => return syntax(*p, format!("expected a span kind, found {n}")),
                };
                let kind = label.parse::<SpanKind>().map_err(|e| MeasureError {
                    pos: p,
                    kind: MeasureErrorKind::Syntax(e.to_string()),
                })?;
                if kinds.contains(&kind) {
                    return syntax(p, format!("span kind `{kind}` listed twice"));
                }
                kinds.push(kind);
            }
            Metric::Completeness { kinds }
        }
        MetricName::ResolveWithin => {
            arity(2, 3)?;
            let min_fraction = match args.get(2) {
                Some(a) => {
                    let f = number(a)?;
                    if !(0.0..=1.0).contains(&f) {
                        return err(a.0, MeasureErrorKind::RatioRange(f.to_string()));
                    }
                    f
                }
                None => 1.0,
            };
            Metric::ResolveWithin {
                open: tag(&args[0])?,
                close: tag(&args[1])?,
                min_fraction,
            }
        }
        MetricName::Judged => {
            arity(1, 1)?;
            Metric::Judged { name: tag(&args[0])? }
        }
    })
}

fn parse_window(cursor: &mut Cursor<'_>) -> Result<WindowSpec, MeasureError> {
    let kw = cursor.next();
    if kw.kind != TokenKind::Ident("window".into()) {
        return syntax(kw.pos, format!("expected `window`, found {}", kw.kind.describe()));
    }
    expect(cursor, &TokenKind::LParen)?;
    let num = cursor.next();
    let TokenKind::Number(size) = num.kind else {
        return syntax(
            num.pos,
            format!("expected a window size, found {}", num.kind.describe()),
        );
    };
    let unit_tok = cursor.next();
    let (mode, factor) = match &unit_tok.kind {
        TokenKind::Ident(u) if u == "events" => (WindowMode::Count, 1.0),
        TokenKind::Ident(u) if u == "s" => (WindowMode::Duration, 1000.0),
        TokenKind::Ident(u) if u == "h" => (WindowMode::Duration, 3_600_000.0),
        other => {
            return syntax(
                unit_tok.pos,
                format!("expected `events`, `s` or `h`, found {}", other.describe()),
            )
        }
    };
    let scaled = size * factor;
    if scaled.fract() != 0.0 || scaled > u64::MAX as f64 {
        return syntax(num.pos, "window size must be a whole number of events or milliseconds");
    }
    expect(cursor, &TokenKind::RParen)?;
    WindowSpec::tumbling(mode, scaled as u64).map_err(|e| MeasureError {
        pos: num.pos,
        kind: e.into(),
    })
}
