//! Brute-force oracles and input generators shared by the integration tests.
//! Oracles work on label strings and exact integer arithmetic and do not call
//! into the evaluator.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use arceval::catalogue::{ArtefactRef, GeneralScenario, GovernanceTag, QualityAttribute};
use arceval::format::{
    ApproachKind, ArchApproach, ArchitectureModel, Block, Component, ContextScenario, CoverageClaim, Document,
    ExternalAssessment, PriorityBlock, PriorityScore, SupportTarget,
};
use arceval::measures::{parse_measure, MetricName};
use arceval::prioritiser::Band;
use arceval::telemetry::{SpanKind, SpanRecord, Timestamp};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const PASS: &str = "pass";
pub const FAIL: &str = "fail";
pub const INSUFFICIENT: &str = "insufficient-data";

fn parent(component: &str) -> Option<&'static str> {
    match component {
        "short-term-memory" | "long-term-memory" => Some("agent-memory"),
        "vector-database" | "relational-database" => Some("knowledge-base"),
        _ => None,
    }
}

pub fn in_scope(r: &SpanRecord, id: &str, artefacts: &[&str]) -> bool {
    if !r.scenario_tags.is_empty() {
        return r.scenario_tags.iter().any(|t| t == id);
    }
    let Some(c) = r.artefact else { return false };
    let c = c.as_str();
    artefacts
        .iter()
        .any(|a| *a == "agent" || *a == c || parent(c) == Some(*a))
}

fn has_label(r: &SpanRecord, label: &str) -> bool {
    r.span_kind.as_str() == label || r.outcome_tags.iter().any(|t| t == label)
}

/// `a/b cmp c/d` with positive denominators.
pub fn holds_frac(cmp: &str, a: u128, b: u128, c: u128, d: u128) -> bool {
    holds(cmp, a * d, c * b)
}

pub fn holds<T: Ord>(cmp: &str, l: T, r: T) -> bool {
    match cmp {
        "<" => l < r,
        "<=" => l <= r,
        ">" => l > r,
        ">=" => l >= r,
        "==" => l == r,
        other => panic!("comparator {other}"),
    }
}

/// Share of population events carrying `tag`, threshold in thousandths.
pub fn ratio(
    events: &[SpanRecord],
    id: &str,
    artefacts: &[&str],
    tag: &str,
    population: Option<&str>,
    cmp: &str,
    th_milli: u128,
) -> &'static str {
    let mut pop = 0u128;
    let mut hits = 0u128;
    for e in events.iter().filter(|e| in_scope(e, id, artefacts)) {
        if population.is_some_and(|p| !has_label(e, p)) {
            continue;
        }
        pop += 1;
        if e.outcome_tags.iter().any(|t| t == tag) {
            hits += 1;
        }
    }
    if pop == 0 {
        INSUFFICIENT
    } else if holds_frac(cmp, hits, pop, th_milli, 1000) {
        PASS
    } else {
        FAIL
    }
}

/// Nearest-rank percentile (`p_tenths` of a percent, `None` for the
/// maximum) of whole-millisecond latencies against `limit_ms`.
pub fn latency(
    events: &[SpanRecord],
    id: &str,
    artefacts: &[&str],
    p_tenths: Option<u128>,
    cmp: &str,
    limit_ms: i64,
) -> &'static str {
    let mut lat: Vec<i64> = events
        .iter()
        .filter(|e| in_scope(e, id, artefacts))
        .filter_map(|e| e.latency_ms)
        .map(|l| {
            assert_eq!(l.fract(), 0.0);
            l as i64
        })
        .collect();
    if lat.is_empty() {
        return INSUFFICIENT;
    }
    lat.sort();
    let n = lat.len() as u128;
    let rank = match p_tenths {
        Some(p) => (1..=n).find(|k| k * 1000 >= p * n).unwrap(),
        None => n,
    };
    if holds(cmp, lat[rank as usize - 1], limit_ms) {
        PASS
    } else {
        FAIL
    }
}

/// Present required kinds over traces times required kinds.
pub fn completeness(
    events: &[SpanRecord],
    id: &str,
    artefacts: &[&str],
    kinds: &[&str],
    cmp: &str,
    th_milli: u128,
) -> &'static str {
    let mut traces: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in events.iter().filter(|e| in_scope(e, id, artefacts)) {
        let seen = traces.entry(e.trace_id.as_str()).or_default();
        if kinds.contains(&e.span_kind.as_str()) {
            seen.insert(e.span_kind.as_str());
        }
    }
    if traces.is_empty() {
        return INSUFFICIENT;
    }
    let found: usize = traces.values().map(BTreeSet::len).sum();
    let slots = traces.len() * kinds.len();
    if holds_frac(cmp, found as u128, slots as u128, th_milli, 1000) {
        PASS
    } else {
        FAIL
    }
}

/// Replays each trace in time order, closing the oldest pending open. An
/// unmatched open counts once the horizon shows no later close could meet
/// an upper bound.
#[allow(clippy::too_many_arguments)]
pub fn resolve(
    events: &[SpanRecord],
    id: &str,
    artefacts: &[&str],
    open: &str,
    close: &str,
    cmp: &str,
    limit_ms: i64,
    min_frac_milli: u128,
) -> &'static str {
    let horizon = events.iter().map(|e| e.ts.millis()).max();
    let mut by_trace: BTreeMap<&str, Vec<(i64, bool)>> = BTreeMap::new();
    for e in events.iter().filter(|e| in_scope(e, id, artefacts)) {
        let (o, c) = (has_label(e, open), has_label(e, close));
        assert!(!(o && c), "generator emits distinct open and close events");
        if o || c {
            by_trace
                .entry(e.trace_id.as_str())
                .or_default()
                .push((e.ts.millis(), c));
        }
    }
    let (mut within, mut decided) = (0u128, 0u128);
    for list in by_trace.values_mut() {
        // Opens sort before closes at the same instant.
        list.sort();
        let mut pending = VecDeque::new();
        for &(ts, is_close) in list.iter() {
            if !is_close {
                pending.push_back(ts);
            } else if let Some(o) = pending.pop_front() {
                decided += 1;
                if holds(cmp, ts - o, limit_ms) {
                    within += 1;
                }
            }
        }
        for o in pending {
            let elapsed = horizon.unwrap() - o;
            if matches!(cmp, "<" | "<=" | "==") && elapsed >= limit_ms {
                decided += 1;
            }
        }
    }
    if decided == 0 {
        INSUFFICIENT
    } else if within * 1000 >= min_frac_milli * decided {
        PASS
    } else {
        FAIL
    }
}

/// Per-window verdict sequence to monitor severities and the first trigger
/// index, computed by hand rules: insufficient windows are skipped, a pass
/// after a failure is a notice.
pub fn streak_table(outcomes: &[&str], persistence: u32) -> (Vec<Option<&'static str>>, Option<usize>) {
    let mut streak = 0;
    let mut failed_before = false;
    let mut trigger = None;
    let mut out = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        out.push(match *o {
            FAIL => {
                streak += 1;
                failed_before = true;
                if streak >= persistence {
                    trigger.get_or_insert(i);
                    Some("persistent-violation")
                } else {
                    Some("violation")
                }
            }
            PASS => {
                streak = 0;
                std::mem::take(&mut failed_before).then_some("notice")
            }
            _ => None,
        });
    }
    (out, trigger)
}

const ARTEFACTS: [ArtefactRef; 6] = [
    ArtefactRef::Retriever,
    ArtefactRef::Generator,
    ArtefactRef::ShortTermMemory,
    ArtefactRef::VectorDatabase,
    ArtefactRef::LogRepository,
    ArtefactRef::ReasoningPlanning,
];

pub const OUTCOME_TAGS: [&str; 3] = ["a", "b", "c"];

/// Random window of up to `max` events. Resolve events use either the
/// contest span kinds or the `open-x`/`close-x` tags, never both on one
/// event.
pub fn random_events(rng: &mut ChaCha8Rng, max: usize) -> Vec<SpanRecord> {
    let n = rng.gen_range(0..=max);
    let traces = rng.gen_range(1..=12);
    (0..n)
        .map(|_| {
            let ts = Timestamp::from_millis(1_700_000_000_000 + rng.gen_range(0..120_000));
            let kind = *SpanKind::ALL.choose(rng).unwrap();
            let mut r = SpanRecord::new(ts, format!("t{}", rng.gen_range(0..traces)), kind);
            r.scenario_tags = match rng.gen_range(0..10) {
                0..=4 => vec!["s".into()],
                5 | 6 => vec!["other".into()],
                7 => vec!["other".into(), "s".into()],
                _ => vec![],
            };
            if rng.gen_bool(0.6) {
                r.artefact = Some(*ARTEFACTS.choose(rng).unwrap());
            }
            if rng.gen_bool(0.7) {
                r.latency_ms = Some(rng.gen_range(0..3000) as f64);
            }
            for t in OUTCOME_TAGS {
                if rng.gen_bool(0.4) {
                    r.outcome_tags.push(t.into());
                }
            }
            let resolvable = !matches!(kind, SpanKind::ContestOpened | SpanKind::ContestResolved);
            if resolvable {
                match rng.gen_range(0..6) {
                    0 => r.outcome_tags.push("open-x".into()),
                    1 => r.outcome_tags.push("close-x".into()),
                    _ => {}
                }
            }
            r
        })
        .collect()
}

/// Scenario artefact sets used against `random_events`.
pub fn random_scope(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let pool = ["retriever", "agent-memory", "knowledge-base", "log-repository", "agent"];
    let k = rng.gen_range(1..=2);
    pool.choose_multiple(rng, k).copied().collect()
}

pub fn parse_spec(text: &str) -> arceval::measures::MeasureSpec {
    parse_measure(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

// Document generators.

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[ -~]{0,24}", "[ a-zé\"\\\\\n{}\\[\\]:,#]{0,16}", "\\PC{0,12}",]
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,8}"
}

fn tag() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,6}"
}

fn frac() -> impl Strategy<Value = String> {
    (0u32..=100).prop_map(|v| (v as f64 / 100.0).to_string())
}

fn cmp() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["<", "<=", ">", ">=", "=="])
}

fn window() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        (1u32..500).prop_map(|n| format!(" over window({n} events)")),
        (1u32..120).prop_map(|n| format!(" over window({n} s)")),
        (1u32..24).prop_map(|n| format!(" over window({n} h)")),
    ]
}

/// Measure source text covering every metric, comparator and unit.
pub fn measure_text() -> impl Strategy<Value = String> {
    let kinds = prop::sample::subsequence(SpanKind::ALL.to_vec(), 1..4)
        .prop_map(|k| k.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", "));
    let body = prop_oneof![
        (tag(), prop::option::of(tag()), frac()).prop_map(|(t, p, v)| match p {
            Some(p) => format!("ratio({t}, {p}) CMP {v}"),
            None => format!("ratio({t}) CMP {v}"),
        }),
        (1u32..=1000, 0u32..50_000, any::<bool>()).prop_map(|(p, v, s)| {
            let unit = if s { "s" } else { "ms" };
            format!("latency_pct({}) CMP {} {unit}", p as f64 / 10.0, v as f64 / 10.0)
        }),
        (0u32..50_000).prop_map(|v| format!("max_latency() CMP {v} ms")),
        (kinds, frac()).prop_map(|(k, v)| format!("completeness({k}) CMP {v}")),
        (tag(), tag(), prop::option::of(frac()), 0u32..100, any::<bool>()).prop_map(|(o, c, f, v, h)| {
            let f = f.map(|f| format!(", {f}")).unwrap_or_default();
            format!("resolve_within({o}, {c}{f}) CMP {v} {}", if h { "h" } else { "s" })
        }),
        (tag(), frac()).prop_map(|(t, v)| format!("judged({t}) CMP {v}")),
    ];
    (body, cmp(), window()).prop_map(|(b, c, w)| format!("{}{w}", b.replace("CMP", c)))
}

fn scenario() -> impl Strategy<Value = ContextScenario> {
    (
        ident(),
        prop::option::of(1u32..100),
        prop::sample::select(QualityAttribute::ALL.to_vec()),
        prop::option::of(prop::sample::select(Band::ALL.to_vec())),
        [text(), text(), text(), text()],
        prop::collection::vec(prop::sample::select(ArtefactRef::ALL.to_vec()), 1..4),
        prop::collection::vec(measure_text(), 0..4),
        prop::collection::vec((tag(), any::<bool>(), text()), 0..3),
    )
        .prop_map(
            |(id, seq, quality, priority, [source, stimulus, environment, response], artefacts, measures, a)| {
                ContextScenario {
                    id,
                    seq,
                    quality,
                    priority,
                    source,
                    stimulus,
                    environment,
                    artefacts,
                    response,
                    measures: measures.iter().map(|m| parse_spec(m)).collect(),
                    external_assessments: a
                        .into_iter()
                        .map(|(name, pass, note)| ExternalAssessment { name, pass, note })
                        .collect(),
                }
            },
        )
}

fn architecture() -> impl Strategy<Value = ArchitectureModel> {
    let approach = (
        prop::sample::select(ApproachKind::ALL.to_vec()),
        prop::collection::vec(any::<prop::sample::Index>(), 1..3),
        prop::collection::vec(
            prop_oneof![
                ident().prop_map(SupportTarget::Scenario),
                prop::sample::select(QualityAttribute::ALL.to_vec()).prop_map(SupportTarget::Quality),
            ],
            0..3,
        ),
        prop::sample::select(CoverageClaim::ALL.to_vec()),
        text(),
    );
    (
        ident(),
        prop_oneof![Just(String::new()), "[a-z0-9.-]{1,8}"],
        prop::collection::btree_map(ident(), (prop::sample::select(ArtefactRef::ALL.to_vec()), text()), 1..6),
        prop::collection::btree_map(ident(), approach, 0..4),
    )
        .prop_map(|(name, version_label, comps, approaches)| {
            let components: Vec<Component> = comps
                .into_iter()
                .map(|(id, (artefact, description))| Component {
                    id,
                    artefact,
                    description,
                })
                .collect();
            let approaches = approaches
                .into_iter()
                .map(|(id, (kind, picks, supports, coverage, description))| ArchApproach {
                    id,
                    kind,
                    components: picks.iter().map(|i| i.get(&components).id.clone()).collect(),
                    supports,
                    coverage,
                    description,
                })
                .collect();
            ArchitectureModel {
                name,
                version_label,
                components,
                approaches,
            }
        })
}

fn general() -> impl Strategy<Value = GeneralScenario> {
    (
        prop::sample::select(QualityAttribute::ALL.to_vec()),
        [text(), text(), text(), text()],
        prop::collection::vec(prop::sample::select(ArtefactRef::ALL.to_vec()), 1..4),
        prop::collection::vec(text(), 0..3),
        prop::sample::subsequence(MetricName::ALL.to_vec(), 0..3),
    )
        .prop_map(
            |(quality, [s, st, e, r], artefacts, measure_templates, suggested_metrics)| GeneralScenario {
                quality,
                source_template: s,
                stimulus_template: st,
                environment_template: e,
                artefacts,
                response_template: r,
                measure_templates,
                suggested_metrics,
            },
        )
}

fn block() -> impl Strategy<Value = Block> {
    prop_oneof![
        4 => scenario().prop_map(Block::Scenario),
        2 => architecture().prop_map(Block::Architecture),
        1 => (ident(), text(), prop::sample::subsequence(QualityAttribute::ALL.to_vec(), 0..3))
            .prop_map(|(id, text, default_qualities)| Block::Governance(GovernanceTag { id, text, default_qualities })),
        1 => (ident(), prop::collection::btree_map(ident(), (1u8..=5, 1u8..=5, 1u8..=5), 0..4)).prop_map(
            |(stakeholder, rows)| Block::Priorities(PriorityBlock {
                stakeholder,
                scores: rows
                    .into_iter()
                    .map(|(scenario, (impact, risk, relevance))| PriorityScore { scenario, impact, risk, relevance })
                    .collect(),
            })
        ),
        1 => general().prop_map(Block::General),
    ]
}

/// Valid documents: block keys unique per block kind.
pub fn document() -> impl Strategy<Value = Document> {
    prop::collection::vec(block(), 0..7).prop_map(|blocks| {
        let mut seen = BTreeSet::new();
        let blocks = blocks
            .into_iter()
            .filter(|b| {
                seen.insert(match b {
                    Block::Scenario(s) => ("scenario", s.id.clone()),
                    Block::Architecture(a) => ("architecture", a.label()),
                    Block::Governance(g) => ("governance", g.id.clone()),
                    Block::Priorities(p) => ("priorities", p.stakeholder.clone()),
                    Block::General(g) => ("general", g.quality.to_string()),
                })
            })
            .collect();
        Document::from_blocks(blocks)
    })
}

fn milli(v: f64) -> u128 {
    let m = (v * 1000.0).round();
    assert!(
        (v * 1000.0 - m).abs() < 1e-6,
        "threshold {v} has more than three decimals"
    );
    m as u128
}

fn limit_ms(spec: &arceval::measures::MeasureSpec) -> i64 {
    let ms = spec.threshold.value * spec.threshold.unit.millis().expect("time unit");
    assert!((ms - ms.round()).abs() < 1e-6, "limit {ms} ms is fractional");
    ms.round() as i64
}

/// Dispatches `spec` to the matching brute-force oracle.
pub fn oracle_for(
    spec: &arceval::measures::MeasureSpec,
    events: &[SpanRecord],
    id: &str,
    artefacts: &[&str],
) -> &'static str {
    use arceval::measures::Metric;
    let cmp = spec.comparator.as_str();
    match &spec.metric {
        Metric::Ratio { tag, population } => ratio(
            events,
            id,
            artefacts,
            tag.as_str(),
            population.as_ref().map(|p| p.as_str()),
            cmp,
            milli(spec.threshold.value),
        ),
        Metric::LatencyPct { percentile } => {
            let tenths = (percentile * 10.0).round();
            assert_eq!(tenths / 10.0, *percentile);
            latency(events, id, artefacts, Some(tenths as u128), cmp, limit_ms(spec))
        }
        Metric::MaxLatency => latency(events, id, artefacts, None, cmp, limit_ms(spec)),
        Metric::Completeness { kinds } => {
            let kinds: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
            completeness(events, id, artefacts, &kinds, cmp, milli(spec.threshold.value))
        }
        Metric::ResolveWithin {
            open,
            close,
            min_fraction,
        } => resolve(
            events,
            id,
            artefacts,
            open.as_str(),
            close.as_str(),
            cmp,
            limit_ms(spec),
            milli(*min_fraction),
        ),
        Metric::Judged { .. } => panic!("judged measures have no telemetry oracle"),
    }
}

pub fn artefact_labels(s: &ContextScenario) -> Vec<&'static str> {
    s.artefacts.iter().map(|a| a.as_str()).collect()
}
