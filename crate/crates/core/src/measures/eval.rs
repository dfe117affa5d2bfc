use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::{Comparator, MeasureSpec, Metric, Tag, Threshold, Unit};
use crate::catalogue::ArtefactRef;
use crate::format::{ContextScenario, ExternalAssessment};
use crate::telemetry::{SpanRecord, Timestamp};

label_enum! {
    pub enum Outcome ("outcome") {
        Pass => "pass",
        Fail => "fail",
        InsufficientData => "insufficient-data",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureVerdict {
    pub spec: MeasureSpec,
    /// In the threshold's unit. Absent when data is insufficient.
    pub observed: Option<f64>,
    pub population: usize,
    pub outcome: Outcome,
}

impl MeasureVerdict {
    fn insufficient(spec: &MeasureSpec, population: usize) -> Self {
        MeasureVerdict {
            spec: spec.clone(),
            observed: None,
            population,
            outcome: Outcome::InsufficientData,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Smallest population for ratio, latency and completeness metrics.
    pub min_population: usize,
    /// Smallest number of decided open events for `resolve_within`.
    pub min_pairs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            min_population: 1,
            min_pairs: 1,
        }
    }
}

/// Which records belong to a scenario: those tagged with its id, plus
/// untagged records emitted by one of its artefacts.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub scenario: &'a str,
    pub artefacts: &'a [ArtefactRef],
}

impl<'a> Scope<'a> {
    pub fn of(scenario: &'a ContextScenario) -> Self {
        Scope {
            scenario: &scenario.id,
            artefacts: &scenario.artefacts,
        }
    }

    pub fn contains(&self, record: &SpanRecord) -> bool {
        if !record.scenario_tags.is_empty() {
            return record.scenario_tags.iter().any(|t| t == self.scenario);
        }
        match record.artefact {
            Some(a) => self.artefacts.iter().any(|s| s.is_realised_by(a)),
            None => false,
        }
    }
}

/// Index (0-based) of the nearest-rank `p`-th percentile in a sorted sample
/// of `n` values: `ceil(p/100 * n) - 1`, computed in integers with `p`
/// rounded to six decimals.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    debug_assert!(n > 0 && p > 0.0 && p <= 100.0);
    let p_micro = (p * 1e6).round() as u128;
    let rank = (p_micro * n as u128).div_ceil(100_000_000);
    (rank.max(1) as usize).min(n) - 1
}

/// Evaluates `spec` over `events`. Overdue opens for `resolve_within` are
/// judged against the last event's timestamp.
pub fn evaluate(spec: &MeasureSpec, events: &[SpanRecord], scope: &Scope<'_>) -> MeasureVerdict {
    let horizon = events.iter().map(|e| e.ts).max();
    evaluate_with(spec, events, scope, &EvalOptions::default(), horizon)
}

/// As [`evaluate`], with explicit options and horizon. `spec.window` is not
/// consulted; windowing is the caller's job.
pub fn evaluate_with(
    spec: &MeasureSpec,
    events: &[SpanRecord],
    scope: &Scope<'_>,
    options: &EvalOptions,
    horizon: Option<Timestamp>,
) -> MeasureVerdict {
    let in_scope: Vec<&SpanRecord> = events.iter().filter(|e| scope.contains(e)).collect();
    let th = spec.threshold;
    let decide = |observed: f64, population: usize, passed: bool, floor: usize| {
        if population < floor.max(1) {
            MeasureVerdict::insufficient(spec, population)
        } else {
            MeasureVerdict {
                spec: spec.clone(),
                observed: Some(observed),
                population,
                outcome: if passed { Outcome::Pass } else { Outcome::Fail },
            }
        }
    };
    match &spec.metric {
        Metric::Ratio { tag, population } => {
            let pop: Vec<_> = in_scope
                .iter()
                .filter(|e| population.as_ref().is_none_or(|p| e.has_label(p.as_str())))
                .collect();
            let hits = pop.iter().filter(|e| e.has_outcome(tag.as_str())).count();
            let observed = if pop.is_empty() {
                0.0
            } else {
                hits as f64 / pop.len() as f64
            };
            decide(
                observed,
                pop.len(),
                spec.comparator.holds(observed, th.value),
                options.min_population,
            )
        }
        Metric::LatencyPct { .. } | Metric::MaxLatency => {
            let mut lat: Vec<f64> = in_scope.iter().filter_map(|e| e.latency_ms).collect();
            if lat.is_empty() {
                return MeasureVerdict::insufficient(spec, 0);
            }
            lat.sort_by(f64::total_cmp);
            let ms = match &spec.metric {
                Metric::LatencyPct { percentile } => lat[nearest_rank(*percentile, lat.len())],
                _ => lat[lat.len() - 1],
            };
            let observed = to_unit(ms, th.unit);
            decide(
                observed,
                lat.len(),
                spec.comparator.holds(observed, th.value),
                options.min_population,
            )
        }
        Metric::Completeness { kinds } => {
            let mut present: BTreeMap<&str, BTreeSet<_>> = BTreeMap::new();
            for e in &in_scope {
                let entry = present.entry(e.trace_id.as_str()).or_default();
                if kinds.contains(&e.span_kind) {
                    entry.insert(e.span_kind);
                }
            }
            let traces = present.len();
            let found: usize = present.values().map(BTreeSet::len).sum();
            let observed = if traces == 0 {
                0.0
            } else {
                found as f64 / (traces * kinds.len()) as f64
            };
            decide(
                observed,
                traces,
                spec.comparator.holds(observed, th.value),
                options.min_population,
            )
        }
        Metric::ResolveWithin {
            open,
            close,
            min_fraction,
        } => {
            let (within, decided) = resolve(&in_scope, open, close, spec.comparator, th, horizon);
            let observed = if decided == 0 {
                0.0
            } else {
                within as f64 / decided as f64
            };
            decide(observed, decided, observed >= *min_fraction, options.min_pairs)
        }
        Metric::Judged { .. } => MeasureVerdict::insufficient(spec, 0),
    }
}

fn to_unit(ms: f64, unit: Unit) -> f64 {
    ms / unit.millis().unwrap_or(1.0)
}

/// Pairs each open with the earliest unused close of the same trace at or
/// after it, opens taken in time order. Returns `(within, decided)`: opens
/// closed in time, and opens whose outcome is known by `horizon`.
fn resolve(
    events: &[&SpanRecord],
    open: &Tag,
    close: &Tag,
    cmp: Comparator,
    th: Threshold,
    horizon: Option<Timestamp>,
) -> (usize, usize) {
    let mut ordered: Vec<&SpanRecord> = events.to_vec();
    ordered.sort_by_key(|e| e.ts);
    let mut closes: BTreeMap<&str, VecDeque<Timestamp>> = BTreeMap::new();
    for e in &ordered {
        if e.has_label(close.as_str()) {
            closes.entry(e.trace_id.as_str()).or_default().push_back(e.ts);
        }
    }
    let (mut within, mut decided) = (0, 0);
    for e in ordered.iter().filter(|e| e.has_label(open.as_str())) {
        let queue = closes.entry(e.trace_id.as_str()).or_default();
        // Closes earlier than this open can never pair with a later open.
        while queue.front().is_some_and(|c| *c < e.ts) {
            queue.pop_front();
        }
        match queue.pop_front() {
            Some(c) => {
                decided += 1;
                let delay = to_unit((c.millis() - e.ts.millis()) as f64, th.unit);
                if cmp.holds(delay, th.value) {
                    within += 1;
                }
            }
            None => {
                let Some(h) = horizon else { continue };
                let elapsed = to_unit((h.millis() - e.ts.millis()) as f64, th.unit);
                let overdue = match cmp {
                    Comparator::Lt | Comparator::Le | Comparator::Eq => elapsed >= th.value,
                    Comparator::Gt | Comparator::Ge => false,
                };
                if overdue {
                    decided += 1;
                }
            }
        }
    }
    (within, decided)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioVerdict {
    pub scenario: String,
    pub verdicts: Vec<MeasureVerdict>,
    pub outcome: Outcome,
}

/// One verdict per declared measure plus one per external assessment that
/// no `judged` measure reads. Judged measures read matching assessments from
/// `assessments`, falling back to those recorded on the scenario; they pass
/// when every matching record passes. The scenario passes iff every verdict
/// passes, fails if any fails, and is insufficient otherwise.
pub fn evaluate_scenario(
    scenario: &ContextScenario,
    events: &[SpanRecord],
    assessments: &[ExternalAssessment],
) -> ScenarioVerdict {
    let scope = Scope::of(scenario);
    let horizon = events.iter().map(|e| e.ts).max();
    let options = EvalOptions::default();
    let lookup = |name: &str| -> Vec<&ExternalAssessment> {
        let given: Vec<_> = assessments.iter().filter(|a| a.name == name).collect();
        if given.is_empty() {
            scenario
                .external_assessments
                .iter()
                .filter(|a| a.name == name)
                .collect()
        } else {
            given
        }
    };
    let judged = |spec: &MeasureSpec, records: Vec<&ExternalAssessment>| {
        if records.is_empty() {
            return MeasureVerdict::insufficient(spec, 0);
        }
        let passed = records.iter().filter(|a| a.pass).count();
        MeasureVerdict {
            spec: spec.clone(),
            observed: Some(passed as f64 / records.len() as f64),
            population: records.len(),
            outcome: if passed == records.len() {
                Outcome::Pass
            } else {
                Outcome::Fail
            },
        }
    };

    let mut verdicts = Vec::new();
    let mut read = BTreeSet::new();
    for spec in &scenario.measures {
        let v = match spec.judged_name() {
            Some(name) => {
                read.insert(name.to_string());
                judged(spec, lookup(name))
            }
            None => evaluate_with(spec, events, &scope, &options, horizon),
        };
        verdicts.push(v);
    }
    let mut extra: Vec<&str> = assessments
        .iter()
        .chain(&scenario.external_assessments)
        .map(|a| a.name.as_str())
        .collect();
    extra.dedup();
    for name in extra {
        if read.contains(name) {
            continue;
        }
        read.insert(name.to_string());
        let Some(tag) = Tag::new(name) else { continue };
        let spec = MeasureSpec {
            metric: Metric::Judged { name: tag },
            comparator: Comparator::Ge,
            threshold: Threshold {
                value: 1.0,
                unit: Unit::Ratio,
            },
            window: None,
        };
        verdicts.push(judged(&spec, lookup(name)));
    }
    let outcome = combine(verdicts.iter().map(|v| v.outcome));
    ScenarioVerdict {
        scenario: scenario.id.clone(),
        verdicts,
        outcome,
    }
}

/// Empty gives insufficient data; any failure fails; all passes pass.
pub(crate) fn combine(outcomes: impl IntoIterator<Item = Outcome>) -> Outcome {
    let mut any = false;
    let mut all_pass = true;
    for o in outcomes {
        any = true;
        match o {
            Outcome::Fail => return Outcome::Fail,
            Outcome::InsufficientData => all_pass = false,
            Outcome::Pass => {}
        }
    }
    if any && all_pass {
        Outcome::Pass
    } else {
        Outcome::InsufficientData
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::parse_measure;
    use crate::telemetry::SpanKind;
    use proptest::prelude::*;

    const SCENARIO: &str = "s";
    const SCOPE: Scope<'static> = Scope {
        scenario: SCENARIO,
        artefacts: &[],
    };

    fn ev(ts: i64, trace: &str, kind: SpanKind) -> SpanRecord {
        let mut r = SpanRecord::new(Timestamp::from_millis(ts), trace, kind);
        r.scenario_tags = vec![SCENARIO.into()];
        r
    }

    fn with_outcomes(mut r: SpanRecord, tags: &[&str]) -> SpanRecord {
        r.outcome_tags = tags.iter().map(|s| s.to_string()).collect();
        r
    }

    fn with_latency(mut r: SpanRecord, ms: f64) -> SpanRecord {
        r.latency_ms = Some(ms);
        r
    }

    #[test]
    fn ratio_boundary_is_inclusive() {
        let spec = parse_measure("ratio(sensitive_filtered) >= 0.99").unwrap();
        let events: Vec<_> = (0..100)
            .map(|i| {
                let r = ev(i, "t", SpanKind::Guardrail);
                if i < 99 {
                    with_outcomes(r, &["sensitive_filtered"])
                } else {
                    r
                }
            })
            .collect();
        let v = evaluate(&spec, &events, &SCOPE);
        assert_eq!(v.observed, Some(0.99));
        assert_eq!(v.population, 100);
        assert_eq!(v.outcome, Outcome::Pass);
    }

    #[test]
    fn full_percentile_latency_fails_on_slow_query() {
        let spec = parse_measure("latency_pct(100) < 1 s").unwrap();
        let events: Vec<_> = [400.0, 900.0, 1200.0]
            .iter()
            .enumerate()
            .map(|(i, ms)| with_latency(ev(i as i64, "t", SpanKind::Fm), *ms))
            .collect();
        let v = evaluate(&spec, &events, &SCOPE);
        assert_eq!(v.observed, Some(1.2));
        assert_eq!(v.outcome, Outcome::Fail);
    }

    #[test]
    fn empty_input_is_insufficient_for_every_metric() {
        for text in [
            "ratio(x) >= 0.5",
            "latency_pct(50) < 1 s",
            "max_latency() < 1 s",
            "completeness(goal) >= 1",
            "resolve_within(a, b) <= 1 h",
            "judged(x) >= 1",
        ] {
            let v = evaluate(&parse_measure(text).unwrap(), &[], &SCOPE);
            assert_eq!(v.outcome, Outcome::InsufficientData, "{text}");
            assert_eq!(v.observed, None);
        }
    }

    #[test]
    fn contest_resolved_within_deadline() {
        let spec = parse_measure("resolve_within(contest-opened, contest-resolved) <= 48 h").unwrap();
        let hour = 3_600_000;
        let events = vec![
            ev(0, "c1", SpanKind::ContestOpened),
            ev(47 * hour, "c1", SpanKind::ContestResolved),
        ];
        let v = evaluate(&spec, &events, &SCOPE);
        assert_eq!((v.observed, v.population, v.outcome), (Some(1.0), 1, Outcome::Pass));

        // the same pair 49 h apart misses
        let late = vec![
            ev(0, "c1", SpanKind::ContestOpened),
            ev(49 * hour, "c1", SpanKind::ContestResolved),
        ];
        assert_eq!(evaluate(&spec, &late, &SCOPE).outcome, Outcome::Fail);

        // an unresolved open still inside its deadline is pending
        let pending = vec![ev(0, "c1", SpanKind::ContestOpened), ev(hour, "x", SpanKind::Fm)];
        assert_eq!(evaluate(&spec, &pending, &SCOPE).outcome, Outcome::InsufficientData);

        // past its deadline it counts as missed
        let overdue = vec![ev(0, "c1", SpanKind::ContestOpened), ev(50 * hour, "x", SpanKind::Fm)];
        let v = evaluate(&spec, &overdue, &SCOPE);
        assert_eq!((v.observed, v.outcome), (Some(0.0), Outcome::Fail));
    }

    #[test]
    fn completeness_counts_kinds_per_trace() {
        let spec = parse_measure("completeness(goal, fm, feedback) >= 1").unwrap();
        let mut events = vec![
            ev(0, "a", SpanKind::Goal),
            ev(1, "a", SpanKind::Fm),
            ev(2, "a", SpanKind::Feedback),
            ev(3, "b", SpanKind::Goal),
            ev(4, "b", SpanKind::Fm),
        ];
        let v = evaluate(&spec, &events, &SCOPE);
        assert_eq!(v.population, 2);
        assert_eq!(v.observed, Some(5.0 / 6.0));
        assert_eq!(v.outcome, Outcome::Fail);
        events.push(ev(5, "b", SpanKind::Feedback));
        assert_eq!(evaluate(&spec, &events, &SCOPE).outcome, Outcome::Pass);
    }

    #[test]
    fn ratio_population_filter() {
        let spec = parse_measure("ratio(correct-update, feedback-valid) >= 0.99").unwrap();
        let events = vec![
            with_outcomes(ev(0, "a", SpanKind::Feedback), &["feedback-valid", "correct-update"]),
            with_outcomes(ev(1, "b", SpanKind::Feedback), &["feedback-invalid"]),
        ];
        let v = evaluate(&spec, &events, &SCOPE);
        assert_eq!((v.population, v.outcome), (1, Outcome::Pass));
    }

    #[test]
    fn scope_uses_tags_then_artefacts() {
        let artefacts = [ArtefactRef::AgentMemory];
        let scope = Scope {
            scenario: "s2",
            artefacts: &artefacts,
        };
        let mut tagged = SpanRecord::new(Timestamp::from_millis(0), "t", SpanKind::Fm);
        tagged.scenario_tags = vec!["s1".into()];
        tagged.artefact = Some(ArtefactRef::AgentMemory);
        assert!(!scope.contains(&tagged));
        let mut untagged = SpanRecord::new(Timestamp::from_millis(0), "t", SpanKind::Fm);
        untagged.artefact = Some(ArtefactRef::LongTermMemory);
        assert!(scope.contains(&untagged));
        untagged.artefact = Some(ArtefactRef::Retriever);
        assert!(!scope.contains(&untagged));
    }

    fn scenario(measures: &[&str], assessments: &[(&str, bool)]) -> ContextScenario {
        ContextScenario {
            id: SCENARIO.into(),
            seq: None,
            quality: crate::catalogue::QualityAttribute::Accuracy,
            priority: None,
            source: "src".into(),
            stimulus: "st".into(),
            environment: "env".into(),
            artefacts: vec![ArtefactRef::Agent],
            response: "resp".into(),
            measures: measures.iter().map(|m| parse_measure(m).unwrap()).collect(),
            external_assessments: assessments
                .iter()
                .map(|(n, p)| ExternalAssessment {
                    name: n.to_string(),
                    pass: *p,
                    note: String::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn scenario_with_two_ratio_measures() {
        let s = scenario(&["ratio(relevant) >= 0.95", "ratio(correct-reference) >= 0.95"], &[]);
        let events: Vec<_> = (0..100)
            .map(|i| {
                let mut tags = vec![];
                if i < 96 {
                    tags.push("relevant");
                }
                if i < 94 {
                    tags.push("correct-reference");
                }
                with_outcomes(ev(i, &i.to_string(), SpanKind::Fm), &tags)
            })
            .collect();
        let v = evaluate_scenario(&s, &events, &[]);
        let outcomes: Vec<_> = v.verdicts.iter().map(|v| v.outcome).collect();
        assert_eq!(outcomes, vec![Outcome::Pass, Outcome::Fail]);
        assert_eq!(v.outcome, Outcome::Fail);
    }

    #[test]
    fn assessments_only() {
        let s = scenario(&[], &[("reviewed", true), ("audited", true)]);
        let v = evaluate_scenario(&s, &[], &[]);
        assert_eq!(v.verdicts.len(), 2);
        assert_eq!(v.outcome, Outcome::Pass);
    }

    #[test]
    fn judged_measure_reads_assessments() {
        let s = scenario(&["judged(users-understand-explanation) >= 0.95"], &[]);
        assert_eq!(evaluate_scenario(&s, &[], &[]).outcome, Outcome::InsufficientData);
        let given = [ExternalAssessment {
            name: "users-understand-explanation".into(),
            pass: true,
            note: "survey".into(),
        }];
        let v = evaluate_scenario(&s, &[], &given);
        assert_eq!(v.verdicts.len(), 1);
        assert_eq!(v.outcome, Outcome::Pass);
    }

    #[test]
    fn no_measures_is_insufficient() {
        let v = evaluate_scenario(&scenario(&[], &[]), &[], &[]);
        assert!(v.verdicts.is_empty());
        assert_eq!(v.outcome, Outcome::InsufficientData);
    }

    #[test]
    fn nearest_rank_small_cases() {
        assert_eq!(nearest_rank(100.0, 3), 2);
        assert_eq!(nearest_rank(50.0, 4), 1);
        assert_eq!(nearest_rank(50.0, 5), 2);
        assert_eq!(nearest_rank(0.1, 5), 0);
        assert_eq!(nearest_rank(95.0, 20), 18);
        assert_eq!(nearest_rank(95.0, 1000), 949);
    }

    /// Smallest order statistic whose rank covers at least p percent.
    fn percentile_oracle(sorted: &[f64], p: f64) -> f64 {
        let n = sorted.len();
        for k in 1..=n {
            // k/n >= p/100, compared exactly on tenths of a percent
            if (k as u128) * 1000 * 100 >= (p * 1000.0).round() as u128 * n as u128 {
                return sorted[k - 1];
            }
        }
        sorted[n - 1]
    }

    /// Event-driven FIFO matcher: within each timestamp, opens before closes.
    fn resolve_oracle(events: &[SpanRecord], limit_ms: i64, horizon: i64) -> (usize, usize) {
        let mut ev: Vec<_> = events.iter().collect();
        ev.sort_by_key(|e| (e.ts, !e.has_label("open")));
        let mut queues: BTreeMap<&str, VecDeque<i64>> = BTreeMap::new();
        let (mut within, mut decided) = (0, 0);
        for e in ev {
            if e.has_label("open") {
                queues.entry(&e.trace_id).or_default().push_back(e.ts.millis());
            } else if let Some(o) = queues.entry(&e.trace_id).or_default().pop_front() {
                decided += 1;
                if e.ts.millis() - o <= limit_ms {
                    within += 1;
                }
            }
        }
        for q in queues.values() {
            decided += q.iter().filter(|o| horizon - **o >= limit_ms).count();
        }
        (within, decided)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn percentile_matches_sort_and_index(
            lat in prop::collection::vec(0u32..5000, 1..1000),
            p_tenths in 1u32..=1000,
        ) {
            let p = p_tenths as f64 / 10.0;
            let spec = parse_measure(&format!("latency_pct({p}) < 1000 ms")).unwrap();
            let events: Vec<_> = lat.iter().enumerate()
                .map(|(i, ms)| with_latency(ev(i as i64, "t", SpanKind::Fm), *ms as f64))
                .collect();
            let mut sorted: Vec<f64> = lat.iter().map(|v| *v as f64).collect();
            sorted.sort_by(f64::total_cmp);
            let v = evaluate(&spec, &events, &SCOPE);
            prop_assert_eq!(v.observed, Some(percentile_oracle(&sorted, p)));
            prop_assert_eq!(v.population, lat.len());
        }

        #[test]
        fn ratio_matches_counting_oracle(flags in prop::collection::vec(any::<bool>(), 0..200)) {
            let spec = parse_measure("ratio(ok) >= 0.5").unwrap();
            let events: Vec<_> = flags.iter().enumerate()
                .map(|(i, ok)| with_outcomes(ev(i as i64, "t", SpanKind::Fm), if *ok { &["ok"] } else { &[] }))
                .collect();
            let v = evaluate(&spec, &events, &SCOPE);
            if flags.is_empty() {
                prop_assert_eq!(v.outcome, Outcome::InsufficientData);
            } else {
                let hits = flags.iter().filter(|f| **f).count();
                prop_assert_eq!(v.observed, Some(hits as f64 / flags.len() as f64));
                prop_assert_eq!(v.outcome == Outcome::Pass, 2 * hits >= flags.len());
            }
        }

        #[test]
        fn ratio_is_monotone(
            flags in prop::collection::vec(any::<bool>(), 1..100),
            add_success in any::<bool>(),
        ) {
            let spec = parse_measure("ratio(ok) >= 0.5").unwrap();
            let mut events: Vec<_> = flags.iter().enumerate()
                .map(|(i, ok)| with_outcomes(ev(i as i64, "t", SpanKind::Fm), if *ok { &["ok"] } else { &[] }))
                .collect();
            let before = evaluate(&spec, &events, &SCOPE).observed.unwrap();
            let extra = ev(1000, "t", SpanKind::Fm);
            events.push(if add_success { with_outcomes(extra, &["ok"]) } else { extra });
            let after = evaluate(&spec, &events, &SCOPE).observed.unwrap();
            if add_success {
                prop_assert!(after >= before);
            } else {
                prop_assert!(after <= before);
            }
        }

        #[test]
        fn resolve_matches_event_driven_oracle(
            raw in prop::collection::vec((0i64..50, 0usize..3, any::<bool>()), 0..60),
            limit in 1i64..20,
        ) {
            let events: Vec<_> = raw.iter().map(|(ts, trace, is_open)| {
                let r = ev(*ts, &trace.to_string(), SpanKind::Task);
                with_outcomes(r, if *is_open { &["open"] } else { &["close"] })
            }).collect();
            let spec = parse_measure(&format!("resolve_within(open, close) <= {} s", limit)).unwrap();
            let scaled: Vec<_> = events.iter().cloned().map(|mut e| {
                e.ts = Timestamp::from_millis(e.ts.millis() * 1000);
                e
            }).collect();
            let v = evaluate(&spec, &scaled, &SCOPE);
            let horizon = raw.iter().map(|r| r.0).max().unwrap_or(0);
            let (within, decided) = resolve_oracle(&events, limit, horizon);
            prop_assert_eq!(v.population, decided);
            if decided > 0 {
                prop_assert_eq!(v.observed, Some(within as f64 / decided as f64));
            }
        }

        #[test]
        fn equal_timestamp_permutations_do_not_change_verdicts(
            raw in prop::collection::vec((0i64..5, 0usize..3, 0usize..4, 0u32..2000), 1..40),
            seed in any::<u64>(),
        ) {
            let kinds = [SpanKind::Goal, SpanKind::Fm, SpanKind::ContestOpened, SpanKind::ContestResolved];
            let events: Vec<_> = raw.iter().map(|(ts, trace, k, lat)| {
                let r = with_latency(ev(*ts * 1000, &trace.to_string(), kinds[*k]), *lat as f64);
                if lat % 2 == 0 { with_outcomes(r, &["ok"]) } else { r }
            }).collect();
            let mut shuffled = events.clone();
            shuffled.sort_by_key(|e| e.ts);
            // rotate within each equal-timestamp run
            let mut i = 0;
            while i < shuffled.len() {
                let j = i + shuffled[i..].iter().take_while(|e| e.ts == shuffled[i].ts).count();
                let len = j - i;
                shuffled[i..j].rotate_left((seed as usize) % len);
                i = j;
            }
            for text in [
                "ratio(ok) >= 0.5",
                "latency_pct(90) < 1 s",
                "max_latency() < 1500 ms",
                "completeness(goal, fm) >= 1",
                "resolve_within(contest-opened, contest-resolved) <= 2 s",
            ] {
                let spec = parse_measure(text).unwrap();
                prop_assert_eq!(evaluate(&spec, &events, &SCOPE), evaluate(&spec, &shuffled, &SCOPE));
            }
        }
    }
}
