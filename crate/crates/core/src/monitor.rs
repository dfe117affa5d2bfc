//! Replays telemetry through sliding windows and tracks failure streaks.
//!
//! Every machine-evaluable measure of every scenario is evaluated in every
//! window. Failing windows raise alerts; a streak of `persistence` failing
//! windows marks the measure persistent and emits one reprioritisation
//! trigger. Windows with insufficient data neither extend nor break a streak.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::format::ContextScenario;
use crate::measures::{evaluate_with, EvalOptions, MeasureSpec, MeasureVerdict, Outcome, Scope};
use crate::prioritiser::{reprioritise, Band, PriorityError, Ranking, ScenarioViolation, Score};
use crate::telemetry::{windows, SpanRecord, Timestamp, WindowError, WindowSpec, Windowed};

/// Default number of consecutive failing windows that makes a violation
/// persistent.
pub const DEFAULT_PERSISTENCE: u32 = 3;

label_enum! {
    pub enum AlertSeverity ("alert severity") {
        /// A measure passed again after failing.
        Notice => "notice",
        Violation => "violation",
        PersistentViolation => "persistent-violation",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorConfig {
    pub window: WindowSpec,
    pub persistence: u32,
    pub options: EvalOptions,
}

impl MonitorConfig {
    pub fn new(window: WindowSpec, persistence: u32) -> Self {
        MonitorConfig {
            window,
            persistence: persistence.max(1),
            options: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alert {
    /// End of the window that produced the verdict.
    pub ts: Timestamp,
    pub scenario: String,
    pub measure_index: usize,
    pub window: usize,
    pub verdict: MeasureVerdict,
    pub severity: AlertSeverity,
}

#[derive(Serialize)]
struct AlertLine<'a> {
    ts: Timestamp,
    scenario: &'a str,
    measure: String,
    observed: Option<f64>,
    severity: AlertSeverity,
}

impl Alert {
    /// `{ts, scenario, measure, observed, severity}` as one JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&AlertLine {
            ts: self.ts,
            scenario: &self.scenario,
            measure: self.verdict.spec.to_string(),
            observed: self.verdict.observed,
            severity: self.severity,
        })
        .expect("alerts serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationSummary {
    pub scenario: String,
    pub measure_index: usize,
    pub spec: MeasureSpec,
    pub windows_evaluated: usize,
    pub windows_failed: usize,
    pub windows_insufficient: usize,
    /// Longest failure streak in the run.
    pub consecutive_failures: u32,
    pub first_fail_ts: Option<Timestamp>,
    pub last_fail_ts: Option<Timestamp>,
    pub persistent: bool,
}

/// Request to revisit a scenario's priority after a persistent violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub ts: Timestamp,
    pub scenario: String,
    pub measure: MeasureSpec,
    pub consecutive_failures: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MonitorRun {
    pub windows: usize,
    pub alerts: Vec<Alert>,
    pub summaries: Vec<ViolationSummary>,
    pub triggers: Vec<Trigger>,
}

impl MonitorRun {
    /// 0 without violations, 3 with violations, 4 with persistent ones.
    pub fn exit_code(&self) -> i32 {
        if self.summaries.iter().any(|s| s.persistent) {
            4
        } else if self.summaries.iter().any(|s| s.windows_failed > 0) {
            3
        } else {
            0
        }
    }

    pub fn alerts_jsonl(&self) -> String {
        let mut out = String::new();
        for a in &self.alerts {
            out.push_str(&a.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn violations(&self) -> Vec<ScenarioViolation> {
        let mut by_scenario: BTreeMap<&str, bool> = BTreeMap::new();
        for s in self.summaries.iter().filter(|s| s.windows_failed > 0) {
            *by_scenario.entry(&s.scenario).or_default() |= s.persistent;
        }
        by_scenario
            .into_iter()
            .map(|(scenario, persistent)| ScenarioViolation {
                scenario: scenario.to_string(),
                persistent,
            })
            .collect()
    }
}

struct MeasureTrack {
    alerts: Vec<(usize, usize, Alert)>,
    summary: ViolationSummary,
    trigger: Option<(usize, Trigger)>,
}

/// Evaluates every machine measure of `scenarios` over windows of `records`.
/// A measure with its own `over window(...)` uses that window instead of the
/// configured one. Scenarios are evaluated on separate threads; output
/// order depends only on the input.
pub fn run_monitor(
    scenarios: &[ContextScenario],
    records: &[SpanRecord],
    config: &MonitorConfig,
) -> Result<MonitorRun, WindowError> {
    let persistence = config.persistence.max(1);
    let mut cuts: BTreeMap<WindowSpec, Windowed> = BTreeMap::new();
    cuts.insert(config.window, windows(records, &config.window)?);
    for s in scenarios {
        for m in &s.measures {
            if let Some(w) = m.window {
                if let std::collections::btree_map::Entry::Vacant(e) = cuts.entry(w) {
                    e.insert(windows(records, &w)?);
                }
            }
        }
    }
    let cuts = &cuts;

    let per_scenario: Vec<Vec<MeasureTrack>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| {
                scope.spawn(move || {
                    s.measures
                        .iter()
                        .enumerate()
                        .filter(|(_, m)| m.is_machine())
                        .map(|(mi, m)| {
                            let cut = &cuts[&m.window.unwrap_or(config.window)];
                            track(s, mi, m, cut, persistence, &config.options)
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario evaluator panicked"))
            .collect()
    });

    let mut run = MonitorRun {
        windows: cuts[&config.window].len(),
        ..Default::default()
    };
    let mut alerts = Vec::new();
    let mut triggers = Vec::new();
    for (si, tracks) in per_scenario.into_iter().enumerate() {
        for t in tracks {
            alerts.extend(t.alerts.into_iter().map(|(mi, wi, a)| ((a.ts, si, mi, wi), a)));
            if let Some((mi, trig)) = t.trigger {
                triggers.push(((trig.ts, si, mi), trig));
            }
            run.summaries.push(t.summary);
        }
    }
    alerts.sort_by_key(|a| a.0);
    triggers.sort_by_key(|t| t.0);
    run.alerts = alerts.into_iter().map(|(_, a)| a).collect();
    run.triggers = triggers.into_iter().map(|(_, t)| t).collect();
    Ok(run)
}

fn track(
    scenario: &ContextScenario,
    mi: usize,
    spec: &MeasureSpec,
    cut: &Windowed,
    persistence: u32,
    options: &EvalOptions,
) -> MeasureTrack {
    let scope = Scope::of(scenario);
    let mut summary = ViolationSummary {
        scenario: scenario.id.clone(),
        measure_index: mi,
        spec: spec.clone(),
        windows_evaluated: 0,
        windows_failed: 0,
        windows_insufficient: 0,
        consecutive_failures: 0,
        first_fail_ts: None,
        last_fail_ts: None,
        persistent: false,
    };
    let mut alerts = Vec::new();
    let mut trigger = None;
    let mut streak = 0u32;
    for w in cut.iter() {
        let verdict = evaluate_with(spec, w.records, &scope, options, Some(w.end));
        summary.windows_evaluated += 1;
        let severity = match verdict.outcome {
            Outcome::InsufficientData => {
                summary.windows_insufficient += 1;
                None
            }
            Outcome::Pass => {
                let recovered = streak > 0;
                streak = 0;
                recovered.then_some(AlertSeverity::Notice)
            }
            Outcome::Fail => {
                streak += 1;
                summary.windows_failed += 1;
                summary.first_fail_ts.get_or_insert(w.end);
                summary.last_fail_ts = Some(w.end);
                summary.consecutive_failures = summary.consecutive_failures.max(streak);
                if streak >= persistence {
                    if trigger.is_none() {
                        trigger = Some((
                            mi,
                            Trigger {
                                ts: w.end,
                                scenario: scenario.id.clone(),
                                measure: spec.clone(),
                                consecutive_failures: streak,
                            },
                        ));
                    }
                    Some(AlertSeverity::PersistentViolation)
                } else {
                    Some(AlertSeverity::Violation)
                }
            }
        };
        if let Some(severity) = severity {
            alerts.push((
                mi,
                w.index,
                Alert {
                    ts: w.end,
                    scenario: scenario.id.clone(),
                    measure_index: mi,
                    window: w.index,
                    verdict,
                    severity,
                },
            ));
        }
    }
    summary.persistent = summary.consecutive_failures >= persistence;
    MeasureTrack {
        alerts,
        summary,
        trigger,
    }
}

/// One reprioritisation applied because of runtime evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub scenario: String,
    /// Measures whose persistent violations triggered the change.
    pub measures: Vec<String>,
    pub trigger_ts: Timestamp,
    /// `None` when the scenario had neither scores nor a manual band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_band: Option<Band>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_band: Option<Band>,
    /// `None` when the scenario has no stakeholder scores.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::prioritiser::ratio_text::option"
    )]
    pub old_score: Option<Score>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::prioritiser::ratio_text::option"
    )]
    pub new_score: Option<Score>,
}

/// Applies triggers to `ranking`: every triggered scenario counts as one
/// persistent violation, however many triggers name it.
pub fn feed_reprioritiser(
    triggers: &[Trigger],
    ranking: &Ranking,
) -> Result<(Ranking, Vec<AuditEntry>), PriorityError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, (Timestamp, Vec<String>)> = BTreeMap::new();
    for t in triggers {
        if ranking.get(&t.scenario).is_none() {
            return Err(PriorityError::UnknownScenario(t.scenario.clone()));
        }
        let entry = grouped.entry(&t.scenario).or_insert_with(|| {
            order.push(&t.scenario);
            (t.ts, Vec::new())
        });
        entry.0 = entry.0.min(t.ts);
        let text = t.measure.to_string();
        if !entry.1.contains(&text) {
            entry.1.push(text);
        }
    }
    let violations: Vec<_> = order
        .iter()
        .map(|s| ScenarioViolation {
            scenario: s.to_string(),
            persistent: true,
        })
        .collect();
    let next = reprioritise(ranking, &violations)?;
    let audit = order
        .iter()
        .map(|s| {
            let old = ranking.get(s).expect("checked above");
            let new = next.get(s).expect("reprioritise keeps scenarios");
            let (ts, measures) = grouped[s].clone();
            AuditEntry {
                scenario: s.to_string(),
                measures,
                trigger_ts: ts,
                old_band: Some(old.band),
                new_band: Some(new.band),
                old_score: Some(old.score),
                new_score: Some(new.score),
            }
        })
        .collect();
    Ok((next, audit))
}
