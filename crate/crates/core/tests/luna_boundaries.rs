//! Unit-level boundary behaviour of the Luna measures, as written.

use arceval::corpus::CorpusBundle;
use arceval::measures::{evaluate, Outcome, Scope};
use arceval::telemetry::{SpanKind, SpanRecord, Timestamp};

fn event(ts: i64, trace: &str, kind: SpanKind) -> SpanRecord {
    let mut r = SpanRecord::new(Timestamp::from_millis(ts), trace, kind);
    r.scenario_tags = vec!["s3".into(), "s6".into()];
    r
}

#[test]
fn latency_under_one_second_is_strict() {
    let b = CorpusBundle::load().unwrap();
    let s3 = b.scenario("s3").unwrap();
    let spec = &s3.measures[0];
    for (ms, want) in [(999.0, Outcome::Pass), (1000.0, Outcome::Fail), (1001.0, Outcome::Fail)] {
        let mut r = event(0, "t", SpanKind::Fm);
        r.latency_ms = Some(ms);
        assert_eq!(evaluate(spec, &[r], &Scope::of(s3)).outcome, want, "{ms} ms");
    }
}

#[test]
fn contest_resolution_at_exactly_48_hours_passes() {
    let b = CorpusBundle::load().unwrap();
    let s6 = b.scenario("s6").unwrap();
    let spec = &s6.measures[0];
    let h48 = 48 * 3_600_000;
    for (delay, want) in [(h48 - 1, Outcome::Pass), (h48, Outcome::Pass), (h48 + 1, Outcome::Fail)] {
        let events = [
            event(0, "t", SpanKind::ContestOpened),
            event(delay, "t", SpanKind::ContestResolved),
        ];
        assert_eq!(evaluate(spec, &events, &Scope::of(s6)).outcome, want, "{delay} ms");
    }
}

#[test]
fn open_contest_is_undecided_until_the_deadline_passes() {
    let b = CorpusBundle::load().unwrap();
    let s6 = b.scenario("s6").unwrap();
    let spec = &s6.measures[0];
    let h48 = 48 * 3_600_000;
    let open = event(0, "a", SpanKind::ContestOpened);
    let early = [open.clone(), event(h48 - 1, "b", SpanKind::Fm)];
    assert_eq!(
        evaluate(spec, &early, &Scope::of(s6)).outcome,
        Outcome::InsufficientData
    );
    let late = [open, event(h48, "b", SpanKind::Fm)];
    assert_eq!(evaluate(spec, &late, &Scope::of(s6)).outcome, Outcome::Fail);
}
