use proptest::prelude::*;

use super::*;
use crate::corpus::{luna_workspace, CorpusBundle};
use crate::measures::parse_measure;
use crate::telemetry::Timestamp;

const DESIGN: [Step; 8] = [
    Step::UnderstandGoals,
    Step::ReviewGovernance,
    Step::IdentifyRequirements,
    Step::ReviewArchitecture,
    Step::DefineScenarios,
    Step::PrioritiseScenarios,
    Step::AnalyseArchitecture,
    Step::ImproveArchitecture,
];

#[test]
fn fresh_workspace_rejects_define_scenarios() {
    let err = Workspace::new("w")
        .advance(Step::DefineScenarios, Payload::default())
        .unwrap_err();
    assert_eq!(
        err,
        WorkspaceError::Prerequisite {
            step: Step::DefineScenarios,
            missing: Step::IdentifyRequirements
        }
    );
    assert_eq!(
        err.to_string(),
        "cannot complete define-scenarios: missing identify-requirements"
    );
}

#[test]
fn every_missing_prerequisite_is_rejected() {
    // For each step, complete the closure of its prerequisites except one
    // direct prerequisite, then try the step.
    fn closure(step: Step, out: &mut Vec<Step>) {
        for p in step.prerequisites() {
            closure(*p, out);
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    for step in Step::ALL.iter().copied() {
        for skip in step.prerequisites() {
            let mut before = Vec::new();
            closure(step, &mut before);
            let mut state = ProcessState::default();
            for s in before.iter().filter(|s| *s != skip) {
                let _ = state.complete(*s);
            }
            assert!(!state.contains(*skip));
            assert_eq!(
                state.complete(step),
                Err(WorkspaceError::Prerequisite {
                    step,
                    missing: state.missing_for(step).unwrap()
                })
            );
        }
    }
}

#[test]
fn luna_sequence_and_runtime_loop() {
    let b = CorpusBundle::load().unwrap();
    let steps = b.replay().unwrap();
    let ws = steps.last().unwrap().1.clone();
    assert_eq!(ws.state.completed(), &DESIGN);

    let monitored = ws.advance(Step::MonitorRisks, Payload::default()).unwrap();
    let trigger = Trigger {
        ts: Timestamp::from_millis(5),
        scenario: "s3".into(),
        measure: parse_measure("latency_pct(100) < 1 s").unwrap(),
        consecutive_failures: 3,
    };
    let re = monitored
        .advance(
            Step::Reprioritise,
            Payload {
                triggers: vec![trigger],
                ..Default::default()
            },
        )
        .unwrap();
    assert!(!re.state.contains(Step::AnalyseArchitecture));
    assert!(!re.state.contains(Step::ImproveArchitecture));
    assert!(re.state.contains(Step::MonitorRisks));
    assert_eq!(re.analysis.audit.len(), 1);
    assert_eq!(re.analysis.audit[0].old_band, Some(Band::Medium));
    assert_eq!(re.analysis.audit[0].new_band, Some(Band::Medium));

    // Monitoring resumes only after analysing and improving again.
    assert!(re.advance(Step::MonitorRisks, Payload::default()).is_err());
    let again = re
        .advance(Step::AnalyseArchitecture, Payload::default())
        .and_then(|w| w.advance(Step::ImproveArchitecture, Payload::default()))
        .and_then(|w| w.advance(Step::MonitorRisks, Payload::default()))
        .unwrap();
    assert!(again.state.contains(Step::MonitorRisks));
    // The original value is untouched.
    assert_eq!(ws.state.completed(), &DESIGN);
}

#[test]
fn reprioritise_raises_scored_scenarios() {
    let mut ws = luna_workspace().unwrap();
    for s in &mut ws.scenarios {
        s.priority = None;
    }
    ws.priorities = vec![crate::format::PriorityBlock {
        stakeholder: "team".into(),
        scores: ws
            .scenarios
            .iter()
            .map(|s| crate::format::PriorityScore {
                scenario: s.id.clone(),
                impact: 3,
                risk: 1,
                relevance: 5,
            })
            .collect(),
    }];
    let ws = ws.advance(Step::MonitorRisks, Payload::default()).unwrap();
    assert_eq!(ws.bands().unwrap()["s3"], Band::Medium);
    let trigger = Trigger {
        ts: Timestamp::from_millis(5),
        scenario: "s3".into(),
        measure: parse_measure("latency_pct(100) < 1 s").unwrap(),
        consecutive_failures: 3,
    };
    let re = ws
        .advance(
            Step::Reprioritise,
            Payload {
                triggers: vec![trigger],
                ..Default::default()
            },
        )
        .unwrap();
    assert_eq!(re.bands().unwrap()["s3"], Band::High);
    assert_eq!(re.analysis.audit[0].new_band, Some(Band::High));
    assert_eq!(re.bands().unwrap()["s1"], Band::Medium);
}

#[test]
fn payload_must_match_step() {
    let ws = Workspace::new("w");
    let p = Payload {
        goals: vec![GoalStatement {
            id: "g".into(),
            text: "t".into(),
            clarified: false,
        }],
        ..Default::default()
    };
    assert_eq!(
        ws.advance(Step::ReviewGovernance, p.clone()),
        Err(WorkspaceError::PayloadMismatch {
            step: Step::ReviewGovernance,
            field: "goals"
        })
    );
    let ws = ws.advance(Step::UnderstandGoals, p.clone()).unwrap();
    assert!(matches!(
        ws.advance(Step::UnderstandGoals, p),
        Err(WorkspaceError::DuplicateId { kind: "goal", .. })
    ));
    assert_eq!(
        ws.advance(Step::ReviewArchitecture, Payload::default()),
        Err(WorkspaceError::MissingPayload {
            step: Step::ReviewArchitecture,
            what: "an architecture model"
        })
    );
}

#[test]
fn requirement_refs_must_resolve() {
    let ws = Workspace::new("w")
        .advance(Step::UnderstandGoals, Payload::default())
        .and_then(|w| w.advance(Step::ReviewGovernance, Payload::default()))
        .unwrap();
    let p = Payload {
        requirements: vec![QualityRequirement {
            quality: QualityAttribute::Privacy,
            rationale: "r".into(),
            governance_refs: vec!["G9".into()],
            guardrail: true,
        }],
        ..Default::default()
    };
    assert_eq!(
        ws.advance(Step::IdentifyRequirements, p),
        Err(WorkspaceError::UnknownGovernanceRef {
            quality: QualityAttribute::Privacy,
            tag: "G9".into()
        })
    );
}

#[test]
fn coverage_check_examples() {
    let ws = luna_workspace().unwrap();
    assert!(coverage_check(&ws).is_empty());

    let mut extra = ws.clone();
    extra.requirements.push(QualityRequirement {
        quality: QualityAttribute::Fairness,
        rationale: "r".into(),
        governance_refs: vec![],
        guardrail: false,
    });
    let f = coverage_check(&extra);
    assert_eq!(f.len(), 1);
    assert_eq!(
        (f[0].code, f[0].subject.as_str()),
        ("requirement-without-scenario", "fairness")
    );

    let mut ungoverned = ws.clone();
    ungoverned.governance.clear();
    assert!(coverage_check(&ungoverned)
        .iter()
        .all(|f| f.code != "unmapped-governance"));

    let mut stray = ws.clone();
    stray.requirements.retain(|r| r.quality != QualityAttribute::Privacy);
    let codes: Vec<_> = coverage_check(&stray).into_iter().map(|f| f.code).collect();
    assert_eq!(codes, vec!["quality-outside-requirements"]);
}

#[test]
fn diff_examples() {
    let b = CorpusBundle::load().unwrap();
    assert!(diff_architectures(&b.pre, &b.pre).is_empty());
    let changes = diff_architectures(&b.pre, &b.post);
    let added: Vec<_> = changes
        .iter()
        .filter(|c| c.element == Element::Component && c.action == ChangeAction::Added)
        .map(|c| c.id.as_str())
        .collect();
    assert_eq!(
        added,
        [
            "memory",
            "reranker",
            "chunker",
            "agentops",
            "log-repository",
            "guardrails"
        ]
    );
    assert!(changes
        .iter()
        .any(|c| c.to_string() == "+ approach cross-component-guardrails"));
    assert!(changes.iter().any(|c| c.to_string() == "~ approach feedback-scores"));
    assert!(changes.iter().all(|c| c.action != ChangeAction::Removed));

    let mut renamed = b.pre.clone();
    renamed.components[8].id = "ruling-crawler".into();
    let d = diff_architectures(&b.pre, &renamed);
    assert_eq!(
        d.iter().map(ToString::to_string).collect::<Vec<_>>(),
        ["- component crawler", "+ component ruling-crawler"]
    );
}

#[test]
fn save_load_round_trip() {
    let ws = luna_workspace().unwrap();
    let dir = tempfile::tempdir().unwrap();
    ws.save(dir.path()).unwrap();
    let back = Workspace::load(dir.path()).unwrap();
    assert_eq!(back, ws);
    back.save_state(dir.path()).unwrap();
    assert_eq!(Workspace::load(dir.path()).unwrap(), ws);

    let looped = ws
        .advance(Step::MonitorRisks, Payload::default())
        .and_then(|w| w.advance(Step::Reprioritise, Payload::default()))
        .unwrap();
    looped.save_state(dir.path()).unwrap();
    assert_eq!(Workspace::load(dir.path()).unwrap(), looped);
}

#[test]
fn manifest_errors_name_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    crate::corpus::write_fixtures(dir.path()).unwrap();
    let path = Manifest::path(dir.path());
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("\"identify-requirements\",\n", "");
    std::fs::write(&path, text).unwrap();
    let err = Workspace::load(dir.path()).unwrap_err().to_string();
    assert!(
        err.contains("arceval.toml") && err.contains("missing identify-requirements"),
        "{err}"
    );
}

fn arb_steps() -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec(prop::sample::select(Step::ALL.to_vec()), 0..30)
}

proptest! {
    #[test]
    fn only_reprioritise_removes_steps(steps in arb_steps()) {
        let mut state = ProcessState::default();
        for s in steps {
            let before = state.clone();
            match state.complete(s) {
                Err(_) => prop_assert_eq!(&state, &before),
                Ok(()) => {
                    let removed: Vec<_> = before.completed().iter().filter(|x| !state.contains(**x)).copied().collect();
                    if s == Step::Reprioritise {
                        prop_assert!(removed.iter().all(|r| matches!(r, Step::AnalyseArchitecture | Step::ImproveArchitecture)));
                        prop_assert!(!state.contains(Step::AnalyseArchitecture) && !state.contains(Step::ImproveArchitecture));
                    } else {
                        prop_assert!(removed.is_empty());
                    }
                    prop_assert!(state.contains(s));
                }
            }
        }
    }

    #[test]
    fn adding_a_scenario_never_adds_requirement_findings(q in prop::sample::select(QualityAttribute::ALL.to_vec())) {
        let ws = luna_workspace().unwrap();
        let count = |w: &Workspace| coverage_check(w).iter().filter(|f| f.code == "requirement-without-scenario").count();
        let mut more = ws.clone();
        let mut s = more.scenarios[0].clone();
        s.id = "extra".into();
        s.quality = q;
        more.scenarios.push(s);
        prop_assert!(count(&more) <= count(&ws));
    }
}
