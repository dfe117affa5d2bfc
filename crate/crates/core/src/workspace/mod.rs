//! An evaluation session and the ordering of its process steps.
//!
//! | step                  | requires                                     |
//! |-----------------------|----------------------------------------------|
//! | understand-goals      |                                              |
//! | review-governance     |                                              |
//! | identify-requirements | understand-goals, review-governance          |
//! | review-architecture   |                                              |
//! | define-scenarios      | identify-requirements                        |
//! | prioritise-scenarios  | define-scenarios                             |
//! | analyse-architecture  | prioritise-scenarios, review-architecture    |
//! | improve-architecture  | analyse-architecture                         |
//! | monitor-risks         | improve-architecture                         |
//! | reprioritise          | monitor-risks                                |
//!
//! Completing `reprioritise` re-opens `analyse-architecture` and
//! `improve-architecture`, so monitoring resumes only after the
//! architecture has been analysed and improved again.

mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{gap_analysis, AnalysisError, AnalysisLedger, LedgerContext};
use crate::catalogue::{GovernanceTag, QualityAttribute};
use crate::finding::Finding;
use crate::format::{ArchitectureModel, ContextScenario, PriorityBlock};
use crate::monitor::{feed_reprioritiser, AuditEntry, Trigger};
use crate::prioritiser::{
    prioritise_scenarios, reprioritise, Band, Cutoffs, PriorityError, PriorityInput, Ranking, ScenarioViolation,
    Weights,
};

pub use manifest::{Manifest, MANIFEST_FILE};

label_enum! {
    pub enum Step ("process step") {
        UnderstandGoals => "understand-goals",
        ReviewGovernance => "review-governance",
        IdentifyRequirements => "identify-requirements",
        ReviewArchitecture => "review-architecture",
        DefineScenarios => "define-scenarios",
        PrioritiseScenarios => "prioritise-scenarios",
        AnalyseArchitecture => "analyse-architecture",
        ImproveArchitecture => "improve-architecture",
        MonitorRisks => "monitor-risks",
        Reprioritise => "reprioritise",
    }
}

impl Step {
    pub fn prerequisites(self) -> &'static [Step] {
        use Step::*;
        match self {
            UnderstandGoals | ReviewGovernance | ReviewArchitecture => &[],
            IdentifyRequirements => &[UnderstandGoals, ReviewGovernance],
            DefineScenarios => &[IdentifyRequirements],
            PrioritiseScenarios => &[DefineScenarios],
            AnalyseArchitecture => &[PrioritiseScenarios, ReviewArchitecture],
            ImproveArchitecture => &[AnalyseArchitecture],
            MonitorRisks => &[ImproveArchitecture],
            Reprioritise => &[MonitorRisks],
        }
    }

    pub fn is_runtime(self) -> bool {
        matches!(self, Step::MonitorRisks | Step::Reprioritise)
    }
}

/// Completed steps in completion order, without repeats, plus the log of
/// every completion. Replaying the log rebuilds the state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProcessState {
    completed: Vec<Step>,
    history: Vec<Step>,
}

impl ProcessState {
    pub fn completed(&self) -> &[Step] {
        &self.completed
    }

    pub fn history(&self) -> &[Step] {
        &self.history
    }

    pub fn contains(&self, step: Step) -> bool {
        self.completed.contains(&step)
    }

    /// First prerequisite of `step` not yet completed.
    pub fn missing_for(&self, step: Step) -> Option<Step> {
        step.prerequisites().iter().copied().find(|p| !self.contains(*p))
    }

    /// Records `step`, applying the re-opening rule.
    pub fn complete(&mut self, step: Step) -> Result<(), WorkspaceError> {
        if let Some(missing) = self.missing_for(step) {
            return Err(WorkspaceError::Prerequisite { step, missing });
        }
        self.history.push(step);
        if !self.contains(step) {
            self.completed.push(step);
        }
        if step == Step::Reprioritise {
            self.completed
                .retain(|s| !matches!(s, Step::AnalyseArchitecture | Step::ImproveArchitecture));
        }
        Ok(())
    }

    /// Replays a completion log from an empty state.
    pub fn replay(steps: &[Step]) -> Result<Self, WorkspaceError> {
        let mut state = ProcessState::default();
        for s in steps {
            state.complete(*s)?;
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalStatement {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub clarified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityRequirement {
    pub quality: QualityAttribute,
    pub rationale: String,
    #[serde(default)]
    pub governance_refs: Vec<String>,
    #[serde(default)]
    pub guardrail: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkspaceError {
    #[error("cannot complete {step}: missing {missing}")]
    Prerequisite { step: Step, missing: Step },
    #[error("{step} does not accept {field}")]
    PayloadMismatch { step: Step, field: &'static str },
    #[error("{step} needs {what}")]
    MissingPayload { step: Step, what: &'static str },
    #[error("duplicate {kind} {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("requirement {quality} references unknown governance tag {tag}")]
    UnknownGovernanceRef { quality: QualityAttribute, tag: String },
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("unknown architecture revision {0}")]
    UnknownRevision(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Priority(#[from] PriorityError),
}

/// Material supplied with a step. Each field is accepted only by the
/// steps listed in [`Payload::fields`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Payload {
    pub goals: Vec<GoalStatement>,
    pub governance: Vec<GovernanceTag>,
    pub requirements: Vec<QualityRequirement>,
    pub architecture: Option<ArchitectureModel>,
    pub scenarios: Vec<ContextScenario>,
    pub priorities: Vec<PriorityBlock>,
    pub weights: Option<Weights>,
    /// Risks, tradeoffs, sensitivity points and recommendations to add.
    pub ledger: AnalysisLedger,
    pub triggers: Vec<Trigger>,
}

impl Payload {
    /// Non-empty fields with the steps allowed to carry them.
    fn fields(&self) -> Vec<(&'static str, &'static [Step])> {
        use Step::*;
        let analysis: &'static [Step] = &[AnalyseArchitecture, ImproveArchitecture];
        let l = &self.ledger;
        [
            (!self.goals.is_empty(), "goals", &[UnderstandGoals][..]),
            (!self.governance.is_empty(), "governance", &[ReviewGovernance]),
            (!self.requirements.is_empty(), "requirements", &[IdentifyRequirements]),
            (
                self.architecture.is_some(),
                "architecture",
                &[ReviewArchitecture, ImproveArchitecture],
            ),
            (!self.scenarios.is_empty(), "scenarios", &[DefineScenarios]),
            (!self.priorities.is_empty(), "priorities", &[PrioritiseScenarios]),
            (self.weights.is_some(), "weights", &[PrioritiseScenarios]),
            (!l.risks.is_empty(), "risks", analysis),
            (!l.tradeoffs.is_empty(), "tradeoffs", analysis),
            (!l.sensitivities.is_empty(), "sensitivities", analysis),
            (!l.recommendations.is_empty(), "recommendations", analysis),
            (!l.audit.is_empty(), "audit", &[]),
            (!self.triggers.is_empty(), "triggers", &[Reprioritise]),
        ]
        .into_iter()
        .filter(|(present, _, _)| *present)
        .map(|(_, name, steps)| (name, steps))
        .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Workspace {
    pub name: String,
    pub goals: Vec<GoalStatement>,
    pub governance: Vec<GovernanceTag>,
    pub requirements: Vec<QualityRequirement>,
    /// Revisions in the order they were added.
    pub architectures: Vec<ArchitectureModel>,
    /// Index into `architectures`.
    pub current: Option<usize>,
    pub scenarios: Vec<ContextScenario>,
    pub priorities: Vec<PriorityBlock>,
    pub weights: Weights,
    pub analysis: AnalysisLedger,
    pub state: ProcessState,
}

impl Workspace {
    pub fn new(name: impl Into<String>) -> Self {
        Workspace {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn current_architecture(&self) -> Option<&ArchitectureModel> {
        self.current.map(|i| &self.architectures[i])
    }

    pub fn architecture(&self, label: &str) -> Option<&ArchitectureModel> {
        self.architectures.iter().find(|a| a.label() == label)
    }

    pub fn scenario(&self, id: &str) -> Option<&ContextScenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn set_current(&mut self, label: &str) -> Result<(), WorkspaceError> {
        let i = self
            .architectures
            .iter()
            .position(|a| a.label() == label)
            .ok_or_else(|| WorkspaceError::UnknownRevision(label.to_string()))?;
        self.current = Some(i);
        Ok(())
    }

    pub fn priority_inputs(&self) -> Vec<PriorityInput> {
        self.priorities.iter().flat_map(|p| p.inputs()).collect()
    }

    /// Ranking of the scenarios that have stakeholder scores, with manual
    /// bands and recorded reprioritisations applied. `None` when no
    /// scenario is scored.
    pub fn ranking(&self) -> Result<Option<Ranking>, PriorityError> {
        let inputs = self.priority_inputs();
        let scored: BTreeSet<&str> = inputs.iter().map(|i| i.scenario.as_str()).collect();
        if scored.is_empty() {
            return Ok(None);
        }
        if let Some(unknown) = scored.iter().find(|id| self.scenario(id).is_none()) {
            return Err(PriorityError::UnknownScenario(unknown.to_string()));
        }
        let ids: Vec<String> = self
            .scenarios
            .iter()
            .filter(|s| scored.contains(s.id.as_str()))
            .map(|s| s.id.clone())
            .collect();
        let manual: BTreeMap<String, Band> = self
            .scenarios
            .iter()
            .filter_map(|s| Some((s.id.clone(), s.priority?)))
            .filter(|(id, _)| scored.contains(id.as_str()))
            .collect();
        let ranking = prioritise_scenarios(&ids, &inputs, &self.weights, &Cutoffs::default(), &manual)?;
        let violations: Vec<ScenarioViolation> = self
            .analysis
            .audit
            .iter()
            .filter(|a| scored.contains(a.scenario.as_str()))
            .map(|a| ScenarioViolation {
                scenario: a.scenario.clone(),
                persistent: true,
            })
            .collect();
        if violations.is_empty() {
            Ok(Some(ranking))
        } else {
            reprioritise(&ranking, &violations).map(Some)
        }
    }

    /// Effective band per scenario: the ranking's band for scored scenarios,
    /// otherwise the manual band, if any.
    pub fn bands(&self) -> Result<BTreeMap<String, Band>, PriorityError> {
        let ranking = self.ranking()?;
        Ok(self
            .scenarios
            .iter()
            .filter_map(|s| {
                let band = ranking.as_ref().and_then(|r| r.band_of(&s.id)).or(s.priority)?;
                Some((s.id.clone(), band))
            })
            .collect())
    }

    /// Returns a new workspace with `payload` merged and `step` completed.
    /// `self` is left untouched.
    pub fn advance(&self, step: Step, payload: Payload) -> Result<Workspace, WorkspaceError> {
        if let Some(missing) = self.state.missing_for(step) {
            return Err(WorkspaceError::Prerequisite { step, missing });
        }
        for (field, steps) in payload.fields() {
            if !steps.contains(&step) {
                return Err(WorkspaceError::PayloadMismatch { step, field });
            }
        }
        let mut next = self.clone();
        let Payload {
            goals,
            governance,
            requirements,
            architecture,
            scenarios,
            priorities,
            weights,
            ledger,
            triggers,
        } = payload;

        merge_unique(&mut next.goals, goals, "goal", |g| g.id.clone())?;
        merge_unique(&mut next.governance, governance, "governance tag", |g| g.id.clone())?;
        merge_unique(&mut next.requirements, requirements, "requirement", |r| {
            r.quality.to_string()
        })?;
        merge_unique(&mut next.scenarios, scenarios, "scenario", |s| s.id.clone())?;
        merge_unique(&mut next.priorities, priorities, "priorities stakeholder", |p| {
            p.stakeholder.clone()
        })?;
        if let Some(arch) = architecture {
            merge_unique(&mut next.architectures, vec![arch], "architecture revision", |a| {
                a.label()
            })?;
            next.current = Some(next.architectures.len() - 1);
        }
        if let Some(w) = weights {
            next.weights = w;
        }
        let AnalysisLedger {
            risks,
            tradeoffs,
            sensitivities,
            recommendations,
            audit: _,
        } = ledger;
        next.analysis.risks.extend(risks);
        next.analysis.tradeoffs.extend(tradeoffs);
        next.analysis.sensitivities.extend(sensitivities);
        next.analysis.recommendations.extend(recommendations);

        match step {
            Step::ReviewArchitecture if next.current.is_none() => {
                return Err(WorkspaceError::MissingPayload {
                    step,
                    what: "an architecture model",
                });
            }
            Step::PrioritiseScenarios => {
                next.bands()?;
            }
            Step::AnalyseArchitecture => {
                let arch = next.current_architecture().expect("review-architecture sets one");
                let gaps = gap_analysis(&next.scenarios, arch)?;
                let bands = next.bands()?;
                next.analysis.record_gaps(&gaps, |id| bands.get(id).copied());
            }
            Step::Reprioritise => {
                let audit = next.audit_triggers(&triggers)?;
                next.analysis.audit.extend(audit);
            }
            _ => {}
        }
        next.check_references()?;
        next.analysis.refresh_mitigation(&next.scenarios, &next.architectures);
        next.state.complete(step)?;
        Ok(next)
    }

    /// Audit entries for applying `triggers` to the current priorities.
    /// Scored scenarios go through the prioritiser; others keep their
    /// manual band and carry no score.
    pub fn audit_triggers(&self, triggers: &[Trigger]) -> Result<Vec<AuditEntry>, WorkspaceError> {
        if let Some(t) = triggers.iter().find(|t| self.scenario(&t.scenario).is_none()) {
            return Err(WorkspaceError::UnknownScenario(t.scenario.clone()));
        }
        let ranking = self.ranking()?;
        let ranked = |id: &str| ranking.as_ref().is_some_and(|r| r.get(id).is_some());
        let (scored, unscored): (Vec<Trigger>, Vec<Trigger>) =
            triggers.iter().cloned().partition(|t| ranked(&t.scenario));
        let mut entries = match &ranking {
            Some(r) if !scored.is_empty() => feed_reprioritiser(&scored, r)?.1,
            _ => Vec::new(),
        };
        for t in &unscored {
            let band = self.scenario(&t.scenario).and_then(|s| s.priority);
            let measure = t.measure.to_string();
            match entries.iter_mut().find(|e| e.scenario == t.scenario) {
                Some(e) => {
                    e.trigger_ts = e.trigger_ts.min(t.ts);
                    if !e.measures.contains(&measure) {
                        e.measures.push(measure);
                    }
                }
                None => entries.push(AuditEntry {
                    scenario: t.scenario.clone(),
                    measures: vec![measure],
                    trigger_ts: t.ts,
                    old_band: band,
                    new_band: band,
                    old_score: None,
                    new_score: None,
                }),
            }
        }
        let first_seen = |id: &str| triggers.iter().position(|t| t.scenario == id);
        entries.sort_by_key(|e| first_seen(&e.scenario));
        Ok(entries)
    }

    /// Cross-references that must hold in every workspace value.
    pub fn check_references(&self) -> Result<(), WorkspaceError> {
        for r in &self.requirements {
            if let Some(tag) = r
                .governance_refs
                .iter()
                .find(|t| !self.governance.iter().any(|g| &g.id == *t))
            {
                return Err(WorkspaceError::UnknownGovernanceRef {
                    quality: r.quality,
                    tag: tag.clone(),
                });
            }
        }
        if let Some(i) = self
            .priority_inputs()
            .iter()
            .find(|i| self.scenario(&i.scenario).is_none())
        {
            return Err(WorkspaceError::UnknownScenario(i.scenario.clone()));
        }
        self.analysis.validate(&LedgerContext {
            scenarios: &self.scenarios,
            architectures: &self.architectures,
        })?;
        Ok(())
    }
}

fn merge_unique<T>(
    into: &mut Vec<T>,
    items: Vec<T>,
    kind: &'static str,
    key: impl Fn(&T) -> String,
) -> Result<(), WorkspaceError> {
    for item in items {
        let k = key(&item);
        if into.iter().any(|x| key(x) == k) {
            return Err(WorkspaceError::DuplicateId { kind, id: k });
        }
        into.push(item);
    }
    Ok(())
}

/// Traceability findings between governance tags, requirements and
/// scenarios. Meaningful once requirements have been identified.
///
/// * `unmapped-governance`: no requirement cites the tag or has one of its
///   default qualities;
/// * `requirement-without-scenario`: no scenario has the quality;
/// * `quality-outside-requirements`: the scenario's quality has no
///   requirement.
pub fn coverage_check(ws: &Workspace) -> Vec<Finding> {
    let required: BTreeSet<QualityAttribute> = ws.requirements.iter().map(|r| r.quality).collect();
    let mut findings = Vec::new();
    for tag in &ws.governance {
        let mapped = ws
            .requirements
            .iter()
            .any(|r| r.governance_refs.contains(&tag.id) || tag.default_qualities.contains(&r.quality));
        if !mapped {
            findings.push(Finding::warning(
                "unmapped-governance",
                &tag.id,
                "no requirement addresses this governance tag",
            ));
        }
    }
    for r in &ws.requirements {
        if !ws.scenarios.iter().any(|s| s.quality == r.quality) {
            findings.push(Finding::warning(
                "requirement-without-scenario",
                r.quality.as_str(),
                "no context scenario exercises this requirement",
            ));
        }
    }
    for s in &ws.scenarios {
        if !required.contains(&s.quality) {
            findings.push(Finding::warning(
                "quality-outside-requirements",
                &s.id,
                format!("{} is not a required quality", s.quality),
            ));
        }
    }
    findings
}

label_enum! {
    pub enum ChangeAction ("change") {
        Added => "added",
        Removed => "removed",
        Modified => "modified",
    }
}

label_enum! {
    pub enum Element ("element") {
        Component => "component",
        Approach => "approach",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ArchChange {
    pub element: Element,
    pub action: ChangeAction,
    pub id: String,
}

impl fmt::Display for ArchChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.action {
            ChangeAction::Added => '+',
            ChangeAction::Removed => '-',
            ChangeAction::Modified => '~',
        };
        write!(f, "{sign} {} {}", self.element, self.id)
    }
}

/// Components, then approaches; within each, removals in `before` order,
/// then additions and modifications in `after` order.
pub fn diff_architectures(before: &ArchitectureModel, after: &ArchitectureModel) -> Vec<ArchChange> {
    fn diff<T: PartialEq>(
        element: Element,
        before: &[T],
        after: &[T],
        id: impl Fn(&T) -> &str,
        out: &mut Vec<ArchChange>,
    ) {
        let find = |set: &[T], key: &str| set.iter().position(|x| id(x) == key);
        let change = |action, key: &str| ArchChange {
            element,
            action,
            id: key.to_string(),
        };
        for b in before {
            if find(after, id(b)).is_none() {
                out.push(change(ChangeAction::Removed, id(b)));
            }
        }
        for a in after {
            match find(before, id(a)) {
                None => out.push(change(ChangeAction::Added, id(a))),
                Some(i) if before[i] != *a => out.push(change(ChangeAction::Modified, id(a))),
                Some(_) => {}
            }
        }
    }
    let mut out = Vec::new();
    diff(
        Element::Component,
        &before.components,
        &after.components,
        |c| &c.id,
        &mut out,
    );
    diff(
        Element::Approach,
        &before.approaches,
        &after.approaches,
        |a| &a.id,
        &mut out,
    );
    out
}

#[cfg(test)]
mod tests;
