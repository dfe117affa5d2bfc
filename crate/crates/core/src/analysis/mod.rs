//! Gap analysis of scenarios against an architecture model, the analysis
//! ledger (risks, tradeoffs, sensitivity points, recommendations, audit)
//! and the report renderer.
//!
//! Coverage of a scenario by a model:
//!
//! * `none` when no approach supports the scenario or its quality;
//! * `full` when every scenario artefact the model realises is touched by a
//!   component of a supporting approach that claims full coverage, and the
//!   model realises at least one of them;
//! * `partial` otherwise.
//!
//! Approaches claiming partial coverage count as support but touch nothing,
//! so adding an approach never lowers coverage.

mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{ArtefactRef, QualityAttribute};
use crate::format::{ArchitectureModel, ContextScenario, CoverageClaim, SupportTarget};
use crate::monitor::AuditEntry;
use crate::prioritiser::Band;

pub use report::{coverage_sidecar, parse_report, render_report, ReportSection};

label_enum! {
    pub enum Coverage ("coverage") {
        None => "none",
        Partial => "partial",
        Full => "full",
    }
}

label_enum! {
    pub enum RiskStatus ("risk status") {
        Open => "open",
        Mitigated => "mitigated",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Risk {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub approaches: Vec<String>,
    pub status: RiskStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub id: String,
    pub text: String,
    pub qualities: Vec<QualityAttribute>,
    pub approach: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub id: String,
    pub text: String,
    pub approach: String,
    pub quality: QualityAttribute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub text: String,
    pub addresses: Vec<String>,
    /// Architecture revision label, see [`ArchitectureModel::label`].
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisLedger {
    #[serde(default)]
    pub risks: Vec<Risk>,
    #[serde(default)]
    pub tradeoffs: Vec<Tradeoff>,
    #[serde(default)]
    pub sensitivities: Vec<SensitivityPoint>,
    #[serde(default)]
    pub recommendations: Vec<Recommendation>,
    #[serde(default)]
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("approach {approach} supports unknown scenario {scenario}")]
    UnknownScenario { approach: String, scenario: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{kind} {id} cites no scenario or approach")]
    Uncited { kind: &'static str, id: String },
    #[error("{kind} {id} references unknown {target} {reference}")]
    UnknownReference {
        kind: &'static str,
        id: String,
        target: &'static str,
        reference: String,
    },
    #[error("tradeoff {0} needs at least two distinct qualities")]
    TooFewQualities(String),
}

/// Ids a ledger may refer to.
pub struct LedgerContext<'a> {
    pub scenarios: &'a [ContextScenario],
    pub architectures: &'a [ArchitectureModel],
}

impl LedgerContext<'_> {
    fn has_scenario(&self, id: &str) -> bool {
        self.scenarios.iter().any(|s| s.id == id)
    }

    fn has_approach(&self, id: &str) -> bool {
        self.architectures.iter().any(|a| a.approach(id).is_some())
    }

    fn has_revision(&self, label: &str) -> bool {
        self.architectures.iter().any(|a| a.label() == label)
    }
}

impl AnalysisLedger {
    pub fn risk(&self, id: &str) -> Option<&Risk> {
        self.risks.iter().find(|r| r.id == id)
    }

    /// Checks id uniqueness, citations and references.
    pub fn validate(&self, cx: &LedgerContext<'_>) -> Result<(), AnalysisError> {
        fn unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<(), AnalysisError> {
            let mut seen = BTreeSet::new();
            for id in ids {
                if !seen.insert(id) {
                    return Err(AnalysisError::DuplicateId { kind, id: id.into() });
                }
            }
            Ok(())
        }
        let unknown = |kind, id: &str, target, reference: &str| AnalysisError::UnknownReference {
            kind,
            id: id.into(),
            target,
            reference: reference.into(),
        };
        unique("risk", self.risks.iter().map(|r| r.id.as_str()))?;
        unique("tradeoff", self.tradeoffs.iter().map(|t| t.id.as_str()))?;
        unique("sensitivity point", self.sensitivities.iter().map(|s| s.id.as_str()))?;
        unique("recommendation", self.recommendations.iter().map(|r| r.id.as_str()))?;

        for r in &self.risks {
            if r.scenarios.is_empty() && r.approaches.is_empty() {
                return Err(AnalysisError::Uncited {
                    kind: "risk",
                    id: r.id.clone(),
                });
            }
            if let Some(s) = r.scenarios.iter().find(|s| !cx.has_scenario(s)) {
                return Err(unknown("risk", &r.id, "scenario", s));
            }
            if let Some(a) = r.approaches.iter().find(|a| !cx.has_approach(a)) {
                return Err(unknown("risk", &r.id, "approach", a));
            }
        }
        for t in &self.tradeoffs {
            if t.qualities.iter().collect::<BTreeSet<_>>().len() < 2 {
                return Err(AnalysisError::TooFewQualities(t.id.clone()));
            }
            if !cx.has_approach(&t.approach) {
                return Err(unknown("tradeoff", &t.id, "approach", &t.approach));
            }
        }
        for s in &self.sensitivities {
            if !cx.has_approach(&s.approach) {
                return Err(unknown("sensitivity point", &s.id, "approach", &s.approach));
            }
        }
        for r in &self.recommendations {
            if r.addresses.is_empty() {
                return Err(AnalysisError::Uncited {
                    kind: "recommendation",
                    id: r.id.clone(),
                });
            }
            if let Some(a) = r.addresses.iter().find(|a| self.risk(a).is_none()) {
                return Err(unknown("recommendation", &r.id, "risk", a));
            }
            if !cx.has_revision(&r.target) {
                return Err(unknown("recommendation", &r.id, "architecture revision", &r.target));
            }
        }
        for a in &self.audit {
            if !cx.has_scenario(&a.scenario) {
                return Err(unknown("audit entry", &a.scenario, "scenario", &a.scenario));
            }
        }
        Ok(())
    }

    /// Ensures one open gap risk per high-priority scenario whose coverage
    /// is none or partial. Existing gap risks are reopened rather than
    /// duplicated; other entries are left alone.
    pub fn record_gaps(&mut self, gaps: &GapReport, band_of: impl Fn(&str) -> Option<Band>) {
        for g in &gaps.entries {
            if g.coverage == Coverage::Full || band_of(&g.scenario) != Some(Band::High) {
                continue;
            }
            let id = gap_risk_id(&g.scenario);
            let text = format!(
                "{} coverage of {} in {}: {}",
                g.coverage, g.scenario, gaps.architecture, g.justification
            );
            match self.risks.iter_mut().find(|r| r.id == id) {
                Some(r) => {
                    r.status = RiskStatus::Open;
                    r.text = text;
                }
                None => self.risks.push(Risk {
                    id,
                    text,
                    scenarios: vec![g.scenario.clone()],
                    approaches: g.supporting.clone(),
                    status: RiskStatus::Open,
                }),
            }
        }
    }

    /// Marks a risk mitigated when some recommendation addressing it targets
    /// a revision in which every scenario the risk cites has full coverage.
    /// Risks citing no scenario keep their status.
    pub fn refresh_mitigation(&mut self, scenarios: &[ContextScenario], architectures: &[ArchitectureModel]) {
        let mut full_in: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for arch in architectures {
            if let Ok(gaps) = gap_analysis(scenarios, arch) {
                full_in.insert(
                    arch.label(),
                    gaps.entries
                        .into_iter()
                        .filter(|e| e.coverage == Coverage::Full)
                        .map(|e| e.scenario)
                        .collect(),
                );
            }
        }
        for risk in &mut self.risks {
            if risk.scenarios.is_empty() {
                continue;
            }
            let mitigated = self
                .recommendations
                .iter()
                .filter(|rec| rec.addresses.contains(&risk.id))
                .filter_map(|rec| full_in.get(&rec.target))
                .any(|full| risk.scenarios.iter().all(|s| full.contains(s)));
            risk.status = if mitigated {
                RiskStatus::Mitigated
            } else {
                RiskStatus::Open
            };
        }
    }
}

pub fn gap_risk_id(scenario: &str) -> String {
    format!("gap-{scenario}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCoverage {
    pub scenario: String,
    pub quality: QualityAttribute,
    pub coverage: Coverage,
    /// Supporting approach ids, in model order.
    pub supporting: Vec<String>,
    /// Realised scenario artefacts no full-claim supporting approach touches.
    pub untouched: Vec<ArtefactRef>,
    /// Scenario artefacts no component of the model realises.
    pub unrealised: Vec<ArtefactRef>,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub architecture: String,
    pub entries: Vec<ScenarioCoverage>,
}

impl GapReport {
    pub fn get(&self, scenario: &str) -> Option<&ScenarioCoverage> {
        self.entries.iter().find(|e| e.scenario == scenario)
    }
}

pub fn gap_analysis(scenarios: &[ContextScenario], arch: &ArchitectureModel) -> Result<GapReport, AnalysisError> {
    for a in &arch.approaches {
        for t in &a.supports {
            if let SupportTarget::Scenario(id) = t {
                if !scenarios.iter().any(|s| &s.id == id) {
                    return Err(AnalysisError::UnknownScenario {
                        approach: a.id.clone(),
                        scenario: id.clone(),
                    });
                }
            }
        }
    }
    let realised = |art: ArtefactRef, component_ids: &[String]| {
        component_ids
            .iter()
            .any(|c| arch.component(c).is_some_and(|c| art.is_realised_by(c.artefact)))
    };
    let all: Vec<String> = arch.components.iter().map(|c| c.id.clone()).collect();
    let entries = scenarios
        .iter()
        .map(|s| {
            let supporting: Vec<_> = arch
                .approaches
                .iter()
                .filter(|a| a.supports.iter().any(|t| t.covers(s)))
                .collect();
            let (realised_arts, unrealised): (Vec<ArtefactRef>, Vec<ArtefactRef>) =
                s.artefacts.iter().partition(|a| realised(**a, &all));
            let untouched: Vec<ArtefactRef> = realised_arts
                .iter()
                .copied()
                .filter(|art| {
                    !supporting
                        .iter()
                        .filter(|a| a.coverage == CoverageClaim::Full)
                        .any(|a| realised(*art, &a.components))
                })
                .collect();
            let names = |v: &[ArtefactRef]| v.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", ");
            let ids: Vec<String> = supporting.iter().map(|a| a.id.clone()).collect();
            let (coverage, justification) = if supporting.is_empty() {
                (
                    Coverage::None,
                    format!("no approach supports {} or {}", s.id, s.quality),
                )
            } else if realised_arts.is_empty() {
                (
                    Coverage::Partial,
                    format!("no component realises {}", names(&s.artefacts)),
                )
            } else if !untouched.is_empty() {
                (
                    Coverage::Partial,
                    format!("{} not covered by {}", names(&untouched), ids.join(", ")),
                )
            } else {
                (
                    Coverage::Full,
                    format!("{} covered by {}", names(&realised_arts), ids.join(", ")),
                )
            };
            ScenarioCoverage {
                scenario: s.id.clone(),
                quality: s.quality,
                coverage,
                supporting: ids,
                untouched,
                unrealised,
                justification,
            }
        })
        .collect();
    Ok(GapReport {
        architecture: arch.label(),
        entries,
    })
}
