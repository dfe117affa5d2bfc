//! The document format.
//!
//! A document is a sequence of top-level blocks:
//!
//! ```text
//! scenario "luna-7" {
//!   seq: 7
//!   quality: privacy
//!   priority: high
//!   source: "Tax professional submitting sensitive data"
//!   stimulus: "Personal data is submitted for a tax calculation"
//!   environment: "Sensitive data must be protected"
//!   artefacts: [prompt-optimiser, generator]
//!   response: "All sensitive data is desensitised"
//!   measures: [ratio(sensitive_filtered) >= 0.99]
//! }
//! ```
//!
//! Block kinds are `scenario`, `architecture`, `governance`, `priorities` and
//! `general`. Architecture blocks nest `component` and `approach` blocks.
//! Fields are `name: value`, one per line; values are strings, numbers,
//! labels, measure expressions, or bracketed lists of those. `#` starts a
//! comment. [`serialize`] emits a canonical form that [`parse_document`]
//! reads back to an equal [`Document`].

pub mod lexer;
mod parser;
mod writer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{ArtefactRef, Catalogue, GeneralScenario, GovernanceTag, QualityAttribute};
use crate::finding::Finding;
use crate::measures::{MeasureSpec, Metric};
use crate::prioritiser::{Band, PriorityInput};

pub use parser::{parse_document, parse_document_named};
pub use writer::{serialize, serialize_block};

/// Where an object starts in its source file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// A human judgement recorded outside telemetry, e.g. a user study result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalAssessment {
    pub name: String,
    pub pass: bool,
    pub note: String,
}

/// A general scenario bound to a concrete system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextScenario {
    pub id: String,
    pub seq: Option<u32>,
    pub quality: QualityAttribute,
    /// Directly assigned band; `None` is `unset`.
    pub priority: Option<Band>,
    pub source: String,
    pub stimulus: String,
    pub environment: String,
    pub artefacts: Vec<ArtefactRef>,
    pub response: String,
    pub measures: Vec<MeasureSpec>,
    pub external_assessments: Vec<ExternalAssessment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub artefact: ArtefactRef,
    pub description: String,
}

label_enum! {
    pub enum ApproachKind ("approach kind") {
        Pattern => "pattern",
        Tactic => "tactic",
        Decision => "decision",
        Guardrail => "guardrail",
    }
}

label_enum! {
    pub enum CoverageClaim ("coverage claim") {
        Full => "full",
        Partial => "partial",
    }
}

/// What an approach claims to support: one scenario or every scenario of a
/// quality attribute. Scenario ids are written as strings, qualities as
/// labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportTarget {
    Scenario(String),
    Quality(QualityAttribute),
}

impl SupportTarget {
    pub fn covers(&self, scenario: &ContextScenario) -> bool {
        match self {
            SupportTarget::Scenario(id) => *id == scenario.id,
            SupportTarget::Quality(q) => *q == scenario.quality,
        }
    }
}

impl fmt::Display for SupportTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportTarget::Scenario(id) => write!(f, "{id}"),
            SupportTarget::Quality(q) => write!(f, "{q}"),
        }
    }
}

/// A design pattern, tactic, decision or guardrail applied to components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchApproach {
    pub id: String,
    pub kind: ApproachKind,
    pub components: Vec<String>,
    pub supports: Vec<SupportTarget>,
    pub coverage: CoverageClaim,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureModel {
    pub name: String,
    pub version_label: String,
    pub components: Vec<Component>,
    pub approaches: Vec<ArchApproach>,
}

impl ArchitectureModel {
    /// `name@version`, or the bare name when unversioned. Unique per
    /// document and per workspace.
    pub fn label(&self) -> String {
        if self.version_label.is_empty() {
            self.name.clone()
        } else {
            format!("{}@{}", self.name, self.version_label)
        }
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn approach(&self, id: &str) -> Option<&ArchApproach> {
        self.approaches.iter().find(|a| a.id == id)
    }
}

/// One row of a `priorities` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityScore {
    pub scenario: String,
    pub impact: u8,
    pub risk: u8,
    pub relevance: u8,
}

/// One stakeholder's scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityBlock {
    pub stakeholder: String,
    pub scores: Vec<PriorityScore>,
}

impl PriorityBlock {
    pub fn inputs(&self) -> impl Iterator<Item = PriorityInput> + '_ {
        self.scores.iter().map(|s| PriorityInput {
            scenario: s.scenario.clone(),
            stakeholder: self.stakeholder.clone(),
            impact: s.impact,
            risk: s.risk,
            relevance: s.relevance,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Scenario(ContextScenario),
    Architecture(ArchitectureModel),
    Governance(GovernanceTag),
    Priorities(PriorityBlock),
    General(GeneralScenario),
}

/// Parsed blocks in document order, each with the span of its keyword.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub blocks: Vec<Block>,
    pub spans: Vec<SourceSpan>,
}

impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks
    }
}

impl Document {
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        let spans = blocks
            .iter()
            .map(|_| SourceSpan {
                file: String::new(),
                line: 1,
                column: 1,
            })
            .collect();
        Document { blocks, spans }
    }

    pub fn push(&mut self, block: Block) {
        self.blocks.push(block);
        self.spans.push(SourceSpan {
            file: String::new(),
            line: 1,
            column: 1,
        });
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &ContextScenario> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Scenario(s) => Some(s),
            _ => None,
        })
    }

    pub fn architectures(&self) -> impl Iterator<Item = &ArchitectureModel> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Architecture(a) => Some(a),
            _ => None,
        })
    }

    pub fn governance(&self) -> impl Iterator<Item = &GovernanceTag> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Governance(g) => Some(g),
            _ => None,
        })
    }

    pub fn priorities(&self) -> impl Iterator<Item = &PriorityBlock> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Priorities(p) => Some(p),
            _ => None,
        })
    }

    /// Every priority row as a stakeholder input.
    pub fn priority_inputs(&self) -> Vec<PriorityInput> {
        self.priorities().flat_map(PriorityBlock::inputs).collect()
    }

    pub fn generals(&self) -> impl Iterator<Item = &GeneralScenario> {
        self.blocks.iter().filter_map(|b| match b {
            Block::General(g) => Some(g),
            _ => None,
        })
    }

    /// Span of the first block satisfying `pred`.
    pub fn span_of(&self, pred: impl Fn(&Block) -> bool) -> Option<&SourceSpan> {
        self.blocks.iter().position(pred).and_then(|i| self.spans.get(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Lexical(String),
    #[error("{0}")]
    Syntax(String),
    #[error("unknown block kind `{0}`")]
    UnknownBlock(String),
    #[error("unknown field `{field}` in {block} block")]
    UnknownField { block: &'static str, field: String },
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("duplicate {kind} `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error(transparent)]
    Vocab(#[from] crate::catalogue::VocabError),
    #[error(transparent)]
    Measure(#[from] crate::measures::MeasureErrorKind),
    #[error("{0}")]
    Invalid(String),
}

/// Findings for one scenario against the general scenario of its quality.
///
/// * `no-measures` (warning): neither measures nor external assessments.
/// * `artefact-outside-general` (info): an artefact the general scenario
///   does not name, directly or through a composite.
/// * `judged-without-assessment` (warning): a judged measure with no
///   matching external assessment.
/// * `empty-template-part` (warning): one of the six parts is blank.
pub fn validate(scenario: &ContextScenario, catalogue: &Catalogue) -> Vec<Finding> {
    let mut findings = Vec::new();
    let id = scenario.id.as_str();
    for (part, text) in [
        ("source", &scenario.source),
        ("stimulus", &scenario.stimulus),
        ("environment", &scenario.environment),
        ("response", &scenario.response),
    ] {
        if text.trim().is_empty() {
            findings.push(Finding::warning("empty-template-part", id, format!("{part} is empty")));
        }
    }
    if scenario.artefacts.is_empty() {
        findings.push(Finding::warning("empty-template-part", id, "artefacts is empty"));
    }
    if scenario.measures.is_empty() && scenario.external_assessments.is_empty() {
        findings.push(Finding::warning("no-measures", id, "scenario has no response measure"));
    }
    let general = catalogue.get(scenario.quality);
    for a in &scenario.artefacts {
        if !general.artefacts.iter().any(|g| g.is_realised_by(*a)) {
            findings.push(Finding::info(
                "artefact-outside-general",
                id,
                format!(
                    "artefact `{a}` is not named by the {} general scenario",
                    scenario.quality
                ),
            ));
        }
    }
    for m in &scenario.measures {
        if let Metric::Judged { name } = &m.metric {
            if !scenario.external_assessments.iter().any(|a| a.name == name.as_str()) {
                findings.push(Finding::warning(
                    "judged-without-assessment",
                    id,
                    format!("human-judged measure `{m}` requires an external assessment `{name}`"),
                ));
            }
        }
    }
    findings
}
