//! Quality-attribute and artefact vocabularies, the general-scenario
//! catalogue, and governance guardrail tags.
//!
//! The built-in catalogue is stored in the same document format as
//! everything else (see [`crate::format`]) and parsed once on first use. A
//! catalogue file with `general` blocks replaces individual entries.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{self, ContextScenario, Document};
use crate::measures::{self, MeasureError, MetricName};
use crate::prioritiser::Band;

/// A label outside one of the closed vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {vocabulary} `{token}`")]
pub struct VocabError {
    pub vocabulary: &'static str,
    pub token: String,
}

impl VocabError {
    pub fn new(vocabulary: &'static str, token: impl Into<String>) -> Self {
        VocabError {
            vocabulary,
            token: token.into(),
        }
    }
}

label_enum! {
    /// One of the eleven quality attributes the catalogue covers.
    pub enum QualityAttribute ("quality attribute") {
        Accuracy => "accuracy",
        Adaptability => "adaptability",
        Efficiency => "efficiency",
        Privacy => "privacy",
        Security => "security",
        Fairness => "fairness",
        Availability => "availability",
        Observability => "observability",
        Transparency => "transparency",
        Safety => "safety",
        Contestability => "contestability",
    }
}

label_enum! {
    /// Agent components a scenario stimulus can target, or an architecture
    /// component can realise.
    pub enum ArtefactRef ("artefact") {
        /// The agent as a whole.
        Agent => "agent",
        ContextEngine => "context-engine",
        PromptOptimiser => "prompt-optimiser",
        ReasoningPlanning => "reasoning-planning",
        WorkflowExecution => "workflow-execution",
        AgentMemory => "agent-memory",
        ShortTermMemory => "short-term-memory",
        LongTermMemory => "long-term-memory",
        Retriever => "retriever",
        Reranker => "reranker",
        Generator => "generator",
        KnowledgeBase => "knowledge-base",
        VectorDatabase => "vector-database",
        RelationalDatabase => "relational-database",
        DataCrawler => "data-crawler",
        DataChunker => "data-chunker",
        ExternalTool => "external-tool",
        OtherAgent => "other-agent",
        Guardrails => "guardrails",
        LogRepository => "log-repository",
        AgentOps => "agentops",
        FoundationModel => "foundation-model",
        Evaluator => "evaluator",
        Monitoring => "monitoring",
    }
}

impl ArtefactRef {
    /// The enclosing artefact, for the two composite ones: memory is split
    /// into short- and long-term stores, and the knowledge base is realised
    /// by vector and relational databases.
    pub fn parent(self) -> Option<ArtefactRef> {
        match self {
            ArtefactRef::ShortTermMemory | ArtefactRef::LongTermMemory => Some(ArtefactRef::AgentMemory),
            ArtefactRef::VectorDatabase | ArtefactRef::RelationalDatabase => Some(ArtefactRef::KnowledgeBase),
            _ => None,
        }
    }

    /// Whether a component of kind `component` realises this artefact.
    /// `agent` is realised by every component.
    pub fn is_realised_by(self, component: ArtefactRef) -> bool {
        self == ArtefactRef::Agent || self == component || component.parent() == Some(self)
    }
}

/// A quality-attribute scenario template not yet bound to a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralScenario {
    pub quality: QualityAttribute,
    pub source_template: String,
    pub stimulus_template: String,
    pub environment_template: String,
    pub artefacts: Vec<ArtefactRef>,
    pub response_template: String,
    /// Human-readable response measure descriptions.
    pub measure_templates: Vec<String>,
    /// Non-normative metric suggestions.
    pub suggested_metrics: Vec<MetricName>,
}

/// A guardrail statement from a governance source and the qualities it maps
/// to by default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceTag {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub default_qualities: Vec<QualityAttribute>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogueError {
    #[error("scenario id must not be empty")]
    EmptyId,
    #[error("invalid override field `{0}`")]
    InvalidOverrideField(String),
    #[error("invalid value for override `{field}`: {reason}")]
    InvalidOverrideValue { field: String, reason: String },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("duplicate governance tag id `{0}`")]
    DuplicateTag(String),
    #[error("no general scenario for quality attribute `{0}`")]
    MissingQuality(QualityAttribute),
}

const BUILTIN_SOURCE: &str = include_str!("catalogue.arc");

/// The general-scenario catalogue: exactly one entry per quality attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalogue {
    entries: BTreeMap<QualityAttribute, GeneralScenario>,
}

impl Catalogue {
    /// The built-in catalogue.
    pub fn builtin() -> &'static Catalogue {
        static BUILTIN: OnceLock<Catalogue> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            let doc =
                format::parse_document_named("<builtin catalogue>", BUILTIN_SOURCE).expect("built-in catalogue parses");
            let entries = doc
                .generals()
                .map(|g| (g.quality, g.clone()))
                .collect::<BTreeMap<_, _>>();
            assert_eq!(entries.len(), QualityAttribute::ALL.len());
            Catalogue { entries }
        })
    }

    /// The built-in catalogue with every `general` block in `doc` replacing
    /// the entry for its quality attribute.
    pub fn with_overrides(doc: &Document) -> Catalogue {
        let mut catalogue = Catalogue::builtin().clone();
        for general in doc.generals() {
            catalogue.entries.insert(general.quality, general.clone());
        }
        catalogue
    }

    pub fn get(&self, quality: QualityAttribute) -> &GeneralScenario {
        // Every quality is present: the builtin asserts it and overrides only replace.
        &self.entries[&quality]
    }

    /// Entries in vocabulary order.
    pub fn entries(&self) -> impl Iterator<Item = &GeneralScenario> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The built-in general scenarios in vocabulary order.
pub fn builtin_catalogue() -> Vec<GeneralScenario> {
    Catalogue::builtin().entries().cloned().collect()
}

/// Binds a general scenario to a concrete id. Fields not named in
/// `overrides` carry the templates verbatim; the measure list starts empty.
pub fn instantiate(
    general: &GeneralScenario,
    id: &str,
    overrides: &BTreeMap<String, String>,
) -> Result<ContextScenario, CatalogueError> {
    if id.trim().is_empty() {
        return Err(CatalogueError::EmptyId);
    }
    let mut scenario = ContextScenario {
        id: id.to_string(),
        seq: None,
        quality: general.quality,
        priority: None,
        source: general.source_template.clone(),
        stimulus: general.stimulus_template.clone(),
        environment: general.environment_template.clone(),
        artefacts: general.artefacts.clone(),
        response: general.response_template.clone(),
        measures: Vec::new(),
        external_assessments: Vec::new(),
    };
    apply_overrides(&mut scenario, overrides)?;
    Ok(scenario)
}

/// Field names accepted by [`apply_overrides`].
pub const OVERRIDE_FIELDS: &[&str] = &[
    "seq",
    "priority",
    "source",
    "stimulus",
    "environment",
    "artefacts",
    "response",
    "measures",
];

/// Overwrites scenario fields from textual values. `artefacts` takes a
/// comma-separated label list and `measures` a `;`-separated list of measure
/// expressions. The scenario is left untouched on error.
pub fn apply_overrides(
    scenario: &mut ContextScenario,
    overrides: &BTreeMap<String, String>,
) -> Result<(), CatalogueError> {
    let mut next = scenario.clone();
    for (field, value) in overrides {
        let invalid = |reason: String| CatalogueError::InvalidOverrideValue {
            field: field.clone(),
            reason,
        };
        match field.as_str() {
            "seq" => {
                let seq: u32 = value
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("`{value}` is not a positive integer")))?;
                if seq == 0 {
                    return Err(invalid("sequence numbers start at 1".into()));
                }
                next.seq = Some(seq);
            }
            "priority" => {
                next.priority = match value.trim() {
                    "unset" => None,
                    other => Some(other.parse::<Band>()?),
                };
            }
            "source" => next.source = value.clone(),
            "stimulus" => next.stimulus = value.clone(),
            "environment" => next.environment = value.clone(),
            "response" => next.response = value.clone(),
            "artefacts" => {
                let artefacts = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse::<ArtefactRef>)
                    .collect::<Result<Vec<_>, _>>()?;
                if artefacts.is_empty() {
                    return Err(invalid("at least one artefact is required".into()));
                }
                next.artefacts = artefacts;
            }
            "measures" => {
                next.measures = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(measures::parse_measure)
                    .collect::<Result<Vec<_>, _>>()?;
            }
            other => return Err(CatalogueError::InvalidOverrideField(other.to_string())),
        }
    }
    *scenario = next;
    Ok(())
}

/// Governance tags resolved to quality attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceMapping {
    /// Tag id to mapped qualities, in input order.
    pub entries: Vec<(String, Vec<QualityAttribute>)>,
    /// Tags whose default mapping is empty.
    pub unmapped: Vec<String>,
}

impl GovernanceMapping {
    pub fn get(&self, tag_id: &str) -> Option<&[QualityAttribute]> {
        self.entries
            .iter()
            .find(|(id, _)| id == tag_id)
            .map(|(_, q)| q.as_slice())
    }
}

pub fn map_governance(tags: &[GovernanceTag]) -> Result<GovernanceMapping, CatalogueError> {
    let mut seen = BTreeSet::new();
    let mut mapping = GovernanceMapping::default();
    for tag in tags {
        if !seen.insert(tag.id.as_str()) {
            return Err(CatalogueError::DuplicateTag(tag.id.clone()));
        }
        if tag.default_qualities.is_empty() {
            mapping.unmapped.push(tag.id.clone());
        }
        mapping.entries.push((tag.id.clone(), tag.default_qualities.clone()));
    }
    Ok(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn builtin_has_one_entry_per_quality() {
        let entries = builtin_catalogue();
        assert_eq!(entries.len(), 11);
        for q in QualityAttribute::ALL {
            assert_eq!(entries.iter().filter(|g| g.quality == *q).count(), 1, "{q}");
        }
    }

    #[test]
    fn builtin_transcriptions() {
        let cat = Catalogue::builtin();
        assert!(cat
            .get(QualityAttribute::Accuracy)
            .response_template
            .contains("accurately accomplishes the goal through"));
        assert_eq!(
            cat.get(QualityAttribute::Observability).artefacts,
            vec![ArtefactRef::LogRepository]
        );
        assert_eq!(
            cat.get(QualityAttribute::Privacy).artefacts,
            vec![ArtefactRef::WorkflowExecution]
        );
    }

    #[test]
    fn vocabularies_are_closed() {
        assert_eq!(QualityAttribute::ALL.len(), 11);
        assert_eq!(ArtefactRef::ALL.len(), 24);
        let err = "reliability".parse::<QualityAttribute>().unwrap_err();
        assert_eq!(err.token, "reliability");
        assert!("bogus"
            .parse::<ArtefactRef>()
            .unwrap_err()
            .to_string()
            .contains("bogus"));
        for a in ArtefactRef::ALL {
            assert_eq!(a.as_str().parse::<ArtefactRef>().unwrap(), *a);
        }
    }

    #[test]
    fn instantiate_with_source_override() {
        let general = Catalogue::builtin().get(QualityAttribute::Accuracy);
        let s = instantiate(general, "luna-1", &overrides(&[("source", "Tax professional")])).unwrap();
        assert_eq!(s.quality, QualityAttribute::Accuracy);
        assert_eq!(s.source, "Tax professional");
        assert_eq!(s.response, general.response_template);
        assert!(s.measures.is_empty());
    }

    #[test]
    fn instantiate_identity() {
        let general = Catalogue::builtin().get(QualityAttribute::Safety);
        let s = instantiate(general, "x", &BTreeMap::new()).unwrap();
        assert_eq!(s.id, "x");
        assert_eq!(s.source, general.source_template);
        assert_eq!(s.stimulus, general.stimulus_template);
        assert_eq!(s.environment, general.environment_template);
        assert_eq!(s.artefacts, general.artefacts);
        assert_eq!(s.response, general.response_template);
        assert_eq!(s.priority, None);
    }

    #[test]
    fn instantiate_rejects_bad_input() {
        let general = Catalogue::builtin().get(QualityAttribute::Fairness);
        let err = instantiate(general, "f-1", &overrides(&[("artefacts", "bogus")])).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = instantiate(general, "f-1", &overrides(&[("quality", "safety")])).unwrap_err();
        assert_eq!(err, CatalogueError::InvalidOverrideField("quality".into()));
        assert_eq!(
            instantiate(general, "  ", &BTreeMap::new()).unwrap_err(),
            CatalogueError::EmptyId
        );
    }

    #[test]
    fn overrides_are_idempotent() {
        let general = Catalogue::builtin().get(QualityAttribute::Privacy);
        let o = overrides(&[
            ("artefacts", "prompt-optimiser, generator"),
            ("measures", "ratio(sensitive_filtered) >= 0.99"),
            ("priority", "high"),
            ("seq", "7"),
        ]);
        let mut once = instantiate(general, "p", &o).unwrap();
        let twice = once.clone();
        apply_overrides(&mut once, &o).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.measures.len(), 1);
    }

    #[test]
    fn governance_mapping() {
        let g3 = GovernanceTag {
            id: "G3".into(),
            text: "Enable human control or intervention".into(),
            default_qualities: vec![QualityAttribute::Safety, QualityAttribute::Contestability],
        };
        let m = map_governance(std::slice::from_ref(&g3)).unwrap();
        assert_eq!(
            m.get("G3").unwrap(),
            &[QualityAttribute::Safety, QualityAttribute::Contestability]
        );
        assert!(m.unmapped.is_empty());

        assert_eq!(map_governance(&[]).unwrap(), GovernanceMapping::default());

        let bare = GovernanceTag {
            id: "G9".into(),
            text: "x".into(),
            default_qualities: vec![],
        };
        let m = map_governance(std::slice::from_ref(&bare)).unwrap();
        assert_eq!(m.get("G9").unwrap(), &[] as &[QualityAttribute]);
        assert_eq!(m.unmapped, vec!["G9".to_string()]);

        assert_eq!(
            map_governance(&[g3.clone(), g3]).unwrap_err(),
            CatalogueError::DuplicateTag("G3".into())
        );
    }

    #[test]
    fn composite_artefacts() {
        assert!(ArtefactRef::AgentMemory.is_realised_by(ArtefactRef::LongTermMemory));
        assert!(ArtefactRef::KnowledgeBase.is_realised_by(ArtefactRef::VectorDatabase));
        assert!(ArtefactRef::Agent.is_realised_by(ArtefactRef::Generator));
        assert!(!ArtefactRef::LongTermMemory.is_realised_by(ArtefactRef::AgentMemory));
        assert!(!ArtefactRef::Retriever.is_realised_by(ArtefactRef::Reranker));
    }
}
