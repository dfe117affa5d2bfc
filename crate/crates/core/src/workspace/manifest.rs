//! `arceval.toml`: the workspace manifest stored beside the DSL documents.
//!
//! ```toml
//! name = "luna"
//! documents = ["governance.arc", "scenarios.arc", "architecture-pre.arc"]
//! current_architecture = "luna@pre-review"
//! history = ["understand-goals", "review-governance"]
//!
//! [[goals]]
//! id = "g1"
//! text = "Answer customer questions"
//! clarified = true
//! ```
//!
//! Requirements, weights and the analysis ledger live in the manifest too;
//! scenarios, governance tags, priorities and architecture revisions live
//! in the documents.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GoalStatement, ProcessState, QualityRequirement, Step, Workspace};
use crate::analysis::AnalysisLedger;
use crate::error::{Error, Result};
use crate::format::{parse_document_named, serialize, Block, Document};
use crate::prioritiser::Weights;

pub const MANIFEST_FILE: &str = "arceval.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    /// Document paths relative to the manifest, loaded in order.
    #[serde(default)]
    pub documents: Vec<String>,
    /// Label of the current architecture revision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_architecture: Option<String>,
    /// Every step completion in order; the completed set is derived.
    #[serde(default)]
    pub history: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default)]
    pub goals: Vec<GoalStatement>,
    #[serde(default)]
    pub requirements: Vec<QualityRequirement>,
    #[serde(default)]
    pub ledger: AnalysisLedger,
}

impl Manifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = Self::path(dir);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Manifest {
            path,
            message: e.to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = Self::path(dir);
        let text = toml::to_string(self).map_err(|e| Error::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

impl Workspace {
    /// Reads the manifest in `dir` and every document it lists.
    pub fn load(dir: &Path) -> Result<Workspace> {
        let manifest = Manifest::read(dir)?;
        Self::from_manifest(dir, &manifest)
    }

    pub fn from_manifest(dir: &Path, manifest: &Manifest) -> Result<Workspace> {
        Self::from_manifest_with(manifest, |doc_path| {
            let path = dir.join(doc_path);
            fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        })
        .map_err(|e| match e {
            Error::Manifest { path, message } if path.as_os_str() == MANIFEST_FILE => Error::Manifest {
                path: Manifest::path(dir),
                message,
            },
            e => e,
        })
    }

    /// As [`Workspace::from_manifest`], reading documents through `read`.
    pub fn from_manifest_with(manifest: &Manifest, mut read: impl FnMut(&str) -> Result<String>) -> Result<Workspace> {
        let dir = Path::new("");
        let mut ws = Workspace::new(manifest.name.clone());
        for doc_path in &manifest.documents {
            let text = read(doc_path)?;
            let doc = parse_document_named(doc_path, &text)?;
            ws.absorb(doc_path, doc)?;
        }
        ws.goals = manifest.goals.clone();
        ws.requirements = manifest.requirements.clone();
        ws.weights = manifest.weights.unwrap_or_default();
        ws.analysis = manifest.ledger.clone();
        ws.state = ProcessState::replay(&manifest.history).map_err(|e| manifest_error(dir, e))?;
        if let Some(label) = &manifest.current_architecture {
            ws.set_current(label).map_err(|e| manifest_error(dir, e))?;
        } else if !ws.architectures.is_empty() {
            ws.current = Some(ws.architectures.len() - 1);
        }
        ws.check_references().map_err(|e| manifest_error(dir, e))?;
        Ok(ws)
    }

    fn absorb(&mut self, file: &str, doc: Document) -> Result<()> {
        let dup = |kind: &str, id: &str| Error::Manifest {
            path: file.into(),
            message: format!("duplicate {kind} {id} across documents"),
        };
        for block in doc.blocks {
            match block {
                Block::Scenario(s) => {
                    if self.scenario(&s.id).is_some() {
                        return Err(dup("scenario", &s.id));
                    }
                    self.scenarios.push(s);
                }
                Block::Architecture(a) => {
                    if self.architecture(&a.label()).is_some() {
                        return Err(dup("architecture revision", &a.label()));
                    }
                    self.architectures.push(a);
                }
                Block::Governance(g) => {
                    if self.governance.iter().any(|x| x.id == g.id) {
                        return Err(dup("governance tag", &g.id));
                    }
                    self.governance.push(g);
                }
                Block::Priorities(p) => {
                    if self.priorities.iter().any(|x| x.stakeholder == p.stakeholder) {
                        return Err(dup("priorities stakeholder", &p.stakeholder));
                    }
                    self.priorities.push(p);
                }
                Block::General(g) => {
                    return Err(Error::Manifest {
                        path: file.into(),
                        message: format!("general scenario {} belongs in a catalogue file", g.quality),
                    });
                }
            }
        }
        Ok(())
    }

    /// Manifest for this workspace over the given document list.
    pub fn manifest(&self, documents: Vec<String>) -> Manifest {
        Manifest {
            name: self.name.clone(),
            documents,
            current_architecture: self.current_architecture().map(|a| a.label()),
            history: self.state.history().to_vec(),
            weights: (self.weights != Weights::default()).then_some(self.weights),
            goals: self.goals.clone(),
            requirements: self.requirements.clone(),
            ledger: self.analysis.clone(),
        }
    }

    /// Writes canonical documents (`governance.arc`, `scenarios.arc`,
    /// `priorities.arc`, `architectures.arc`, each only when non-empty)
    /// and the manifest listing them.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let groups: [(&str, Vec<Block>); 4] = [
            (
                "governance.arc",
                self.governance.iter().cloned().map(Block::Governance).collect(),
            ),
            (
                "scenarios.arc",
                self.scenarios.iter().cloned().map(Block::Scenario).collect(),
            ),
            (
                "priorities.arc",
                self.priorities.iter().cloned().map(Block::Priorities).collect(),
            ),
            (
                "architectures.arc",
                self.architectures.iter().cloned().map(Block::Architecture).collect(),
            ),
        ];
        let mut documents = Vec::new();
        for (file, blocks) in groups {
            if blocks.is_empty() {
                continue;
            }
            let path = dir.join(file);
            fs::write(&path, serialize(&Document::from_blocks(blocks))).map_err(|e| Error::io(&path, e))?;
            documents.push(file.to_string());
        }
        self.manifest(documents).write(dir)
    }

    /// Rewrites only the manifest, keeping its current document list.
    pub fn save_state(&self, dir: &Path) -> Result<()> {
        let documents = Manifest::read(dir)?.documents;
        self.manifest(documents).write(dir)
    }
}

fn manifest_error(dir: &Path, e: impl std::fmt::Display) -> Error {
    Error::Manifest {
        path: Manifest::path(dir),
        message: e.to_string(),
    }
}
