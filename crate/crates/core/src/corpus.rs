//! The Luna tax copilot case as fixtures, and a seeded telemetry generator.
//!
//! Fixture files live in `fixtures/luna/` and are embedded at build time.
//! The generator builds traces whose per-measure pass rates are exact, so
//! verdicts can be pushed to either side of a threshold by one event.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::AnalysisLedger;
use crate::catalogue::{ArtefactRef, GovernanceTag};
use crate::error::{Error, Result};
use crate::format::{parse_document_named, ArchitectureModel, ContextScenario, Document};
use crate::measures::{Comparator, MeasureSpec, Metric};
use crate::telemetry::{SpanKind, SpanRecord, Timestamp};
use crate::workspace::{Manifest, Payload, Step, Workspace};

pub const GOVERNANCE: &str = include_str!("../fixtures/luna/governance.arc");
pub const SCENARIOS: &str = include_str!("../fixtures/luna/scenarios.arc");
pub const ARCHITECTURE_PRE: &str = include_str!("../fixtures/luna/architecture-pre.arc");
pub const ARCHITECTURE_POST: &str = include_str!("../fixtures/luna/architecture-post.arc");
pub const MANIFEST: &str = include_str!("../fixtures/luna/arceval.toml");

const FILES: &[(&str, &str)] = &[
    ("governance.arc", GOVERNANCE),
    ("scenarios.arc", SCENARIOS),
    ("architecture-pre.arc", ARCHITECTURE_PRE),
    ("architecture-post.arc", ARCHITECTURE_POST),
];

/// Parsed fixture documents.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusBundle {
    pub governance: Vec<GovernanceTag>,
    pub scenarios: Vec<ContextScenario>,
    pub pre: ArchitectureModel,
    pub post: ArchitectureModel,
    pub manifest: Manifest,
}

fn parse(file: &str, text: &str) -> Result<Document> {
    Ok(parse_document_named(file, text)?)
}

impl CorpusBundle {
    pub fn load() -> Result<CorpusBundle> {
        let arch = |file, text| -> Result<ArchitectureModel> {
            parse(file, text)?
                .architectures()
                .next()
                .cloned()
                .ok_or_else(|| Error::Manifest {
                    path: file.into(),
                    message: "no architecture block".into(),
                })
        };
        Ok(CorpusBundle {
            governance: parse("governance.arc", GOVERNANCE)?.governance().cloned().collect(),
            scenarios: parse("scenarios.arc", SCENARIOS)?.scenarios().cloned().collect(),
            pre: arch("architecture-pre.arc", ARCHITECTURE_PRE)?,
            post: arch("architecture-post.arc", ARCHITECTURE_POST)?,
            manifest: luna_manifest()?,
        })
    }

    pub fn scenario(&self, id: &str) -> Option<&ContextScenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    /// The design-time process step by step, from an empty workspace to the
    /// post-review state. Each entry holds the workspace after the step.
    pub fn replay(&self) -> Result<Vec<(Step, Workspace)>> {
        let ledger = &self.manifest.ledger;
        let human_risks = ledger
            .risks
            .iter()
            .filter(|r| !r.id.starts_with("gap-"))
            .cloned()
            .map(|mut r| {
                r.status = crate::analysis::RiskStatus::Open;
                r
            })
            .collect();
        let steps: Vec<(Step, Payload)> = vec![
            (
                Step::UnderstandGoals,
                Payload {
                    goals: self.manifest.goals.clone(),
                    ..Default::default()
                },
            ),
            (
                Step::ReviewGovernance,
                Payload {
                    governance: self.governance.clone(),
                    ..Default::default()
                },
            ),
            (
                Step::IdentifyRequirements,
                Payload {
                    requirements: self.manifest.requirements.clone(),
                    ..Default::default()
                },
            ),
            (
                Step::ReviewArchitecture,
                Payload {
                    architecture: Some(self.pre.clone()),
                    ..Default::default()
                },
            ),
            (
                Step::DefineScenarios,
                Payload {
                    scenarios: self.scenarios.clone(),
                    ..Default::default()
                },
            ),
            (Step::PrioritiseScenarios, Payload::default()),
            (
                Step::AnalyseArchitecture,
                Payload {
                    ledger: AnalysisLedger {
                        risks: human_risks,
                        ..Default::default()
                    },
                    ..Default::default()
                },
            ),
            (
                Step::ImproveArchitecture,
                Payload {
                    architecture: Some(self.post.clone()),
                    ledger: AnalysisLedger {
                        tradeoffs: ledger.tradeoffs.clone(),
                        sensitivities: ledger.sensitivities.clone(),
                        recommendations: ledger.recommendations.clone(),
                        ..Default::default()
                    },
                    ..Default::default()
                },
            ),
        ];
        let mut ws = Workspace::new(self.manifest.name.clone());
        let mut out = Vec::with_capacity(steps.len());
        for (step, payload) in steps {
            ws = ws.advance(step, payload)?;
            out.push((step, ws.clone()));
        }
        Ok(out)
    }
}

pub fn luna_manifest() -> Result<Manifest> {
    toml::from_str(MANIFEST).map_err(|e| Error::Manifest {
        path: "arceval.toml".into(),
        message: e.to_string(),
    })
}

/// The post-review workspace as stored in the fixture manifest.
pub fn luna_workspace() -> Result<Workspace> {
    Workspace::from_manifest_with(&luna_manifest()?, |path| {
        FILES
            .iter()
            .find(|(name, _)| *name == path)
            .map(|(_, text)| text.to_string())
            .ok_or_else(|| Error::Manifest {
                path: path.into(),
                message: "not part of the embedded corpus".into(),
            })
    })
}

/// Writes the fixture files into `dir`.
pub fn write_fixtures(dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in FILES.iter().chain([&("arceval.toml", MANIFEST)]) {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("rate {0} outside [0,1]")]
    InvalidRate(f64),
    #[error("event count must be at least 1")]
    NoEvents,
    #[error("profile for {0} has no generatable measure")]
    EmptyProfile(String),
    #[error("completeness cannot share a profile with other measures")]
    MixedCompleteness,
    #[error("{0} cannot be generated")]
    Unsupported(String),
}

/// How one measure's population is generated. `rate` is the share of
/// population units that satisfy the measure's per-unit condition.
#[derive(Debug, Clone, PartialEq)]
pub enum PartKind {
    /// Events carry `tag` (and `population` when set) as outcome tags.
    Tagged { tag: String, population: Option<String> },
    /// Satisfying events get a latency on the passing side of `limit_ms`.
    Latency { limit_ms: f64, comparator: Comparator },
    /// One trace per unit; unsatisfying traces miss the last kind.
    Complete { kinds: Vec<SpanKind> },
    /// One open/close pair per unit, closed within or after `within_ms`.
    Resolve {
        open: String,
        close: String,
        within_ms: i64,
        inclusive: bool,
    },
}

impl PartKind {
    pub fn from_measure(spec: &MeasureSpec) -> Result<PartKind, GenerateError> {
        let th = spec.threshold;
        let unsupported = || GenerateError::Unsupported(spec.to_string());
        Ok(match &spec.metric {
            Metric::Ratio { tag, population } => PartKind::Tagged {
                tag: tag.as_str().to_string(),
                population: population.as_ref().map(|p| p.as_str().to_string()),
            },
            Metric::LatencyPct { .. } | Metric::MaxLatency => PartKind::Latency {
                limit_ms: th.value * th.unit.millis().ok_or_else(unsupported)?,
                comparator: spec.comparator,
            },
            Metric::Completeness { kinds } => PartKind::Complete { kinds: kinds.clone() },
            Metric::ResolveWithin { open, close, .. } => {
                let inclusive = match spec.comparator {
                    Comparator::Le => true,
                    Comparator::Lt => false,
                    _ => return Err(unsupported()),
                };
                PartKind::Resolve {
                    open: open.as_str().to_string(),
                    close: close.as_str().to_string(),
                    within_ms: (th.value * th.unit.millis().ok_or_else(unsupported)?).round() as i64,
                    inclusive,
                }
            }
            Metric::Judged { .. } => return Err(unsupported()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub kind: PartKind,
    pub rate: f64,
}

/// Event mix for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub scenario: String,
    pub artefact: Option<ArtefactRef>,
    /// Outcome tags every generated event carries.
    pub extra_tags: Vec<String>,
    pub parts: Vec<Part>,
}

impl Profile {
    /// One part per machine measure of `scenario`, all at `rate`.
    pub fn for_scenario(scenario: &ContextScenario, rate: f64) -> Result<Profile, GenerateError> {
        let parts = scenario
            .measures
            .iter()
            .filter(|m| m.is_machine())
            .map(|m| {
                Ok(Part {
                    kind: PartKind::from_measure(m)?,
                    rate,
                })
            })
            .collect::<Result<Vec<_>, GenerateError>>()?;
        Ok(Profile {
            scenario: scenario.id.clone(),
            artefact: scenario.artefacts.first().copied(),
            extra_tags: Vec::new(),
            parts,
        })
    }

    pub fn with_rate(mut self, part: usize, rate: f64) -> Self {
        self.parts[part].rate = rate;
        self
    }

    /// Number of units that satisfy part `i` in a trace of `n` units.
    pub fn satisfying(&self, i: usize, n: usize) -> usize {
        (self.parts[i].rate * n as f64).round() as usize
    }
}

/// Profiles for the Luna scenarios keyed by quality label, each at the
/// rate that lands exactly on its threshold.
pub fn luna_profiles(bundle: &CorpusBundle) -> Result<BTreeMap<String, Profile>, GenerateError> {
    let mut out = BTreeMap::new();
    for s in &bundle.scenarios {
        let mut p = Profile::for_scenario(s, 1.0)?;
        if p.parts.is_empty() {
            continue;
        }
        for (i, m) in s.measures.iter().filter(|m| m.is_machine()).enumerate() {
            if matches!(m.metric, Metric::Ratio { .. }) {
                p.parts[i].rate = m.threshold.value;
            }
        }
        if s.quality == crate::catalogue::QualityAttribute::Privacy {
            p.extra_tags.push("sensitive".into());
        }
        out.insert(s.quality.to_string(), p);
    }
    Ok(out)
}

/// First timestamp of every generated trace: 2025-07-01T00:00:00Z.
pub const TRACE_START_MS: i64 = 1_751_328_000_000;
const SPACING_MS: i64 = 1_000;

/// Generates `n` population units for `profile`. Deterministic in
/// `(profile, seed, n)`; records come back sorted by timestamp.
#[allow(clippy::needless_range_loop)]
pub fn generate_trace(profile: &Profile, seed: u64, n: usize) -> Result<Vec<SpanRecord>, GenerateError> {
    if n == 0 {
        return Err(GenerateError::NoEvents);
    }
    if profile.parts.is_empty() {
        return Err(GenerateError::EmptyProfile(profile.scenario.clone()));
    }
    if let Some(p) = profile.parts.iter().find(|p| !(0.0..=1.0).contains(&p.rate)) {
        return Err(GenerateError::InvalidRate(p.rate));
    }
    let has_complete = profile
        .parts
        .iter()
        .any(|p| matches!(p.kind, PartKind::Complete { .. }));
    if has_complete && profile.parts.len() > 1 {
        return Err(GenerateError::MixedCompleteness);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<Vec<bool>> = (0..profile.parts.len())
        .map(|i| {
            let mut mask = vec![false; n];
            for j in sample(&mut rng, n, profile.satisfying(i, n).min(n)) {
                mask[j] = true;
            }
            mask
        })
        .collect();

    let mut out = Vec::new();
    let sid = &profile.scenario;
    for unit in 0..n {
        let ts = Timestamp::from_millis(TRACE_START_MS + unit as i64 * SPACING_MS + rng.gen_range(0..SPACING_MS / 2));
        let trace = format!("{sid}-{unit:06}");
        let base = |kind: SpanKind, ts: Timestamp| {
            let mut r = SpanRecord::new(ts, trace.clone(), kind);
            r.scenario_tags = vec![sid.clone()];
            r.artefact = profile.artefact;
            r.outcome_tags = profile.extra_tags.clone();
            r
        };
        let mut event: Option<SpanRecord> = None;
        for (i, part) in profile.parts.iter().enumerate() {
            let ok = chosen[i][unit];
            match &part.kind {
                PartKind::Complete { kinds } => {
                    let keep = if ok { kinds.len() } else { kinds.len().saturating_sub(1) };
                    for (k, kind) in kinds.iter().take(keep).enumerate() {
                        out.push(base(*kind, ts.add_millis(k as i64)));
                    }
                }
                PartKind::Resolve {
                    open,
                    close,
                    within_ms,
                    inclusive,
                } => {
                    let w = *within_ms;
                    let (lo_ok, hi_ok) = (0, if *inclusive { w } else { w - 1 });
                    let lo_late = hi_ok + 1;
                    let delay = if ok {
                        rng.gen_range(lo_ok..=hi_ok.max(0))
                    } else {
                        rng.gen_range(lo_late..=lo_late + w.max(1))
                    };
                    out.push(labelled(base, open, ts));
                    out.push(labelled(base, close, ts.add_millis(delay)));
                }
                PartKind::Tagged { tag, population } => {
                    let e = event.get_or_insert_with(|| base(SpanKind::Fm, ts));
                    if let Some(p) = population {
                        push_unique(&mut e.outcome_tags, p);
                    }
                    if ok {
                        push_unique(&mut e.outcome_tags, tag);
                    }
                }
                PartKind::Latency { limit_ms, comparator } => {
                    let e = event.get_or_insert_with(|| base(SpanKind::Fm, ts));
                    e.latency_ms = Some(latency(&mut rng, *limit_ms, *comparator, ok));
                }
            }
        }
        out.extend(event);
    }
    out.sort_by_key(|r| r.ts);
    Ok(out)
}

/// A span of kind `label`, or a log span carrying `label` as an outcome tag.
fn labelled(base: impl Fn(SpanKind, Timestamp) -> SpanRecord, label: &str, ts: Timestamp) -> SpanRecord {
    match label.parse() {
        Ok(kind) => base(kind, ts),
        Err(_) => {
            let mut r = base(SpanKind::Log, ts);
            push_unique(&mut r.outcome_tags, label);
            r
        }
    }
}

fn push_unique(tags: &mut Vec<String>, tag: &str) {
    if !tags.iter().any(|t| t == tag) {
        tags.push(tag.to_string());
    }
}

/// Whole-millisecond latency on the requested side of `limit`.
fn latency(rng: &mut ChaCha8Rng, limit: f64, cmp: Comparator, ok: bool) -> f64 {
    // Largest whole value on the low side of the boundary.
    let below_max = match cmp {
        Comparator::Lt | Comparator::Ge => limit.ceil() - 1.0,
        _ => limit.floor(),
    };
    let span = limit.max(1.0).ceil() as i64;
    let (lo, hi) = match (cmp, ok) {
        (Comparator::Lt | Comparator::Le, true) | (Comparator::Gt | Comparator::Ge, false) => {
            (0, below_max.max(0.0) as i64)
        }
        _ => ((below_max + 1.0) as i64, (below_max + 1.0) as i64 + 2 * span),
    };
    rng.gen_range(lo..=hi) as f64
}

/// One trace per profile, interleaved by timestamp. Each profile is
/// seeded from `seed` and its position.
pub fn generate_mixed(profiles: &[&Profile], seed: u64, n: usize) -> Result<Vec<SpanRecord>, GenerateError> {
    let mut out = Vec::new();
    for (i, p) in profiles.iter().enumerate() {
        out.extend(generate_trace(p, seed.wrapping_mul(31).wrapping_add(i as u64), n)?);
    }
    out.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.trace_id.cmp(&b.trace_id)));
    Ok(out)
}
