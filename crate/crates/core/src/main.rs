use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use arceval::analysis::{coverage_sidecar, gap_analysis, render_report};
use arceval::catalogue::{instantiate, Catalogue, QualityAttribute};
use arceval::finding::Severity;
use arceval::format::{parse_document_named, serialize, serialize_block, validate, Block, Document};
use arceval::measures::{evaluate_scenario, ScenarioVerdict};
use arceval::monitor::{run_monitor, MonitorConfig, MonitorRun, DEFAULT_PERSISTENCE};
use arceval::prioritiser::{format_score, Weights};
use arceval::telemetry::{ingest, serialize_records, SpanRecord, WindowSpec};
use arceval::workspace::{coverage_check, diff_architectures, Manifest, Payload, Step, Workspace};
use arceval::{corpus, Error};

const EXIT_FINDINGS: u8 = 2;
const EXIT_PARSE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "arceval",
    version,
    about = "Scenario-based architecture evaluation for FM-based agents"
)]
struct Cli {
    /// Workspace directory holding arceval.toml.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty workspace, or a copy of the Luna case study.
    Init {
        #[arg(long, default_value = "workspace")]
        name: String,
        #[arg(long)]
        luna: bool,
    },
    /// Print the general scenario catalogue.
    Catalogue { quality: Option<QualityAttribute> },
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Validate documents, scenarios and requirement coverage.
    Check,
    /// Mark a process step complete.
    Advance { step: Step },
    /// Rank scenarios from stakeholder scores.
    Prioritise {
        /// Impact, risk and relevance weights, e.g. `2,1,1`.
        #[arg(long)]
        weights: Option<Weights>,
    },
    /// Gap analysis of the scenarios against an architecture revision.
    Analyse {
        /// Revision label; defaults to the current one.
        #[arg(long)]
        architecture: Option<String>,
        /// Also list changes from this revision.
        #[arg(long)]
        against: Option<String>,
    },
    /// Replay telemetry through sliding windows and print alerts.
    Monitor {
        #[arg(long)]
        telemetry: String,
        #[arg(long, default_value = "100")]
        window: WindowSpec,
        #[arg(long, default_value_t = DEFAULT_PERSISTENCE)]
        persistence: u32,
        /// Record persistent violations as reprioritisations in the workspace.
        #[arg(long)]
        reprioritise: bool,
    },
    /// Write synthetic telemetry for one scenario as JSONL.
    Generate {
        scenario: String,
        /// Share of population units satisfying each machine measure.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Population units to generate.
        #[arg(short, long, default_value_t = 100)]
        n: usize,
    },
    /// Render the evaluation report.
    Report {
        #[arg(long)]
        telemetry: Option<String>,
        #[arg(long, default_value = "100")]
        window: WindowSpec,
        #[arg(long, default_value_t = DEFAULT_PERSISTENCE)]
        persistence: u32,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Instantiate a general scenario into a workspace document.
    New {
        quality: QualityAttribute,
        id: String,
        /// Field override, `field=value`; repeatable.
        #[arg(long = "set", value_parser = parse_kv)]
        overrides: Vec<(String, String)>,
        /// Document to append to, relative to the workspace.
        #[arg(long, default_value = "scenarios.arc")]
        file: String,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected field=value, got `{s}`"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let parse = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<Error>(),
                    Some(Error::Parse(_) | Error::Measure(_) | Error::Manifest { .. })
                )
            });
            ExitCode::from(if parse { EXIT_PARSE } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let dir = &cli.workspace;
    let mut out = io::stdout().lock();
    match &cli.command {
        Command::Init { name, luna } => {
            if Manifest::path(dir).exists() {
                bail!("{} already exists", Manifest::path(dir).display());
            }
            if *luna {
                corpus::write_fixtures(dir)?;
            } else {
                fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
                Workspace::new(name.clone()).save(dir)?;
            }
            writeln!(out, "initialised {}", Manifest::path(dir).display())?;
            Ok(0)
        }
        Command::Catalogue { quality } => {
            let cat = Catalogue::builtin();
            let entries: Vec<_> = cat
                .entries()
                .filter(|g| quality.is_none_or(|q| g.quality == q))
                .cloned()
                .collect();
            match cli.format {
                Format::Machine => writeln!(out, "{}", serde_json::to_string_pretty(&entries)?)?,
                Format::Text => {
                    let doc = Document::from_blocks(entries.into_iter().map(Block::General).collect());
                    write!(out, "{}", serialize(&doc))?;
                }
            }
            Ok(0)
        }
        Command::Scenario(ScenarioCommand::New {
            quality,
            id,
            overrides,
            file,
        }) => {
            let mut manifest = Manifest::read(dir)?;
            let ws = Workspace::from_manifest(dir, &manifest)?;
            if ws.scenario(id).is_some() {
                bail!("scenario {id} already exists");
            }
            let overrides: BTreeMap<String, String> = overrides.iter().cloned().collect();
            let scenario = instantiate(Catalogue::builtin().get(*quality), id, &overrides)?;
            let path = dir.join(file);
            let mut text = fs::read_to_string(&path).unwrap_or_default();
            if !text.is_empty() {
                parse_document_named(file, &text)?;
                if !text.ends_with("\n\n") {
                    text.push('\n');
                }
            }
            text.push_str(&serialize_block(&Block::Scenario(scenario)));
            fs::write(&path, text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            if !manifest.documents.contains(file) {
                manifest.documents.push(file.clone());
                manifest.write(dir)?;
            }
            writeln!(out, "added scenario {id} to {file}")?;
            Ok(0)
        }
        Command::Check => {
            let ws = Workspace::load(dir)?;
            let cat = Catalogue::builtin();
            let mut findings: Vec<_> = ws.scenarios.iter().flat_map(|s| validate(s, cat)).collect();
            findings.extend(coverage_check(&ws));
            match cli.format {
                Format::Machine => writeln!(out, "{}", serde_json::to_string_pretty(&findings)?)?,
                Format::Text => {
                    for f in &findings {
                        writeln!(out, "{f}")?;
                    }
                    let warnings = findings.iter().filter(|f| f.severity == Severity::Warning).count();
                    writeln!(out, "{} scenarios, {warnings} warnings", ws.scenarios.len())?;
                }
            }
            Ok(if findings.iter().any(|f| f.severity == Severity::Warning) {
                EXIT_FINDINGS
            } else {
                0
            })
        }
        Command::Advance { step } => {
            let ws = Workspace::load(dir)?;
            let next = ws.advance(*step, Payload::default())?;
            next.save_state(dir)?;
            writeln!(out, "completed {step}")?;
            Ok(0)
        }
        Command::Prioritise { weights } => {
            let mut ws = Workspace::load(dir)?;
            if let Some(w) = weights {
                ws.weights = *w;
            }
            let ranking = ws.ranking()?;
            let bands = ws.bands()?;
            match cli.format {
                Format::Machine => {
                    let value = serde_json::json!({ "ranking": ranking, "bands": bands });
                    writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
                }
                Format::Text => {
                    writeln!(out, "weights {}", ws.weights)?;
                    for s in &ws.scenarios {
                        let r = ranking.as_ref().and_then(|r| r.get(&s.id));
                        writeln!(
                            out,
                            "{:<4} {:<16} {:<8} {}",
                            r.map_or("-".into(), |r| r.rank.to_string()),
                            s.id,
                            bands.get(&s.id).map_or("-".into(), |b| b.to_string()),
                            r.map_or("-".into(), |r| format_score(&r.score)),
                        )?;
                    }
                }
            }
            Ok(0)
        }
        Command::Analyse { architecture, against } => {
            let ws = Workspace::load(dir)?;
            let arch = match architecture {
                Some(label) => ws
                    .architecture(label)
                    .ok_or_else(|| anyhow!("unknown architecture revision {label}"))?,
                None => ws
                    .current_architecture()
                    .ok_or_else(|| anyhow!("workspace has no architecture"))?,
            };
            let gaps = gap_analysis(&ws.scenarios, arch)?;
            match cli.format {
                Format::Machine => writeln!(out, "{}", serde_json::to_string_pretty(&gaps)?)?,
                Format::Text => {
                    writeln!(out, "{}", gaps.architecture)?;
                    for e in &gaps.entries {
                        writeln!(
                            out,
                            "{:<12} {:<15} {:<8} {}",
                            e.scenario, e.quality, e.coverage, e.justification
                        )?;
                    }
                }
            }
            if let Some(before) = against {
                let before = ws
                    .architecture(before)
                    .ok_or_else(|| anyhow!("unknown architecture revision {before}"))?;
                for c in diff_architectures(before, arch) {
                    writeln!(out, "{c}")?;
                }
            }
            Ok(0)
        }
        Command::Monitor {
            telemetry,
            window,
            persistence,
            reprioritise,
        } => {
            let ws = Workspace::load(dir)?;
            let records = read_telemetry(telemetry)?;
            let run = run_monitor(&ws.scenarios, &records, &MonitorConfig::new(*window, *persistence))?;
            write!(out, "{}", run.alerts_jsonl())?;
            for s in run.summaries.iter().filter(|s| s.windows_failed > 0) {
                eprintln!(
                    "{} {}: {} of {} windows failed, longest streak {}{}",
                    s.scenario,
                    s.spec,
                    s.windows_failed,
                    s.windows_evaluated,
                    s.consecutive_failures,
                    if s.persistent { " (persistent)" } else { "" }
                );
            }
            if *reprioritise && !run.triggers.is_empty() {
                let mut next = ws.clone();
                if !next.state.contains(Step::MonitorRisks) {
                    next = next.advance(Step::MonitorRisks, Payload::default())?;
                }
                next = next.advance(
                    Step::Reprioritise,
                    Payload {
                        triggers: run.triggers.clone(),
                        ..Default::default()
                    },
                )?;
                next.save_state(dir)?;
                eprintln!(
                    "recorded {} reprioritisation(s)",
                    next.analysis.audit.len() - ws.analysis.audit.len()
                );
            }
            Ok(run.exit_code() as u8)
        }
        Command::Generate {
            scenario,
            rate,
            seed,
            n,
        } => {
            let ws = Workspace::load(dir)?;
            let s = ws
                .scenario(scenario)
                .ok_or_else(|| anyhow!("unknown scenario {scenario}"))?;
            let profile = corpus::Profile::for_scenario(s, *rate)?;
            write!(
                out,
                "{}",
                serialize_records(&corpus::generate_trace(&profile, *seed, *n)?)
            )?;
            Ok(0)
        }
        Command::Report {
            telemetry,
            window,
            persistence,
        } => {
            let ws = Workspace::load(dir)?;
            if cli.format == Format::Machine {
                write!(out, "{}", coverage_sidecar(&ws)?)?;
                return Ok(0);
            }
            let (verdicts, run) = match telemetry {
                Some(t) => {
                    let records = read_telemetry(t)?;
                    let verdicts: Vec<ScenarioVerdict> = ws
                        .scenarios
                        .iter()
                        .map(|s| evaluate_scenario(s, &records, &[]))
                        .collect();
                    let run = run_monitor(&ws.scenarios, &records, &MonitorConfig::new(*window, *persistence))?;
                    (verdicts, run)
                }
                None => (Vec::new(), MonitorRun::default()),
            };
            write!(out, "{}", render_report(&ws, &verdicts, &run.summaries))?;
            Ok(0)
        }
    }
}

fn read_telemetry(source: &str) -> anyhow::Result<Vec<SpanRecord>> {
    let ingested = if source == "-" {
        ingest(io::stdin().lock())?
    } else {
        let path = Path::new(source);
        let file = fs::File::open(path).with_context(|| path.display().to_string())?;
        ingest(BufReader::new(file))?
    };
    for r in &ingested.rejected {
        eprintln!("warning: {source}:{}: {}", r.line, r.reason);
    }
    Ok(ingested.accepted)
}
