//! Plain-text report with fixed `== section ==` headings, and the JSON
//! sidecar of the coverage table.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{gap_analysis, GapReport};
use crate::measures::ScenarioVerdict;
use crate::monitor::ViolationSummary;
use crate::prioritiser::{format_ratio, format_score};
use crate::workspace::Workspace;

label_enum! {
    pub enum ReportSection ("report section") {
        Goals => "goals",
        GovernanceMapping => "governance mapping",
        Requirements => "requirements",
        PrioritisedScenarios => "prioritised scenarios",
        Coverage => "coverage",
        Tradeoffs => "tradeoffs",
        Risks => "risks",
        Recommendations => "recommendations",
        RuntimeVerdicts => "runtime verdicts",
        Audit => "audit",
    }
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows
            .push(cells.into_iter().map(|c| c.replace(['\n', '\r'], " ")).collect());
    }

    fn render(&self, out: &mut String) {
        if self.rows.is_empty() {
            out.push_str("(none)\n");
            return;
        }
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: Vec<&str>, out: &mut String| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                s.push_str(c);
                s.extend(std::iter::repeat_n(' ', w - c.chars().count()));
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(self.header.clone(), out);
        for r in &self.rows {
            line(r.iter().map(String::as_str).collect(), out);
        }
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(", ")
    }
}

fn heading(out: &mut String, s: ReportSection) {
    out.push_str(&format!("\n== {s} ==\n"));
}

fn current_gaps(ws: &Workspace) -> Option<Result<GapReport, super::AnalysisError>> {
    ws.current_architecture().map(|a| gap_analysis(&ws.scenarios, a))
}

/// Renders the report. Identical inputs give identical bytes. Verdicts and
/// summaries for scenarios outside the workspace are skipped.
pub fn render_report(ws: &Workspace, verdicts: &[ScenarioVerdict], summaries: &[ViolationSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!("arceval report: {}\n", ws.name));
    out.push_str(&format!(
        "architecture: {}\n",
        ws.current_architecture().map_or("-".into(), |a| a.label())
    ));
    out.push_str(&format!("steps: {}\n", join(ws.state.completed())));

    heading(&mut out, ReportSection::Goals);
    let mut t = Table::new(&["id", "clarified", "text"]);
    for g in &ws.goals {
        t.row(vec![
            g.id.clone(),
            if g.clarified { "yes" } else { "no" }.into(),
            g.text.clone(),
        ]);
    }
    t.render(&mut out);

    heading(&mut out, ReportSection::GovernanceMapping);
    let mut t = Table::new(&["tag", "qualities", "requirements", "text"]);
    for g in &ws.governance {
        let reqs = ws
            .requirements
            .iter()
            .filter(|r| r.governance_refs.contains(&g.id) || g.default_qualities.contains(&r.quality))
            .map(|r| r.quality);
        t.row(vec![
            g.id.clone(),
            join(&g.default_qualities),
            join(reqs),
            g.text.clone(),
        ]);
    }
    t.render(&mut out);

    heading(&mut out, ReportSection::Requirements);
    let mut t = Table::new(&["quality", "kind", "governance", "rationale"]);
    for r in &ws.requirements {
        let kind = if r.guardrail { "guardrail" } else { "quality" };
        t.row(vec![
            r.quality.to_string(),
            kind.into(),
            join(&r.governance_refs),
            r.rationale.clone(),
        ]);
    }
    t.render(&mut out);

    heading(&mut out, ReportSection::PrioritisedScenarios);
    let ranking = ws.ranking();
    match &ranking {
        Err(e) => out.push_str(&format!("(error: {e})\n")),
        Ok(ranking) => {
            let mut rows: Vec<_> = ws
                .scenarios
                .iter()
                .map(|s| {
                    let r = ranking.as_ref().and_then(|r| r.get(&s.id));
                    let band = r.map(|r| r.band).or(s.priority);
                    let basis = match (r, s.priority) {
                        (_, Some(_)) => "manual",
                        (Some(_), None) => "computed",
                        (None, None) => "unset",
                    };
                    (
                        band.is_none(),
                        band,
                        r.map(|r| std::cmp::Reverse(r.score)),
                        s.seq,
                        s,
                        basis,
                    )
                })
                .collect();
            rows.sort_by(|a, b| {
                (a.0, a.1, a.2.is_none(), a.2, a.3.is_none(), a.3, &a.4.id).cmp(&(
                    b.0,
                    b.1,
                    b.2.is_none(),
                    b.2,
                    b.3.is_none(),
                    b.3,
                    &b.4.id,
                ))
            });
            let mut t = Table::new(&["rank", "scenario", "quality", "band", "score", "basis"]);
            for (i, (_, band, score, _, s, basis)) in rows.into_iter().enumerate() {
                t.row(vec![
                    (i + 1).to_string(),
                    s.id.clone(),
                    s.quality.to_string(),
                    band.map_or("-".into(), |b| b.to_string()),
                    score.map_or("-".into(), |r| format_score(&r.0)),
                    basis.into(),
                ]);
            }
            t.render(&mut out);
        }
    }

    heading(&mut out, ReportSection::Coverage);
    match current_gaps(ws) {
        None => out.push_str("(no architecture)\n"),
        Some(Err(e)) => out.push_str(&format!("(error: {e})\n")),
        Some(Ok(gaps)) => {
            let mut t = Table::new(&["scenario", "quality", "coverage", "approaches", "justification"]);
            for e in &gaps.entries {
                t.row(vec![
                    e.scenario.clone(),
                    e.quality.to_string(),
                    e.coverage.to_string(),
                    join(&e.supporting),
                    e.justification.clone(),
                ]);
            }
            t.render(&mut out);
        }
    }

    heading(&mut out, ReportSection::Tradeoffs);
    let mut t = Table::new(&["id", "kind", "qualities", "approach", "text"]);
    for x in &ws.analysis.tradeoffs {
        t.row(vec![
            x.id.clone(),
            "tradeoff".into(),
            join(&x.qualities),
            x.approach.clone(),
            x.text.clone(),
        ]);
    }
    for x in &ws.analysis.sensitivities {
        t.row(vec![
            x.id.clone(),
            "sensitivity".into(),
            x.quality.to_string(),
            x.approach.clone(),
            x.text.clone(),
        ]);
    }
    t.render(&mut out);

    heading(&mut out, ReportSection::Risks);
    let mut t = Table::new(&["id", "status", "scenarios", "approaches", "text"]);
    for r in &ws.analysis.risks {
        t.row(vec![
            r.id.clone(),
            r.status.to_string(),
            join(&r.scenarios),
            join(&r.approaches),
            r.text.clone(),
        ]);
    }
    t.render(&mut out);

    heading(&mut out, ReportSection::Recommendations);
    let mut t = Table::new(&["id", "target", "addresses", "text"]);
    for r in &ws.analysis.recommendations {
        t.row(vec![r.id.clone(), r.target.clone(), join(&r.addresses), r.text.clone()]);
    }
    t.render(&mut out);

    heading(&mut out, ReportSection::RuntimeVerdicts);
    let known: BTreeSet<&str> = ws.scenarios.iter().map(|s| s.id.as_str()).collect();
    let mut t = Table::new(&["scenario", "measure", "outcome", "observed", "population"]);
    for sv in verdicts.iter().filter(|v| known.contains(v.scenario.as_str())) {
        for v in &sv.verdicts {
            t.row(vec![
                sv.scenario.clone(),
                v.spec.to_string(),
                v.outcome.to_string(),
                v.observed.map_or("-".into(), |o| o.to_string()),
                v.population.to_string(),
            ]);
        }
    }
    let mut m = Table::new(&[
        "scenario",
        "measure",
        "windows",
        "failed",
        "insufficient",
        "streak",
        "persistent",
    ]);
    for s in summaries.iter().filter(|s| known.contains(s.scenario.as_str())) {
        m.row(vec![
            s.scenario.clone(),
            s.spec.to_string(),
            s.windows_evaluated.to_string(),
            s.windows_failed.to_string(),
            s.windows_insufficient.to_string(),
            s.consecutive_failures.to_string(),
            if s.persistent { "yes" } else { "no" }.into(),
        ]);
    }
    out.push_str("offline:\n");
    t.render(&mut out);
    out.push_str("monitor:\n");
    m.render(&mut out);

    heading(&mut out, ReportSection::Audit);
    let mut t = Table::new(&["scenario", "trigger", "measures", "band", "score"]);
    let opt = |b: Option<String>| b.unwrap_or_else(|| "-".into());
    for a in &ws.analysis.audit {
        t.row(vec![
            a.scenario.clone(),
            a.trigger_ts.to_string(),
            join(&a.measures),
            format!(
                "{} -> {}",
                opt(a.old_band.map(|b| b.to_string())),
                opt(a.new_band.map(|b| b.to_string()))
            ),
            format!(
                "{} -> {}",
                opt(a.old_score.map(|s| format_ratio(&s))),
                opt(a.new_score.map(|s| format_ratio(&s)))
            ),
        ]);
    }
    t.render(&mut out);
    out
}

/// Splits a rendered report into its sections, checking that every
/// heading appears once and in order. Returns each section's body lines.
pub fn parse_report(text: &str) -> Result<Vec<(ReportSection, Vec<&str>)>, String> {
    let mut sections: Vec<(ReportSection, Vec<&str>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(name) = line.strip_prefix("== ").and_then(|l| l.strip_suffix(" ==")) {
            let s: ReportSection = name.parse().map_err(|e| format!("line {}: {e}", n + 1))?;
            let expected = ReportSection::ALL.get(sections.len());
            if expected != Some(&s) {
                return Err(format!("line {}: section {s} out of order", n + 1));
            }
            sections.push((s, Vec::new()));
        } else if let Some((_, body)) = sections.last_mut() {
            if !line.is_empty() {
                body.push(line);
            }
        }
    }
    if sections.len() != ReportSection::ALL.len() {
        return Err(format!(
            "expected {} sections, found {}",
            ReportSection::ALL.len(),
            sections.len()
        ));
    }
    Ok(sections)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    workspace: &'a str,
    architecture: Option<String>,
    coverage: Vec<super::ScenarioCoverage>,
}

/// Coverage table of the current architecture as pretty JSON.
pub fn coverage_sidecar(ws: &Workspace) -> Result<String, super::AnalysisError> {
    let coverage = match current_gaps(ws) {
        Some(g) => g?.entries,
        None => Vec::new(),
    };
    let sidecar = Sidecar {
        workspace: &ws.name,
        architecture: ws.current_architecture().map(|a| a.label()),
        coverage,
    };
    Ok(serde_json::to_string_pretty(&sidecar).expect("sidecar serialises") + "\n")
}
