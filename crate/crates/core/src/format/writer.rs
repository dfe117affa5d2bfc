use std::fmt::Write;

use super::*;

/// Canonical text: blocks in order separated by blank lines, fields in a
/// fixed order, two-space indentation, empty optional fields omitted.
pub fn serialize(doc: &Document) -> String {
    let mut out = String::new();
    for (i, block) in doc.blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&serialize_block(block));
    }
    out
}

pub fn serialize_block(block: &Block) -> String {
    let mut w = Writer::default();
    match block {
        Block::Scenario(s) => w.scenario(s),
        Block::Architecture(a) => w.architecture(a),
        Block::Governance(g) => w.governance(g),
        Block::Priorities(p) => w.priorities(p),
        Block::General(g) => w.general(g),
    }
    w.out
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    let parts: Vec<String> = items.iter().map(f).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Default)]
struct Writer {
    out: String,
    depth: usize,
}

impl Writer {
    fn open(&mut self, kind: &str, name: &str) {
        self.indent();
        let _ = writeln!(self.out, "{kind} {} {{", quote(name));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.indent();
        self.out.push_str("}\n");
    }

    fn indent(&mut self) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
    }

    fn field(&mut self, name: &str, value: impl AsRef<str>) {
        self.indent();
        let _ = writeln!(self.out, "{name}: {}", value.as_ref());
    }

    fn scenario(&mut self, s: &ContextScenario) {
        self.open("scenario", &s.id);
        if let Some(seq) = s.seq {
            self.field("seq", seq.to_string());
        }
        self.field("quality", s.quality.as_str());
        if let Some(p) = s.priority {
            self.field("priority", p.as_str());
        }
        self.field("source", quote(&s.source));
        self.field("stimulus", quote(&s.stimulus));
        self.field("environment", quote(&s.environment));
        self.field("artefacts", list(&s.artefacts, |a| a.to_string()));
        self.field("response", quote(&s.response));
        if !s.measures.is_empty() {
            self.field("measures", list(&s.measures, |m| m.to_string()));
        }
        if !s.external_assessments.is_empty() {
            self.field(
                "assessments",
                list(&s.external_assessments, |a| {
                    format!(
                        "[{}, {}, {}]",
                        quote(&a.name),
                        if a.pass { "pass" } else { "fail" },
                        quote(&a.note)
                    )
                }),
            );
        }
        self.close();
    }

    fn architecture(&mut self, a: &ArchitectureModel) {
        self.open("architecture", &a.name);
        if !a.version_label.is_empty() {
            self.field("version", quote(&a.version_label));
        }
        for c in &a.components {
            self.open("component", &c.id);
            self.field("artefact", c.artefact.as_str());
            if !c.description.is_empty() {
                self.field("description", quote(&c.description));
            }
            self.close();
        }
        for ap in &a.approaches {
            self.open("approach", &ap.id);
            self.field("kind", ap.kind.as_str());
            self.field("components", list(&ap.components, |c| quote(c)));
            if !ap.supports.is_empty() {
                self.field(
                    "supports",
                    list(&ap.supports, |s| match s {
                        SupportTarget::Scenario(id) => quote(id),
                        SupportTarget::Quality(q) => q.to_string(),
                    }),
                );
            }
            self.field("coverage", ap.coverage.as_str());
            if !ap.description.is_empty() {
                self.field("description", quote(&ap.description));
            }
            self.close();
        }
        self.close();
    }

    fn governance(&mut self, g: &GovernanceTag) {
        self.open("governance", &g.id);
        self.field("text", quote(&g.text));
        if !g.default_qualities.is_empty() {
            self.field("qualities", list(&g.default_qualities, |q| q.to_string()));
        }
        self.close();
    }

    fn priorities(&mut self, p: &PriorityBlock) {
        self.open("priorities", &p.stakeholder);
        self.field(
            "scores",
            list(&p.scores, |s| {
                format!("[{}, {}, {}, {}]", quote(&s.scenario), s.impact, s.risk, s.relevance)
            }),
        );
        self.close();
    }

    fn general(&mut self, g: &GeneralScenario) {
        self.open("general", g.quality.as_str());
        self.field("source", quote(&g.source_template));
        self.field("stimulus", quote(&g.stimulus_template));
        self.field("environment", quote(&g.environment_template));
        self.field("artefacts", list(&g.artefacts, |a| a.to_string()));
        self.field("response", quote(&g.response_template));
        if !g.measure_templates.is_empty() {
            self.field("measures", list(&g.measure_templates, |m| quote(m)));
        }
        if !g.suggested_metrics.is_empty() {
            self.field("metrics", list(&g.suggested_metrics, |m| m.to_string()));
        }
        self.close();
    }
}
