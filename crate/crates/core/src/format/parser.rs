use std::collections::BTreeSet;
use std::str::FromStr;

use super::lexer::{tokenize, Cursor, Pos, Token, TokenKind};
use super::*;
use crate::catalogue::VocabError;
use crate::measures::{self, MetricName};

/// Parses a document; spans name the file `<input>`.
pub fn parse_document(text: &str) -> Result<Document, ParseError> {
    parse_document_named("<input>", text)
}

pub fn parse_document_named(file: &str, text: &str) -> Result<Document, ParseError> {
    let tokens = tokenize(text).map_err(|e| ParseError {
        span: span(file, e.pos),
        kind: ParseErrorKind::Lexical(e.message),
    })?;
    let mut p = Parser {
        file,
        cur: Cursor::new(&tokens),
        seen: Default::default(),
    };
    p.document()
}

fn span(file: &str, pos: Pos) -> SourceSpan {
    SourceSpan {
        file: file.to_string(),
        line: pos.line,
        column: pos.column,
    }
}

#[derive(Debug, Clone)]
enum Value {
    Str(String),
    Num(f64),
    Label(String),
    Measure(MeasureSpec),
    List(Vec<(Pos, Value)>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Str(_) => "a string",
            Value::Num(_) => "a number",
            Value::Label(_) => "a label",
            Value::Measure(_) => "a measure expression",
            Value::List(_) => "a list",
        }
    }
}

struct Body {
    pos: Pos,
    fields: Vec<(String, Pos, Value)>,
    nested: Vec<Nested>,
}

struct Nested {
    kind: String,
    name: String,
    pos: Pos,
    body: Body,
}

struct Parser<'a, 't> {
    file: &'a str,
    cur: Cursor<'t>,
    seen: BTreeSet<(&'static str, String)>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a, 't> Parser<'a, 't> {
    fn err<T>(&self, pos: Pos, kind: ParseErrorKind) -> PResult<T> {
        Err(ParseError {
            span: span(self.file, pos),
            kind,
        })
    }

    fn syntax<T>(&self, pos: Pos, msg: impl Into<String>) -> PResult<T> {
        self.err(pos, ParseErrorKind::Syntax(msg.into()))
    }

    fn unexpected<T>(&self, t: &Token, wanted: &str) -> PResult<T> {
        self.syntax(t.pos, format!("expected {wanted}, found {}", t.kind.describe()))
    }

    fn document(&mut self) -> PResult<Document> {
        let mut doc = Document::default();
        loop {
            self.cur.skip_newlines();
            let t = self.cur.next();
            let kind = match &t.kind {
                TokenKind::Eof => return Ok(doc),
                TokenKind::Ident(k) => k.as_str(),
                _ => return self.unexpected(t, "a block kind"),
            };
            let name_tok = self.cur.next();
            let TokenKind::Str(name) = &name_tok.kind else {
                if !matches!(
                    kind,
                    "scenario" | "architecture" | "governance" | "priorities" | "general"
                ) {
                    return self.err(t.pos, ParseErrorKind::UnknownBlock(kind.to_string()));
                }
                return self.unexpected(name_tok, "a quoted block name");
            };
            let (block, dup_kind, key) = match kind {
                "scenario" => {
                    let body = self.body(t.pos, SCENARIO_FIELDS, "scenario", false)?;
                    let s = self.scenario(name, name_tok.pos, body)?;
                    (Block::Scenario(s), "scenario", name.clone())
                }
                "architecture" => {
                    let body = self.body(t.pos, &["version"], "architecture", true)?;
                    let a = self.architecture(name, body)?;
                    let key = a.label();
                    (Block::Architecture(a), "architecture revision", key)
                }
                "governance" => {
                    let body = self.body(t.pos, &["text", "qualities"], "governance", false)?;
                    let g = self.governance(name, name_tok.pos, body)?;
                    (Block::Governance(g), "governance tag", name.clone())
                }
                "priorities" => {
                    let body = self.body(t.pos, &["scores"], "priorities", false)?;
                    let p = self.priorities(name, body)?;
                    (Block::Priorities(p), "priorities stakeholder", name.clone())
                }
                "general" => {
                    let quality = QualityAttribute::from_str(name).or_else(|e| self.err(name_tok.pos, e.into()))?;
                    let body = self.body(t.pos, GENERAL_FIELDS, "general", false)?;
                    let g = self.general(quality, body)?;
                    (Block::General(g), "general scenario", name.clone())
                }
                other => return self.err(t.pos, ParseErrorKind::UnknownBlock(other.to_string())),
            };
            if !self.seen.insert((dup_kind, key.clone())) {
                return self.err(
                    name_tok.pos,
                    ParseErrorKind::DuplicateId {
                        kind: dup_kind,
                        id: key,
                    },
                );
            }
            doc.blocks.push(block);
            doc.spans.push(span(self.file, t.pos));
        }
    }

    /// `{ field* }` with the opening brace next. Field names outside
    /// `allowed` are rejected; `nested` admits `component`/`approach` blocks.
    fn body(&mut self, pos: Pos, allowed: &[&'static str], block: &'static str, nested: bool) -> PResult<Body> {
        let open = self.cur.next();
        if open.kind != TokenKind::LBrace {
            return self.unexpected(open, "`{`");
        }
        let mut body = Body {
            pos,
            fields: Vec::new(),
            nested: Vec::new(),
        };
        loop {
            self.cur.skip_newlines();
            let t = self.cur.next();
            let name = match &t.kind {
                TokenKind::RBrace => return Ok(body),
                TokenKind::Ident(n) => n,
                _ => return self.unexpected(t, "a field name or `}`"),
            };
            if nested && matches!(name.as_str(), "component" | "approach") {
                if let TokenKind::Str(child) = &self.cur.peek().kind {
                    self.cur.next();
                    let (fields, label): (&[&'static str], &'static str) = if name == "component" {
                        (&["artefact", "description"], "component")
                    } else {
                        (
                            &["kind", "components", "supports", "coverage", "description"],
                            "approach",
                        )
                    };
                    let child_body = self.body(t.pos, fields, label, false)?;
                    body.nested.push(Nested {
                        kind: name.clone(),
                        name: child.clone(),
                        pos: t.pos,
                        body: child_body,
                    });
                    self.end_of_field()?;
                    continue;
                }
            }
            if !allowed.contains(&name.as_str()) {
                return self.err(
                    t.pos,
                    ParseErrorKind::UnknownField {
                        block,
                        field: name.clone(),
                    },
                );
            }
            if body.fields.iter().any(|(n, _, _)| n == name) {
                return self.err(t.pos, ParseErrorKind::DuplicateField(name.clone()));
            }
            let colon = self.cur.next();
            if colon.kind != TokenKind::Colon {
                return self.unexpected(colon, "`:`");
            }
            let vpos = self.cur.peek().pos;
            let value = self.value()?;
            body.fields.push((name.clone(), vpos, value));
            self.end_of_field()?;
        }
    }

    fn end_of_field(&mut self) -> PResult<()> {
        let t = self.cur.peek();
        match t.kind {
            TokenKind::Newline => {
                self.cur.next();
                Ok(())
            }
            TokenKind::RBrace => Ok(()),
            _ => self.unexpected(t, "end of line"),
        }
    }

    fn value(&mut self) -> PResult<Value> {
        let t = self.cur.peek();
        match &t.kind {
            TokenKind::Str(s) => {
                self.cur.next();
                Ok(Value::Str(s.clone()))
            }
            TokenKind::Number(n) => {
                self.cur.next();
                Ok(Value::Num(*n))
            }
            TokenKind::Ident(s) => {
                if self.cur.peek_nth(1).kind == TokenKind::LParen {
                    measures::parse_measure_tokens(&mut self.cur)
                        .map(Value::Measure)
                        .or_else(|e| self.err(e.pos, ParseErrorKind::Measure(e.kind)))
                } else {
                    self.cur.next();
                    Ok(Value::Label(s.clone()))
                }
            }
            TokenKind::LBracket => {
                self.cur.next();
                let mut items = Vec::new();
                if self.cur.eat(&TokenKind::RBracket) {
                    return Ok(Value::List(items));
                }
                loop {
                    let pos = self.cur.peek().pos;
                    if self.cur.peek().kind == TokenKind::RBracket {
                        return self.syntax(pos, "trailing comma in list");
                    }
                    items.push((pos, self.value()?));
                    let sep = self.cur.next();
                    match sep.kind {
                        TokenKind::Comma => continue,
                        TokenKind::RBracket => return Ok(Value::List(items)),
                        _ => return self.unexpected(sep, "`,` or `]`"),
                    }
                }
            }
            _ => self.unexpected(t, "a value"),
        }
    }

    fn take(&self, body: &mut Body, name: &str) -> Option<(Pos, Value)> {
        let idx = body.fields.iter().position(|(n, _, _)| n == name)?;
        let (_, pos, v) = body.fields.remove(idx);
        Some((pos, v))
    }

    fn require(&self, body: &mut Body, name: &'static str) -> PResult<(Pos, Value)> {
        match self.take(body, name) {
            Some(v) => Ok(v),
            None => self.err(body.pos, ParseErrorKind::MissingField(name)),
        }
    }

    fn mismatch<T>(&self, pos: Pos, wanted: &str, v: &Value) -> PResult<T> {
        self.syntax(pos, format!("expected {wanted}, found {}", v.describe()))
    }

    fn string(&self, (pos, v): (Pos, Value)) -> PResult<String> {
        match v {
            Value::Str(s) => Ok(s),
            other => self.mismatch(pos, "a string", &other),
        }
    }

    fn label<T: FromStr<Err = VocabError>>(&self, (pos, v): (Pos, Value)) -> PResult<T> {
        match v {
            Value::Label(s) => s.parse().or_else(|e: VocabError| self.err(pos, e.into())),
            other => self.mismatch(pos, "a label", &other),
        }
    }

    fn list(&self, (pos, v): (Pos, Value)) -> PResult<Vec<(Pos, Value)>> {
        match v {
            Value::List(items) => Ok(items),
            other => self.mismatch(pos, "a list", &other),
        }
    }

    fn labels<T: FromStr<Err = VocabError>>(&self, v: (Pos, Value)) -> PResult<Vec<T>> {
        self.list(v)?.into_iter().map(|item| self.label(item)).collect()
    }

    fn strings(&self, v: (Pos, Value)) -> PResult<Vec<String>> {
        self.list(v)?.into_iter().map(|item| self.string(item)).collect()
    }

    fn integer(&self, (pos, v): (Pos, Value), lo: u32, hi: u32) -> PResult<u32> {
        match v {
            Value::Num(n) if n.fract() == 0.0 && n >= lo as f64 && n <= hi as f64 => Ok(n as u32),
            Value::Num(n) => self.err(
                pos,
                ParseErrorKind::Invalid(format!("expected an integer in {lo}..={hi}, found {n}")),
            ),
            other => self.mismatch(pos, "an integer", &other),
        }
    }

    fn non_empty_id(&self, id: &str, pos: Pos) -> PResult<()> {
        if id.trim().is_empty() {
            return self.err(pos, ParseErrorKind::Invalid("block name must not be empty".into()));
        }
        Ok(())
    }

    fn scenario(&self, id: &str, id_pos: Pos, mut body: Body) -> PResult<ContextScenario> {
        self.non_empty_id(id, id_pos)?;
        let seq = match self.take(&mut body, "seq") {
            Some(v) => Some(self.integer(v, 1, u32::MAX)?),
            None => None,
        };
        let quality = self.label(self.require(&mut body, "quality")?)?;
        let priority = match self.take(&mut body, "priority") {
            Some((_, Value::Label(l))) if l == "unset" => None,
            Some(v) => Some(self.label::<Band>(v)?),
            None => None,
        };
        let source = self.string(self.require(&mut body, "source")?)?;
        let stimulus = self.string(self.require(&mut body, "stimulus")?)?;
        let environment = self.string(self.require(&mut body, "environment")?)?;
        let artefacts_v = self.require(&mut body, "artefacts")?;
        let artefacts_pos = artefacts_v.0;
        let artefacts: Vec<ArtefactRef> = self.labels(artefacts_v)?;
        if artefacts.is_empty() {
            return self.err(
                artefacts_pos,
                ParseErrorKind::Invalid("artefacts must not be empty".into()),
            );
        }
        let response = self.string(self.require(&mut body, "response")?)?;
        let measures = match self.take(&mut body, "measures") {
            Some(v) => self
                .list(v)?
                .into_iter()
                .map(|(pos, v)| match v {
                    Value::Measure(m) => Ok(m),
                    other => self.mismatch(pos, "a measure expression", &other),
                })
                .collect::<PResult<Vec<_>>>()?,
            None => Vec::new(),
        };
        let external_assessments = match self.take(&mut body, "assessments") {
            Some(v) => self
                .list(v)?
                .into_iter()
                .map(|item| self.assessment(item))
                .collect::<PResult<Vec<_>>>()?,
            None => Vec::new(),
        };
        Ok(ContextScenario {
            id: id.to_string(),
            seq,
            quality,
            priority,
            source,
            stimulus,
            environment,
            artefacts,
            response,
            measures,
            external_assessments,
        })
    }

    fn assessment(&self, item: (Pos, Value)) -> PResult<ExternalAssessment> {
        let pos = item.0;
        let parts = self.list(item)?;
        let [name, verdict, note]: [(Pos, Value); 3] = parts.try_into().or_else(|_| {
            self.err(
                pos,
                ParseErrorKind::Invalid("an assessment is [\"name\", pass|fail, \"note\"]".into()),
            )
        })?;
        let name_pos = name.0;
        let name = self.string(name)?;
        if measures::Tag::new(&name).is_none() {
            return self.err(
                name_pos,
                ParseErrorKind::Invalid(format!("assessment name `{name}` must be a lowercase label")),
            );
        }
        let pass = match verdict {
            (_, Value::Label(l)) if l == "pass" => true,
            (_, Value::Label(l)) if l == "fail" => false,
            (p, other) => return self.mismatch(p, "`pass` or `fail`", &other),
        };
        Ok(ExternalAssessment {
            name,
            pass,
            note: self.string(note)?,
        })
    }

    fn architecture(&self, name: &str, mut body: Body) -> PResult<ArchitectureModel> {
        let version_label = match self.take(&mut body, "version") {
            Some(v) => self.string(v)?,
            None => String::new(),
        };
        let mut components: Vec<Component> = Vec::new();
        let mut approaches: Vec<ArchApproach> = Vec::new();
        let mut approach_pos = Vec::new();
        for nested in std::mem::take(&mut body.nested) {
            let Nested {
                kind,
                name: id,
                pos,
                body: mut inner,
            } = nested;
            self.non_empty_id(&id, pos)?;
            if kind == "component" {
                if components.iter().any(|c| c.id == id) {
                    return self.err(pos, ParseErrorKind::DuplicateId { kind: "component", id });
                }
                let artefact = self.label(self.require(&mut inner, "artefact")?)?;
                let description = match self.take(&mut inner, "description") {
                    Some(v) => self.string(v)?,
                    None => String::new(),
                };
                components.push(Component {
                    id,
                    artefact,
                    description,
                });
            } else {
                if approaches.iter().any(|a| a.id == id) {
                    return self.err(pos, ParseErrorKind::DuplicateId { kind: "approach", id });
                }
                let kind = self.label(self.require(&mut inner, "kind")?)?;
                let comps_v = self.require(&mut inner, "components")?;
                let comps_pos = comps_v.0;
                let comps = self.strings(comps_v)?;
                if comps.is_empty() {
                    return self.err(
                        comps_pos,
                        ParseErrorKind::Invalid("an approach needs at least one component".into()),
                    );
                }
                let supports = match self.take(&mut inner, "supports") {
                    Some(v) => self
                        .list(v)?
                        .into_iter()
                        .map(|(p, v)| match v {
                            Value::Str(s) => Ok(SupportTarget::Scenario(s)),
                            Value::Label(_) => Ok(SupportTarget::Quality(self.label((p, v))?)),
                            other => self.mismatch(p, "a scenario id or quality label", &other),
                        })
                        .collect::<PResult<Vec<_>>>()?,
                    None => Vec::new(),
                };
                let coverage = self.label(self.require(&mut inner, "coverage")?)?;
                let description = match self.take(&mut inner, "description") {
                    Some(v) => self.string(v)?,
                    None => String::new(),
                };
                approaches.push(ArchApproach {
                    id,
                    kind,
                    components: comps,
                    supports,
                    coverage,
                    description,
                });
                approach_pos.push(pos);
            }
        }
        // Components may be declared after the approaches that use them.
        for (a, pos) in approaches.iter().zip(approach_pos) {
            for c in &a.components {
                if !components.iter().any(|k| &k.id == c) {
                    return self.err(
                        pos,
                        ParseErrorKind::Invalid(format!("approach `{}` references unknown component `{c}`", a.id)),
                    );
                }
            }
        }
        Ok(ArchitectureModel {
            name: name.to_string(),
            version_label,
            components,
            approaches,
        })
    }

    fn governance(&self, id: &str, id_pos: Pos, mut body: Body) -> PResult<GovernanceTag> {
        self.non_empty_id(id, id_pos)?;
        let text = self.string(self.require(&mut body, "text")?)?;
        let default_qualities = match self.take(&mut body, "qualities") {
            Some(v) => self.labels(v)?,
            None => Vec::new(),
        };
        Ok(GovernanceTag {
            id: id.to_string(),
            text,
            default_qualities,
        })
    }

    fn priorities(&self, stakeholder: &str, mut body: Body) -> PResult<PriorityBlock> {
        let rows = self.list(self.require(&mut body, "scores")?)?;
        let mut scores = Vec::with_capacity(rows.len());
        for row in rows {
            let pos = row.0;
            let parts = self.list(row)?;
            let [scenario, impact, risk, relevance]: [(Pos, Value); 4] = parts.try_into().or_else(|_| {
                self.err(
                    pos,
                    ParseErrorKind::Invalid("a score row is [\"scenario\", impact, risk, relevance]".into()),
                )
            })?;
            let scenario = self.string(scenario)?;
            if scores.iter().any(|s: &PriorityScore| s.scenario == scenario) {
                return self.err(
                    pos,
                    ParseErrorKind::DuplicateId {
                        kind: "score row",
                        id: scenario,
                    },
                );
            }
            scores.push(PriorityScore {
                scenario,
                impact: self.integer(impact, 1, 5)? as u8,
                risk: self.integer(risk, 1, 5)? as u8,
                relevance: self.integer(relevance, 1, 5)? as u8,
            });
        }
        Ok(PriorityBlock {
            stakeholder: stakeholder.to_string(),
            scores,
        })
    }

    fn general(&self, quality: QualityAttribute, mut body: Body) -> PResult<GeneralScenario> {
        let source_template = self.string(self.require(&mut body, "source")?)?;
        let stimulus_template = self.string(self.require(&mut body, "stimulus")?)?;
        let environment_template = self.string(self.require(&mut body, "environment")?)?;
        let artefacts = self.labels(self.require(&mut body, "artefacts")?)?;
        let response_template = self.string(self.require(&mut body, "response")?)?;
        let measure_templates = match self.take(&mut body, "measures") {
            Some(v) => self.strings(v)?,
            None => Vec::new(),
        };
        let suggested_metrics: Vec<MetricName> = match self.take(&mut body, "metrics") {
            Some(v) => self.labels(v)?,
            None => Vec::new(),
        };
        Ok(GeneralScenario {
            quality,
            source_template,
            stimulus_template,
            environment_template,
            artefacts,
            response_template,
            measure_templates,
            suggested_metrics,
        })
    }
}

const SCENARIO_FIELDS: &[&str] = &[
    "seq",
    "quality",
    "priority",
    "source",
    "stimulus",
    "environment",
    "artefacts",
    "response",
    "measures",
    "assessments",
];

const GENERAL_FIELDS: &[&str] = &[
    "source",
    "stimulus",
    "environment",
    "artefacts",
    "response",
    "measures",
    "metrics",
];
