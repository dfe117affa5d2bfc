//! Scenario ranking from stakeholder scores, and risk-driven re-ranking.
//!
//! Scores are exact rationals, so ranks and bands never depend on floating
//! point rounding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

label_enum! {
    /// Priority band.
    pub enum Band ("priority band") {
        High => "high",
        Medium => "medium",
        Low => "low",
    }
}

pub type Score = Ratio<i64>;

/// One stakeholder's 1–5 scores for one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityInput {
    pub scenario: String,
    pub stakeholder: String,
    pub impact: u8,
    pub risk: u8,
    pub relevance: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weights {
    #[serde(with = "ratio_text")]
    pub impact: Score,
    #[serde(with = "ratio_text")]
    pub risk: Score,
    #[serde(with = "ratio_text")]
    pub relevance: Score,
}

impl Weights {
    pub fn new(impact: i64, risk: i64, relevance: i64) -> Self {
        Weights {
            impact: Score::from_integer(impact),
            risk: Score::from_integer(risk),
            relevance: Score::from_integer(relevance),
        }
    }

    pub fn equal() -> Self {
        Weights::new(1, 1, 1)
    }

    pub fn scaled(self, c: Score) -> Self {
        Weights {
            impact: self.impact * c,
            risk: self.risk * c,
            relevance: self.relevance * c,
        }
    }

    fn validate(&self) -> Result<(), PriorityError> {
        let zero = Score::from_integer(0);
        if [self.impact, self.risk, self.relevance].iter().any(|w| *w < zero) {
            return Err(PriorityError::NegativeWeight);
        }
        if self.impact + self.risk + self.relevance == zero {
            return Err(PriorityError::ZeroWeights);
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::equal()
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.impact, self.risk, self.relevance)
    }
}

impl FromStr for Weights {
    type Err = PriorityError;

    /// `impact,risk,relevance`, each a decimal or `n/d` fraction.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<_> = s.split(',').map(str::trim).collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(PriorityError::BadNumber(s.to_string()));
        };
        let w = Weights {
            impact: parse_ratio(a)?,
            risk: parse_ratio(b)?,
            relevance: parse_ratio(c)?,
        };
        w.validate()?;
        Ok(w)
    }
}

/// Band cut-offs: `score >= high` is high, `score >= medium` is medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoffs {
    #[serde(with = "ratio_text")]
    pub high: Score,
    #[serde(with = "ratio_text")]
    pub medium: Score,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs {
            high: Score::from_integer(4),
            medium: Score::new(5, 2),
        }
    }
}

impl Cutoffs {
    pub fn band(&self, score: Score) -> Band {
        if score >= self.high {
            Band::High
        } else if score >= self.medium {
            Band::Medium
        } else {
            Band::Low
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityResult {
    pub scenario: String,
    #[serde(with = "ratio_text")]
    pub impact: Score,
    #[serde(with = "ratio_text")]
    pub risk: Score,
    #[serde(with = "ratio_text")]
    pub relevance: Score,
    #[serde(with = "ratio_text")]
    pub score: Score,
    /// Effective band: the manual band when one is set, else the computed one.
    pub band: Band,
    pub computed_band: Band,
    pub manual: bool,
    pub rank: u32,
}

/// Ranked results together with the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ranking {
    pub weights: Weights,
    pub cutoffs: Cutoffs,
    pub results: Vec<PriorityResult>,
}

impl Ranking {
    pub fn get(&self, scenario: &str) -> Option<&PriorityResult> {
        self.results.iter().find(|r| r.scenario == scenario)
    }

    pub fn band_of(&self, scenario: &str) -> Option<Band> {
        self.get(scenario).map(|r| r.band)
    }
}

/// Runtime evidence for one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioViolation {
    pub scenario: String,
    pub persistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriorityError {
    #[error("scenario `{0}` has no priority inputs")]
    NoInputs(String),
    #[error("priority weights must not all be zero")]
    ZeroWeights,
    #[error("priority weights must not be negative")]
    NegativeWeight,
    #[error("{field} score {value} for `{scenario}` from `{stakeholder}` is outside 1-5")]
    ScoreOutOfRange {
        scenario: String,
        stakeholder: String,
        field: &'static str,
        value: u8,
    },
    #[error("duplicate priority input for `{scenario}` from `{stakeholder}`")]
    DuplicateInput { scenario: String, stakeholder: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("band cut-offs must satisfy medium <= high")]
    BadCutoffs,
    #[error("invalid number `{0}`")]
    BadNumber(String),
}

/// Ranks every scenario that has inputs, with default cut-offs and no
/// manual bands.
pub fn prioritise(inputs: &[PriorityInput], weights: &Weights) -> Result<Vec<PriorityResult>, PriorityError> {
    let ids: BTreeSet<&str> = inputs.iter().map(|i| i.scenario.as_str()).collect();
    let ids: Vec<String> = ids.into_iter().map(String::from).collect();
    Ok(prioritise_scenarios(&ids, inputs, weights, &Cutoffs::default(), &BTreeMap::new())?.results)
}

/// Ranks `scenarios`. Each needs at least one input; inputs for ids outside
/// `scenarios` are rejected. `manual` bands shadow computed ones.
pub fn prioritise_scenarios(
    scenarios: &[String],
    inputs: &[PriorityInput],
    weights: &Weights,
    cutoffs: &Cutoffs,
    manual: &BTreeMap<String, Band>,
) -> Result<Ranking, PriorityError> {
    weights.validate()?;
    if cutoffs.medium > cutoffs.high {
        return Err(PriorityError::BadCutoffs);
    }
    let known: BTreeSet<&str> = scenarios.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    let mut grouped: BTreeMap<&str, Vec<&PriorityInput>> = BTreeMap::new();
    for input in inputs {
        if !known.contains(input.scenario.as_str()) {
            return Err(PriorityError::UnknownScenario(input.scenario.clone()));
        }
        for (field, value) in [
            ("impact", input.impact),
            ("risk", input.risk),
            ("relevance", input.relevance),
        ] {
            if !(1..=5).contains(&value) {
                return Err(PriorityError::ScoreOutOfRange {
                    scenario: input.scenario.clone(),
                    stakeholder: input.stakeholder.clone(),
                    field,
                    value,
                });
            }
        }
        if !seen.insert((input.scenario.as_str(), input.stakeholder.as_str())) {
            return Err(PriorityError::DuplicateInput {
                scenario: input.scenario.clone(),
                stakeholder: input.stakeholder.clone(),
            });
        }
        grouped.entry(input.scenario.as_str()).or_default().push(input);
    }

    let mut results = Vec::with_capacity(scenarios.len());
    for id in scenarios {
        let group = grouped
            .get(id.as_str())
            .ok_or_else(|| PriorityError::NoInputs(id.clone()))?;
        let n = group.len() as i64;
        let mean = |f: fn(&PriorityInput) -> u8| Score::new(group.iter().map(|i| i64::from(f(i))).sum(), n);
        results.push(PriorityResult {
            scenario: id.clone(),
            impact: mean(|i| i.impact),
            risk: mean(|i| i.risk),
            relevance: mean(|i| i.relevance),
            score: Score::from_integer(0),
            band: Band::Low,
            computed_band: Band::Low,
            manual: false,
            rank: 0,
        });
    }
    let mut ranking = Ranking {
        weights: *weights,
        cutoffs: *cutoffs,
        results,
    };
    for r in &mut ranking.results {
        r.manual = manual.contains_key(&r.scenario);
        if let Some(b) = manual.get(&r.scenario) {
            r.band = *b;
        }
    }
    rescore(&mut ranking);
    Ok(ranking)
}

/// Raises the risk component to 5 for every scenario with a persistent
/// violation, then rescores and re-ranks. Manual bands stay in force.
pub fn reprioritise(ranking: &Ranking, violations: &[ScenarioViolation]) -> Result<Ranking, PriorityError> {
    let mut next = ranking.clone();
    for v in violations {
        let r = next
            .results
            .iter_mut()
            .find(|r| r.scenario == v.scenario)
            .ok_or_else(|| PriorityError::UnknownScenario(v.scenario.clone()))?;
        if v.persistent {
            r.risk = Score::from_integer(5);
        }
    }
    rescore(&mut next);
    Ok(next)
}

fn rescore(ranking: &mut Ranking) {
    let w = ranking.weights;
    let total = w.impact + w.risk + w.relevance;
    for r in &mut ranking.results {
        r.score = (w.impact * r.impact + w.risk * r.risk + w.relevance * r.relevance) / total;
        r.computed_band = ranking.cutoffs.band(r.score);
        if !r.manual {
            r.band = r.computed_band;
        }
    }
    ranking
        .results
        .sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.scenario.cmp(&b.scenario)));
    for (i, r) in ranking.results.iter_mut().enumerate() {
        r.rank = i as u32 + 1;
    }
}

/// Parses `n`, `n.d` or `n/d` into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Score, PriorityError> {
    let bad = || PriorityError::BadNumber(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Score::new(n, d));
    }
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty()
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 12
    {
        return Err(bad());
    }
    let denom = 10i64.pow(frac.len() as u32);
    let numer: i64 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let r = Score::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// Renders an exact rational as `n` or `n/d`.
pub fn format_ratio(r: &Score) -> String {
    r.to_string()
}

/// Decimal rendering for reports, rounded to two places.
pub fn format_score(r: &Score) -> String {
    let hundredths = (*r * 100).round().to_integer();
    format!("{}.{:02}", hundredths / 100, (hundredths % 100).abs())
}

/// Serde adapter storing a rational as `"n/d"` text.
pub mod ratio_text {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Score, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Score, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(r: &Option<Score>, s: S) -> Result<S::Ok, S::Error> {
            match r {
                Some(r) => s.serialize_some(&format_ratio(r)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Score>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| parse_ratio(&s).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}
