//! Deterministic construction of long/short-term decomposed, breath-marked
//! prompts and the baseline prompts they are compared against.
//!
//! All wording lives in a template asset (`assets/prompt_template.txt`) so
//! it can be revised without code changes; rendering substitutes named
//! placeholders and is byte-deterministic given a [`PromptSpec`].

use crate::series::{Frequency, HorizonPartition};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;
use thiserror::Error;

const DEFAULT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("unknown frequency label")]
    UnknownFrequency,
    #[error("malformed template: {0}")]
    MalformedTemplate(String),
}

/// Prompting strategy axis: the full long/short-term prompt, its two
/// ablations, and the two baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// History plus a bare continuation cue; no instructions.
    Naive,
    /// Generic "work step by step" prompt.
    Cot,
    /// Full prompt: decomposition and breath sections.
    LongShort,
    /// Breath only, decomposition removed.
    LongShortNoDecomp,
    /// Decomposition only, breath removed.
    LongShortNoBreath,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Naive,
        Strategy::Cot,
        Strategy::LongShort,
        Strategy::LongShortNoDecomp,
        Strategy::LongShortNoBreath,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Cot => "cot",
            Strategy::LongShort => "long-short",
            Strategy::LongShortNoDecomp => "long-short-no-decomp",
            Strategy::LongShortNoBreath => "long-short-no-breath",
        }
    }

    pub fn uses_breath(&self) -> bool {
        matches!(self, Strategy::LongShort | Strategy::LongShortNoDecomp)
    }

    pub fn uses_decomposition(&self) -> bool {
        matches!(self, Strategy::LongShort | Strategy::LongShortNoBreath)
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, Strategy::Naive | Strategy::Cot)
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "naive" | "base" => Ok(Strategy::Naive),
            "cot" => Ok(Strategy::Cot),
            "long-short" | "full" => Ok(Strategy::LongShort),
            "long-short-no-decomp" | "no-decomp" => Ok(Strategy::LongShortNoDecomp),
            "long-short-no-breath" | "no-breath" => Ok(Strategy::LongShortNoBreath),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dataset framing injected into the context section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetContext {
    pub dataset_name: String,
    /// e.g. "weekly influenza-like-illness patient counts"
    pub domain_description: String,
    pub frequency: Frequency,
    /// e.g. "week" for daily data
    pub upper_time_scale: String,
}

/// How the breath instruction is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreathStyle {
    /// One instruction sentence, O(1) in the horizon.
    #[default]
    Instruction,
    /// Enumerates the explicit pause steps (k, 2k, ...).
    InlineSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptOptions {
    #[serde(default)]
    pub breath_style: BreathStyle,
    /// Ask the model to choose its own short/long split instead of
    /// embedding the declared partition sizes.
    #[serde(default)]
    pub model_chooses_partition: bool,
}

/// Declarative description of one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub strategy: Strategy,
    pub context: DatasetContext,
    /// Codec-encoded reference window.
    pub history_text: String,
    pub horizon: usize,
    pub partition: HorizonPartition,
    pub breath_k: usize,
    /// Separator the output contract tells the model to use; should match
    /// the codec separator so completions decode cleanly.
    pub output_separator: String,
    #[serde(default)]
    pub options: PromptOptions,
}

/// Named prompt sections, in render order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Context,
    Decomposition,
    Breath,
    History,
    OutputContract,
}

/// A rendered prompt with byte ranges for each section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub section_offsets: Vec<(Section, Range<usize>)>,
    /// Number of output values the prompt asks for. Carried structurally
    /// because the naive baseline has no contract sentence to parse.
    pub requested_count: usize,
}

impl PromptText {
    pub fn section(&self, section: Section) -> Option<&str> {
        self.section_offsets
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, range)| &self.text[range.clone()])
    }
}

/// Breath frequency aligned with the next-larger time scale of the data:
/// daily data breathes weekly (5 trading days), weekly data monthly, and
/// so on.
pub fn default_breath_k(frequency: Frequency) -> usize {
    match frequency {
        Frequency::Minute => 60,
        Frequency::Hour => 24,
        Frequency::Day => 5,
        Frequency::Week => 4,
        Frequency::Month => 12,
        Frequency::Season => 4,
    }
}

/// Parsed section template keyed by name.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    sections: BTreeMap<String, String>,
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if let Some(name) = trimmed
                .strip_prefix("[[")
                .and_then(|rest| rest.strip_suffix("]]"))
            {
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
                continue;
            }
            match &current {
                Some(name) => {
                    let body = sections.get_mut(name).expect("section exists");
                    if !body.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(line);
                }
                None => {
                    if !trimmed.is_empty() && !trimmed.starts_with('#') {
                        return Err(PromptError::MalformedTemplate(format!(
                            "content before first [[section]]: {trimmed:?}"
                        )));
                    }
                }
            }
        }
        for required in [
            "context",
            "decomposition",
            "decomposition_free",
            "breath",
            "breath_inline",
            "cot",
            "history",
            "contract",
        ] {
            if !sections.contains_key(required) {
                return Err(PromptError::MalformedTemplate(format!(
                    "missing section [[{required}]]"
                )));
            }
        }
        // Trim trailing blank lines left by section spacing in the file.
        for body in sections.values_mut() {
            while body.ends_with('\n') {
                body.pop();
            }
        }
        Ok(Self { sections })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::MalformedTemplate(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn section(&self, name: &str) -> &str {
        self.sections.get(name).map(String::as_str).unwrap_or("")
    }

    fn fill(&self, name: &str, spec: &PromptSpec) -> String {
        let schedule = breath_schedule(spec.horizon, spec.breath_k);
        self.section(name)
            .replace("{dataset}", &spec.context.dataset_name)
            .replace("{description}", &spec.context.domain_description)
            .replace("{frequency}", spec.context.frequency.as_str())
            .replace("{upper_scale}", &spec.context.upper_time_scale)
            .replace("{short_steps}", &spec.partition.short_steps.to_string())
            .replace("{long_steps}", &spec.partition.long_steps.to_string())
            .replace("{k}", &spec.breath_k.to_string())
            .replace("{history}", &spec.history_text)
            .replace("{H}", &spec.horizon.to_string())
            .replace("{separator}", &spec.output_separator)
            .replace("{breath_schedule}", &schedule)
    }

    /// Render any strategy.
    pub fn render(&self, spec: &PromptSpec) -> Result<PromptText, PromptError> {
        if spec.strategy.is_baseline() {
            self.render_baseline(spec)
        } else {
            self.render_long_short(spec)
        }
    }

    /// Render the full long/short-term prompt or one of its ablations.
    pub fn render_long_short(&self, spec: &PromptSpec) -> Result<PromptText, PromptError> {
        if spec.strategy.is_baseline() {
            return Err(PromptError::InvalidSpec(format!(
                "strategy {} is a baseline; use render_baseline",
                spec.strategy
            )));
        }
        validate_common(spec)?;
        if spec.strategy.uses_breath() && spec.breath_k == 0 {
            return Err(PromptError::InvalidSpec(
                "breath-enabled strategy requires k >= 1".to_string(),
            ));
        }
        if spec.partition.horizon() != spec.horizon {
            return Err(PromptError::InvalidSpec(format!(
                "partition sums to {} but horizon is {}",
                spec.partition.horizon(),
                spec.horizon
            )));
        }
        let mut builder = SectionBuilder::default();
        builder.push(Section::Context, self.fill("context", spec));
        if spec.strategy.uses_decomposition() {
            let name = if spec.options.model_chooses_partition {
                "decomposition_free"
            } else {
                "decomposition"
            };
            builder.push(Section::Decomposition, self.fill(name, spec));
        }
        if spec.strategy.uses_breath() {
            let name = match spec.options.breath_style {
                BreathStyle::Instruction => "breath",
                BreathStyle::InlineSchedule => "breath_inline",
            };
            builder.push(Section::Breath, self.fill(name, spec));
        }
        builder.push(Section::History, self.fill("history", spec));
        builder.push(Section::OutputContract, self.fill("contract", spec));
        Ok(builder.finish(spec.horizon))
    }

    /// Render a baseline prompt (naive continuation or generic step-by-step).
    pub fn render_baseline(&self, spec: &PromptSpec) -> Result<PromptText, PromptError> {
        validate_common(spec)?;
        let mut builder = SectionBuilder::default();
        match spec.strategy {
            Strategy::Naive => {
                // History plus a bare continuation cue, nothing else.
                let text = format!("{}{}", spec.history_text, spec.output_separator);
                builder.push_exact(Section::History, text);
            }
            Strategy::Cot => {
                builder.push(Section::Context, self.fill("cot", spec));
                builder.push(Section::History, self.fill("history", spec));
                builder.push(Section::OutputContract, self.fill("contract", spec));
            }
            other => {
                return Err(PromptError::InvalidSpec(format!(
                    "strategy {other} is not a baseline"
                )))
            }
        }
        Ok(builder.finish(spec.horizon))
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template parses")
    }
}

fn validate_common(spec: &PromptSpec) -> Result<(), PromptError> {
    if spec.history_text.is_empty() {
        return Err(PromptError::InvalidSpec("empty history".to_string()));
    }
    if spec.horizon == 0 {
        return Err(PromptError::InvalidSpec("horizon must be >= 1".to_string()));
    }
    Ok(())
}

fn breath_schedule(horizon: usize, k: usize) -> String {
    if k == 0 {
        return String::new();
    }
    let steps: Vec<String> = (1..)
        .map(|i| i * k)
        .take_while(|s| *s <= horizon)
        .map(|s| s.to_string())
        .collect();
    steps.join(", ")
}

#[derive(Default)]
struct SectionBuilder {
    text: String,
    offsets: Vec<(Section, Range<usize>)>,
}

impl SectionBuilder {
    /// Append a section followed by a blank-line separator; the separator
    /// bytes belong to the section so the offsets partition the text.
    fn push(&mut self, section: Section, body: String) {
        let start = self.text.len();
        self.text.push_str(&body);
        self.text.push_str("\n\n");
        self.offsets.push((section, start..self.text.len()));
    }

    /// Append a section verbatim, no separator.
    fn push_exact(&mut self, section: Section, body: String) {
        let start = self.text.len();
        self.text.push_str(&body);
        self.offsets.push((section, start..self.text.len()));
    }

    fn finish(mut self, requested_count: usize) -> PromptText {
        // Drop the trailing blank-line separator of the last section.
        if self.text.ends_with("\n\n") {
            self.text.truncate(self.text.len() - 1);
            if let Some((_, range)) = self.offsets.last_mut() {
                range.end = self.text.len();
            }
        }
        PromptText {
            text: self.text,
            section_offsets: self.offsets,
            requested_count,
        }
    }
}
