//! Prompt rendering for LLM quality scoring.

use alloc::format;
use alloc::string::{String, ToString};

use crate::record::ExampleRecord;
use crate::rng::stable_hash;
use crate::{Error, Result};

pub const DEFAULT_TEMPLATE: &str = "This is a pretraining datapoint: ### {text} ###. Does the previous paragraph \
contain informative content that could help train a large language model? Answer yes or no.";
pub const DEFAULT_PLACEHOLDER: &str = "{text}";
/// Character budget for the example text inside a prompt.
pub const DEFAULT_BUDGET: usize = 4000;
/// Appended to text cut at the budget.
pub const TRUNCATION_MARKER: &str = " [...]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    template: String,
    placeholder: String,
    budget: Option<usize>,
}

/// A rendered prompt and whether the example text had to be cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub prompt: String,
    pub truncated: bool,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

impl PromptTemplate {
    /// A template using the `{text}` placeholder.
    pub fn new(template: impl Into<String>) -> Result<Self> {
        Self::with_placeholder(template, DEFAULT_PLACEHOLDER)
    }

    /// The placeholder must appear exactly once.
    pub fn with_placeholder(template: impl Into<String>, placeholder: impl Into<String>) -> Result<Self> {
        let template = template.into();
        let placeholder = placeholder.into();
        match template.matches(placeholder.as_str()).count() {
            0 => Err(Error::MissingPlaceholder(placeholder)),
            1 => Ok(Self {
                template,
                placeholder,
                budget: Some(DEFAULT_BUDGET),
            }),
            _ => Err(Error::InvalidArgument("placeholder must appear exactly once")),
        }
    }

    /// Character budget for the substituted text; `None` disables truncation.
    pub fn budget(mut self, budget: Option<usize>) -> Self {
        self.budget = budget;
        self
    }

    pub fn text(&self) -> &str {
        &self.template
    }

    /// Short stable fingerprint used in scorer ids.
    pub fn fingerprint(&self) -> String {
        let key = format!("{}\u{0}{}\u{0}{:?}", self.template, self.placeholder, self.budget);
        format!("{:016x}", stable_hash(key.as_bytes()))[..8].to_string()
    }

    pub fn render(&self, example: &ExampleRecord) -> Result<RenderedPrompt> {
        if !example.is_scorable() {
            return Err(Error::EmptyText(example.id.clone()));
        }
        let (body, truncated) = match self.budget {
            Some(budget) => match example.text.char_indices().nth(budget) {
                Some((cut, _)) => (format!("{}{}", &example.text[..cut], TRUNCATION_MARKER), true),
                None => (example.text.clone(), false),
            },
            None => (example.text.clone(), false),
        };
        let (head, tail) = self
            .template
            .split_once(self.placeholder.as_str())
            .expect("placeholder checked at construction");
        let mut prompt = String::with_capacity(head.len() + body.len() + tail.len());
        prompt.push_str(head);
        prompt.push_str(&body);
        prompt.push_str(tail);
        Ok(RenderedPrompt { prompt, truncated })
    }
}
