use std::collections::BTreeMap;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

const EXPLORATION: &[&str] = &[
    "alternatively",
    "what if",
    "suspect",
    "reconsider",
    "re-examine",
    "re-evaluate",
    "perhaps",
    "hypothesis",
    "adjust",
    "assume",
    "invalidates",
    "incorrect",
    "but",
    "however",
];

const EXPLOITATION: &[&str] = &[
    "confirm",
    "verify",
    "calculate",
    "analyze",
    "clearly",
    "fit",
    "compare",
    "estimate",
    "suggest",
    "further",
    "investigate",
    "approximate",
    "test",
];

/// Phrase lists for the exploration rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordSets {
    pub exploration: Vec<String>,
    pub exploitation: Vec<String>,
}

impl Default for WordSets {
    fn default() -> Self {
        WordSets {
            exploration: EXPLORATION.iter().map(|s| s.to_string()).collect(),
            exploitation: EXPLOITATION.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn normalize(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl WordSets {
    pub fn from_toml(text: &str) -> Result<WordSets, HarnessError> {
        let sets: WordSets = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        sets.validate()?;
        Ok(sets)
    }

    pub fn load(path: &Path) -> Result<WordSets, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        WordSets::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, set) in [("exploration", &self.exploration), ("exploitation", &self.exploitation)] {
            if set.iter().any(|p| normalize(p).is_empty()) {
                return Err(HarnessError::Config(format!("{name} set has an empty phrase")));
            }
        }
        let explore: Vec<String> = self.exploration.iter().map(|p| normalize(p)).collect();
        if let Some(shared) = self.exploitation.iter().find(|p| explore.contains(&normalize(p))) {
            return Err(HarnessError::Config(format!("{shared:?} is in both word sets")));
        }
        Ok(())
    }

    pub fn matcher(&self) -> Result<PhraseMatcher, HarnessError> {
        self.validate()?;
        Ok(PhraseMatcher {
            exploration: self.exploration.iter().map(|p| phrase_regex(p)).collect(),
            exploitation: self.exploitation.iter().map(|p| phrase_regex(p)).collect(),
        })
    }
}

/// Whole-word, case-insensitive; any run of whitespace separates words.
fn phrase_regex(phrase: &str) -> (String, Regex) {
    let words: Vec<String> = phrase.split_whitespace().map(regex::escape).collect();
    let pattern = format!(r"\b{}\b", words.join(r"\s+"));
    let re = RegexBuilder::new(&pattern)
        .case_insensitive(true)
        .build()
        .expect("escaped phrases compile");
    (normalize(phrase), re)
}

pub struct PhraseMatcher {
    exploration: Vec<(String, Regex)>,
    exploitation: Vec<(String, Regex)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhraseCounts {
    pub exploration: usize,
    pub exploitation: usize,
    pub by_phrase: BTreeMap<String, usize>,
}

impl PhraseCounts {
    /// Percentage of hits that are exploratory; `None` without any hit.
    pub fn rate(&self) -> Option<f64> {
        let total = self.exploration + self.exploitation;
        (total > 0).then(|| 100.0 * self.exploration as f64 / total as f64)
    }
}

impl PhraseMatcher {
    pub fn count(&self, text: &str) -> PhraseCounts {
        let mut counts = PhraseCounts::default();
        for (set, total) in [
            (&self.exploration, &mut counts.exploration),
            (&self.exploitation, &mut counts.exploitation),
        ] {
            for (phrase, re) in set {
                let n = re.find_iter(text).count();
                if n > 0 {
                    *total += n;
                    *counts.by_phrase.entry(phrase.clone()).or_default() += n;
                }
            }
        }
        counts
    }
}

pub fn exploration_rate(text: &str, sets: &WordSets) -> Result<Option<f64>, HarnessError> {
    Ok(sets.matcher()?.count(text).rate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStats {
    pub path: String,
    pub characters: usize,
    pub messages: usize,
    pub counts: PhraseCounts,
    pub exploration_rate: Option<f64>,
}

/// Stats of one transcript file; every line is counted, parseable or not.
pub fn transcript_stats(path: &Path, matcher: &PhraseMatcher) -> Result<TranscriptStats, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let counts = matcher.count(&text);
    Ok(TranscriptStats {
        path: path.display().to_string(),
        characters: text.chars().count(),
        messages: text.lines().filter(|l| !l.trim().is_empty()).count(),
        exploration_rate: counts.rate(),
        counts,
    })
}
