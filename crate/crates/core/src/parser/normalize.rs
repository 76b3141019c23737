//! Utterance normalization: lowercase, punctuation stripped, articles
//! dropped, a few contractions expanded.

use serde::{Deserialize, Serialize};

const ARTICLES: [&str; 3] = ["the", "a", "an"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(raw: &str) -> Self {
        Self { raw: raw.to_owned(), tokens: normalize(raw) }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn normalize(raw: &str) -> Vec<String> {
    let lowered = raw.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '_' || c == '-' || c == '\'' { c } else { ' ' })
        .collect();
    let mut tokens = Vec::new();
    for word in cleaned.split_whitespace() {
        let word = word.trim_matches(|c| c == '\'' || c == '-');
        match word {
            "" => {}
            "where's" => tokens.extend(["where", "is"].map(String::from)),
            "what's" => tokens.extend(["what", "is"].map(String::from)),
            "there's" => tokens.extend(["there", "is"].map(String::from)),
            w if ARTICLES.contains(&w) => {}
            w => tokens.push(w.replace('\'', "")),
        }
    }
    tokens.retain(|t| !t.is_empty());
    tokens
}

/// Plural to singular for regular English nouns.
pub fn singularize(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "xes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_owned();
        }
    }
    if word.len() > 1 && word.ends_with('s') && !word.ends_with("ss") {
        return word[..word.len() - 1].to_owned();
    }
    word.to_owned()
}

/// Inverse of [`singularize`] on regular nouns; used to render templates.
pub fn pluralize(word: &str) -> String {
    if let Some(stem) = word.strip_suffix('y') {
        if !stem.ends_with(['a', 'e', 'i', 'o', 'u']) {
            return format!("{stem}ies");
        }
    }
    if ["ss", "x", "ch", "sh"].iter().any(|s| word.ends_with(s)) {
        return format!("{word}es");
    }
    format!("{word}s")
}
