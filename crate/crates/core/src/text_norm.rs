//! Caption tokenization.
//!
//! A small PTB-style rule set: lowercase, split on whitespace, trim
//! punctuation from both ends of every word and drop words that were
//! nothing but punctuation. Interior punctuation (`don't`, `well-known`)
//! stays inside the token.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// Characters stripped from token boundaries.
pub const PUNCTUATION: &str = "!\"#$%&()*+.,-/:;=?@[]^_'`{|}~";

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(c)
}

/// Normalized caption tokens.
///
/// Every token is lowercase, nonempty, whitespace-free and has no
/// punctuation on either boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&detokenize(self))
    }
}

pub fn tokenize(raw: &str) -> TokenSequence {
    let lowered = raw.to_lowercase();
    let tokens = lowered
        .split_whitespace()
        .map(|word| word.trim_matches(is_punct))
        .filter(|word| !word.is_empty())
        .map(str::to_owned)
        .collect();
    TokenSequence(tokens)
}

pub fn detokenize(tokens: &TokenSequence) -> String {
    tokens.0.join(" ")
}
