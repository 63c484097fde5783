//! Corpus ingest: cleaning raw posts, tokenizing, and length filtering.
//!
//! Cleaning removes `#...#` hashtag spans (kept as metadata), URLs, `@mentions`,
//! the author's name and location tags, converts emoticons to bracketed text
//! through a lookup table and normalizes whitespace. Length is counted in
//! tokens of the cleaned text, so hashtag spans never contribute.
//!
//! Location tags are recognized in two forms: a `📍` pin followed by a
//! non-space run, and the literal `[位置]` marker followed by a non-space run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::PostId;

pub const DEFAULT_MIN_TOKENS: usize = 10;
pub const DEFAULT_MAX_TOKENS: usize = 200;

static HASHTAG_SPAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#[^#\n]+#").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)[!-~]+").unwrap());
static MENTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@[^\s@:：,，。!！?？、;；]+").unwrap());
static LOCATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:📍|\[位置\])\S*").unwrap());

const DEFAULT_EMOTICONS: &str = include_str!("../data/emoticons.json");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("raw post {index}: external_id is empty")]
    EmptyExternalId { index: usize },
    #[error("raw post {index} ({external_id}): negative timestamp {timestamp}")]
    NegativeTimestamp {
        index: usize,
        external_id: String,
        timestamp: i64,
    },
    #[error("invalid emoticon table: {0}")]
    EmoticonTable(String),
}

/// Post as collected, before cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub external_id: String,
    pub text: String,
    pub hashtag: String,
    /// UTC seconds.
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
}

/// Cleaned post in the canonical corpus. Ids are dense (`0..n`) in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub external_id: String,
    pub text: String,
    pub hashtag: String,
    pub timestamp: i64,
    pub token_count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub n_input: usize,
    pub n_too_short: usize,
    pub n_too_long: usize,
    pub n_empty_after_clean: usize,
    pub n_kept: usize,
}

impl CleaningReport {
    pub fn reconciles(&self) -> bool {
        self.n_input == self.n_kept + self.n_too_short + self.n_too_long + self.n_empty_after_clean
    }
}

/// Cleaned text waiting for the length filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedPost {
    pub external_id: String,
    pub text: String,
    pub hashtag: String,
    pub timestamp: i64,
    pub token_count: usize,
    /// Hashtag spans found in the body, without the `#` delimiters.
    pub hashtag_spans: Vec<String>,
}

impl From<Post> for CleanedPost {
    fn from(p: Post) -> Self {
        Self {
            external_id: p.external_id,
            text: p.text,
            hashtag: p.hashtag,
            timestamp: p.timestamp,
            token_count: p.token_count,
            hashtag_spans: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanRejection {
    Empty,
}

/// Result of cleaning a single post body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanedText {
    pub text: String,
    pub hashtag_spans: Vec<String>,
}

/// Emoticon to text lookup, matched longest key first.
#[derive(Debug, Clone, Default)]
pub struct EmoticonTable {
    map: HashMap<String, String>,
    max_key_chars: usize,
}

impl EmoticonTable {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        let map: HashMap<String, String> =
            entries.into_iter().filter(|(k, _)| !k.is_empty()).collect();
        let max_key_chars = map.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Self { map, max_key_chars }
    }

    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_EMOTICONS).expect("builtin emoticon table is valid")
    }

    /// Parses a JSON object mapping emoticon sequences to text.
    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(json).map_err(|e| CorpusError::EmoticonTable(e.to_string()))?;
        Ok(Self::new(map))
    }

    /// Adds or overrides entries.
    pub fn extend(&mut self, entries: impl IntoIterator<Item = (String, String)>) {
        for (k, v) in entries {
            if k.is_empty() {
                continue;
            }
            self.max_key_chars = self.max_key_chars.max(k.chars().count());
            self.map.insert(k, v);
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Replaces every emoticon with `[text]`.
    pub fn replace(&self, text: &str) -> String {
        if self.map.is_empty() {
            return text.to_string();
        }
        let bounds = char_boundaries(text);
        let n_chars = bounds.len() - 1;
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < n_chars {
            let longest = self.max_key_chars.min(n_chars - i);
            for len in (1..=longest).rev() {
                let candidate = &text[bounds[i]..bounds[i + len]];
                if let Some(replacement) = self.map.get(candidate) {
                    out.push('[');
                    out.push_str(replacement);
                    out.push(']');
                    i += len;
                    continue 'outer;
                }
            }
            out.push_str(&text[bounds[i]..bounds[i + 1]]);
            i += 1;
        }
        out
    }
}

/// Byte offsets of every char start plus the end of the string.
fn char_boundaries(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect()
}

pub fn clean_post(raw: &RawPost, emoticons: &EmoticonTable) -> Result<CleanedText, CleanRejection> {
    clean_text(&raw.text, raw.author.as_deref(), emoticons)
}

pub fn clean_text(
    text: &str,
    author: Option<&str>,
    emoticons: &EmoticonTable,
) -> Result<CleanedText, CleanRejection> {
    let hashtag_spans = HASHTAG_SPAN
        .find_iter(text)
        .map(|m| m.as_str().trim_matches('#').to_string())
        .collect();
    let mut s = HASHTAG_SPAN.replace_all(text, " ").into_owned();
    s = URL.replace_all(&s, " ").into_owned();
    s = LOCATION.replace_all(&s, " ").into_owned();
    s = MENTION.replace_all(&s, " ").into_owned();
    if let Some(name) = author.map(str::trim).filter(|n| !n.is_empty()) {
        s = s.replace(name, " ");
    }
    s = emoticons.replace(&s);
    let text = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.is_empty() {
        return Err(CleanRejection::Empty);
    }
    Ok(CleanedText {
        text,
        hashtag_spans,
    })
}

/// Whether a codepoint counts as a token in characters mode.
pub fn is_token_char(c: char) -> bool {
    !c.is_whitespace() && c.general_category_group() != GeneralCategoryGroup::Punctuation
}

/// Word list for longest-match tokenization.
#[derive(Debug, Clone, Default)]
pub struct WordList {
    words: HashSet<String>,
    max_chars: usize,
}

impl WordList {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        let words: HashSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty())
            .collect();
        let max_chars = words.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        Self { words, max_chars }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Tokenizer<'a> {
    /// One token per non-whitespace, non-punctuation codepoint.
    Characters,
    /// Greedy longest match against a word list, falling back to single
    /// codepoints (whitespace and punctuation are skipped in the fallback).
    LongestMatch(&'a WordList),
}

pub fn tokenize<'t>(text: &'t str, tokenizer: Tokenizer<'_>) -> Vec<&'t str> {
    match tokenizer {
        Tokenizer::Characters => text
            .char_indices()
            .filter(|(_, c)| is_token_char(*c))
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
        Tokenizer::LongestMatch(words) => {
            let bounds = char_boundaries(text);
            let n_chars = bounds.len() - 1;
            let mut out = Vec::new();
            let mut i = 0;
            'outer: while i < n_chars {
                let longest = words.max_chars.min(n_chars - i);
                for len in (1..=longest).rev() {
                    let candidate = &text[bounds[i]..bounds[i + len]];
                    if words.contains(candidate) {
                        out.push(candidate);
                        i += len;
                        continue 'outer;
                    }
                }
                let single = &text[bounds[i]..bounds[i + 1]];
                if single.chars().all(is_token_char) {
                    out.push(single);
                }
                i += 1;
            }
            out
        }
    }
}

/// Inclusive token-count bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthBounds {
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for LengthBounds {
    fn default() -> Self {
        Self {
            min_tokens: DEFAULT_MIN_TOKENS,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Keeps posts whose token count lies in the bounds and assigns dense ids in
/// input order. The returned report has `n_empty_after_clean == 0`.
pub fn filter_corpus(
    posts: impl IntoIterator<Item = CleanedPost>,
    bounds: LengthBounds,
) -> (Vec<Post>, CleaningReport) {
    let mut report = CleaningReport::default();
    let mut kept = Vec::new();
    for p in posts {
        report.n_input += 1;
        if p.token_count < bounds.min_tokens {
            report.n_too_short += 1;
        } else if p.token_count > bounds.max_tokens {
            report.n_too_long += 1;
        } else {
            kept.push(Post {
                id: kept.len(),
                external_id: p.external_id,
                text: p.text,
                hashtag: p.hashtag,
                timestamp: p.timestamp,
                token_count: p.token_count,
            });
        }
    }
    report.n_kept = kept.len();
    (kept, report)
}

pub struct IngestOptions<'a> {
    pub bounds: LengthBounds,
    pub tokenizer: Tokenizer<'a>,
    pub emoticons: &'a EmoticonTable,
}

/// Validates, cleans, tokenizes and filters raw posts.
pub fn ingest(
    raws: &[RawPost],
    options: &IngestOptions<'_>,
) -> Result<(Vec<Post>, CleaningReport), CorpusError> {
    let mut candidates = Vec::with_capacity(raws.len());
    let mut n_empty = 0;
    for (index, raw) in raws.iter().enumerate() {
        if raw.external_id.is_empty() {
            return Err(CorpusError::EmptyExternalId { index });
        }
        if raw.timestamp < 0 {
            return Err(CorpusError::NegativeTimestamp {
                index,
                external_id: raw.external_id.clone(),
                timestamp: raw.timestamp,
            });
        }
        match clean_post(raw, options.emoticons) {
            Ok(cleaned) => {
                let token_count = tokenize(&cleaned.text, options.tokenizer).len();
                candidates.push(CleanedPost {
                    external_id: raw.external_id.clone(),
                    text: cleaned.text,
                    hashtag: raw.hashtag.clone(),
                    timestamp: raw.timestamp,
                    token_count,
                    hashtag_spans: cleaned.hashtag_spans,
                });
            }
            Err(CleanRejection::Empty) => n_empty += 1,
        }
    }
    let (posts, mut report) = filter_corpus(candidates, options.bounds);
    report.n_input += n_empty;
    report.n_empty_after_clean = n_empty;
    Ok((posts, report))
}
