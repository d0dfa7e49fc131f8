//! WordPiece vocabularies and fixed-length encoding.
//!
//! Text is NFC-normalized, lowercased and split on whitespace. Each word is
//! segmented by greedy longest match against the vocabulary, continuation
//! pieces carrying the `##` prefix; a word with no matching segmentation
//! becomes a single `[UNK]`. The mask tokens produced by
//! [`crate::textprep`] are kept verbatim and never fragmented, even when
//! punctuation is glued to them (`__mention__:` encodes as `__mention__`,
//! `##:`).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::textprep::{MENTION_TOKEN, URL_TOKEN};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];
pub const CONTINUATION_PREFIX: &str = "##";
/// Whole tokens present in every vocabulary right after the specials.
pub const MASK_TOKENS: [&str; 2] = [MENTION_TOKEN, URL_TOKEN];

/// Words longer than this (in chars) encode as `[UNK]`.
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("vocabulary budget {target} cannot hold the {required} reserved and alphabet tokens")]
    Budget { target: usize, required: usize },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("max_len must be at least 3, got {0}")]
    MaxLen(usize),
    #[error("vocabulary file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Token ↔ id table. Ids are dense, specials first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

/// An encoded text padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
    pub true_length: usize,
}

impl TokenSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// The non-padding prefix `[CLS] … [SEP]`.
    pub fn active_ids(&self) -> &[u32] {
        &self.ids[..self.true_length]
    }
}

/// A piece of one whitespace-delimited word.
#[derive(Debug, PartialEq, Eq)]
enum Segment {
    Mask(&'static str),
    /// Lowercased text; `continued` when it does not start the word.
    Text {
        text: String,
        continued: bool,
    },
}

fn segments(word: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut rest = word;
    let mut continued = false;
    while !rest.is_empty() {
        let next = MASK_TOKENS.iter().filter_map(|m| rest.find(m).map(|at| (at, *m))).min();
        match next {
            Some((0, m)) => {
                out.push(Segment::Mask(m));
                rest = &rest[m.len()..];
            }
            Some((at, _)) => {
                out.push(Segment::Text {
                    text: rest[..at].to_lowercase(),
                    continued,
                });
                rest = &rest[at..];
            }
            None => {
                out.push(Segment::Text {
                    text: rest.to_lowercase(),
                    continued,
                });
                rest = "";
            }
        }
        continued = true;
    }
    out
}

fn words(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized.split_whitespace().map(str::to_owned).collect()
}

fn piece(chars: &[char], continued: bool) -> String {
    let body: String = chars.iter().collect();
    if continued {
        format!("{CONTINUATION_PREFIX}{body}")
    } else {
        body
    }
}

impl Vocabulary {
    /// Builds a vocabulary of at most `target_size` tokens.
    ///
    /// Layout: the four specials, the two mask tokens, then every single
    /// character seen (word-initial as `c`, elsewhere as `##c`), then
    /// multi-character word prefixes (whole words included) and `##`
    /// suffixes by descending corpus frequency, ties broken by token string.
    /// Characters and pieces seen fewer than `min_frequency` times are left
    /// out.
    pub fn build(texts: &[impl AsRef<str>], target_size: usize, min_frequency: usize) -> Result<Self, TokenizerError> {
        if texts.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }
        let mut segment_counts: HashMap<(String, bool), usize> = HashMap::new();
        for text in texts {
            for word in words(text.as_ref()) {
                for seg in segments(&word) {
                    if let Segment::Text { text, continued } = seg {
                        *segment_counts.entry((text, continued)).or_default() += 1;
                    }
                }
            }
        }

        let mut alphabet: HashMap<String, usize> = HashMap::new();
        let mut candidates: HashMap<String, usize> = HashMap::new();
        for ((text, continued), &count) in &segment_counts {
            let chars: Vec<char> = text.chars().collect();
            for (i, c) in chars.iter().enumerate() {
                *alphabet.entry(piece(&[*c], *continued || i > 0)).or_default() += count;
            }
            if chars.len() > MAX_WORD_CHARS {
                continue;
            }
            if !continued {
                for end in 2..=chars.len() {
                    *candidates.entry(piece(&chars[..end], false)).or_default() += count;
                }
            }
            let first = if *continued { 0 } else { 1 };
            for start in first..chars.len().saturating_sub(1) {
                *candidates.entry(piece(&chars[start..], true)).or_default() += count;
            }
        }

        let alphabet: BTreeSet<String> = alphabet
            .into_iter()
            .filter(|&(_, n)| n >= min_frequency)
            .map(|(t, _)| t)
            .collect();
        let reserved = SPECIALS.len() + MASK_TOKENS.len();
        let required = reserved + alphabet.len();
        if target_size < required {
            return Err(TokenizerError::Budget {
                target: target_size,
                required,
            });
        }

        let mut tokens: Vec<String> = SPECIALS.iter().chain(&MASK_TOKENS).map(|s| s.to_string()).collect();
        tokens.extend(alphabet);
        let mut ranked: Vec<(String, usize)> = candidates
            .into_iter()
            .filter(|(t, n)| *n >= min_frequency && t != CONTINUATION_PREFIX)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let budget = target_size - tokens.len();
        tokens.extend(ranked.into_iter().map(|(t, _)| t).take(budget));
        Self::from_tokens(tokens).map_err(|(line, reason)| TokenizerError::Format { line, reason })
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self, (usize, String)> {
        for (i, want) in SPECIALS.iter().chain(&MASK_TOKENS).enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*want) {
                return Err((i + 1, format!("expected reserved token {want}")));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err((i + 1, "tokens must be non-empty and contain no whitespace".into()));
            }
            if t == CONTINUATION_PREFIX {
                return Err((i + 1, "bare continuation prefix".into()));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err((i + 1, format!("duplicate token {t}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Greedy longest-match pieces for one lowercased segment.
    fn segment_ids(&self, text: &str, continued: bool, out: &mut Vec<u32>) {
        let chars: Vec<char> = text.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(UNK);
            return;
        }
        let mark = out.len();
        let mut start = 0;
        while start < chars.len() {
            let found = (start + 1..=chars.len()).rev().find_map(|end| {
                self.id(&piece(&chars[start..end], continued || start > 0))
                    .map(|id| (end, id))
            });
            match found {
                Some((end, id)) => {
                    out.push(id);
                    start = end;
                }
                None => {
                    out.truncate(mark);
                    out.push(UNK);
                    return;
                }
            }
        }
    }

    /// Word-piece ids of `text` without specials or padding.
    pub fn piece_ids(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for word in words(text) {
            for seg in segments(&word) {
                match seg {
                    Segment::Mask(m) => ids.push(self.id(m).unwrap_or(UNK)),
                    Segment::Text { text, continued } => self.segment_ids(&text, continued, &mut ids),
                }
            }
        }
        ids
    }

    /// Encodes `text` as `[CLS] pieces… [SEP]` padded with `[PAD]` to `max_len`,
    /// keeping at most `max_len - 2` pieces.
    pub fn encode(&self, text: &str, max_len: usize) -> Result<TokenSequence, TokenizerError> {
        if max_len < 3 {
            return Err(TokenizerError::MaxLen(max_len));
        }
        let mut pieces = self.piece_ids(text);
        pieces.truncate(max_len - 2);
        let mut ids = Vec::with_capacity(max_len);
        ids.push(CLS);
        ids.extend(pieces);
        ids.push(SEP);
        let true_length = ids.len();
        ids.resize(max_len, PAD);
        let mask = (0..max_len).map(|i| u8::from(i < true_length)).collect();
        Ok(TokenSequence { ids, mask, true_length })
    }

    /// One token per line; the line number (from 0) is the id.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_file_string(contents: &str) -> Result<Self, TokenizerError> {
        let body = contents.strip_suffix('\n').unwrap_or(contents);
        let tokens = body.split('\n').map(str::to_owned).collect();
        Self::from_tokens(tokens).map_err(|(line, reason)| TokenizerError::Format { line, reason })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|source| TokenizerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_file_string(&contents)
    }
}
