//! Feature extraction: one [`RevisionRecord`] in, one [`FeatureBag`] out.
//!
//! Three feature families mirror the revision structure: the page (its
//! title), the user (name, or anonymity plus geolocation, IP path prefixes,
//! and revision tags), and the comment (structured action block, wiki-links,
//! free text). Every token carries its family so identical strings in
//! different families never alias after hashing.

use crate::corpus::{Contributor, RevisionRecord};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("not a dotted-quad ip: {0:?}")]
    NotAnIp(String),
}

/// Feature family tags, in the fixed order they appear in an extracted bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Title,
    User,
    CommentStruct,
    CommentLink,
    CommentText,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Title,
        Family::User,
        Family::CommentStruct,
        Family::CommentLink,
        Family::CommentText,
    ];

    /// Stable name used when a token is combined with its family for hashing
    /// and for vocabulary files.
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Title => "Title",
            Family::User => "User",
            Family::CommentStruct => "CommentStruct",
            Family::CommentLink => "CommentLink",
            Family::CommentText => "CommentText",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered list of family-tagged tokens extracted from one revision.
/// Tokens are never empty and never contain whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureBag {
    entries: Vec<(Family, String)>,
}

impl FeatureBag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a token under `family`, replacing internal whitespace runs
    /// with `_`. Tokens that are empty after trimming are dropped.
    pub fn push(&mut self, family: Family, token: &str) {
        if let Some(clean) = sanitize_token(token) {
            self.entries.push((family, clean));
        }
    }

    pub fn entries(&self) -> &[(Family, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Family, &str)> {
        self.entries.iter().map(|(f, t)| (*f, t.as_str()))
    }

    /// Keep only the entries of one family; used for the per-family models.
    pub fn filter_family(&self, family: Family) -> FeatureBag {
        FeatureBag {
            entries: self
                .entries
                .iter()
                .filter(|(f, _)| *f == family)
                .cloned()
                .collect(),
        }
    }

    #[cfg(test)]
    pub(crate) fn from_entries(entries: Vec<(Family, String)>) -> Self {
        FeatureBag { entries }
    }
}

fn sanitize_token(token: &str) -> Option<String> {
    let trimmed = token.trim();
    if trimmed.is_empty() {
        return None;
    }
    let mut out = String::with_capacity(trimmed.len());
    let mut in_gap = false;
    for ch in trimmed.chars() {
        if ch.is_whitespace() {
            if !in_gap {
                out.push('_');
                in_gap = true;
            }
        } else {
            out.push(ch);
            in_gap = false;
        }
    }
    Some(out)
}

/// Page family: the page title, verbatim up to whitespace replacement.
pub fn page_features(record: &RevisionRecord) -> Vec<String> {
    sanitize_token(&record.page_title).into_iter().collect()
}

/// Progressively longer octet prefixes of a dotted-quad IP, joined by `_`:
/// `90.219.230.105` becomes `90`, `90_219`, `90_219_230`, `90_219_230_105`.
pub fn ip_path_features(ip: &str) -> Result<Vec<String>, FeatureError> {
    let octets: Vec<&str> = ip.split('.').collect();
    let valid = octets.len() == 4
        && octets.iter().all(|o| {
            !o.is_empty()
                && o.len() <= 3
                && o.bytes().all(|b| b.is_ascii_digit())
                && o.parse::<u16>().map(|v| v <= 255).unwrap_or(false)
        });
    if !valid {
        return Err(FeatureError::NotAnIp(ip.to_string()));
    }
    Ok((1..=4).map(|k| octets[..k].join("_")).collect())
}

/// User family tokens. Named users contribute their username; anonymous
/// users contribute an anonymity marker, `key=value` tokens for every
/// present geolocation field, and the IP path prefixes. Revision tags join
/// the user family verbatim for every contributor.
pub fn user_features(record: &RevisionRecord) -> Vec<String> {
    let mut tokens = Vec::new();
    match &record.contributor {
        Contributor::Named { username, .. } => {
            tokens.push(format!("username={username}"));
        }
        Contributor::Anonymous { ip } => {
            tokens.push("anonymous=true".to_string());
            if let Some(geo) = &record.geo {
                for (key, value) in geo.present_fields() {
                    tokens.push(format!("{key}={value}"));
                }
            }
            if let Ok(paths) = ip_path_features(ip) {
                tokens.extend(paths);
            }
        }
    }
    tokens.extend(record.tags.iter().cloned());
    tokens
}

/// A revision comment split into its three parts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedComment {
    /// Tokens from the first `/* */` block, split on `:`, `|`, `/`, `*`.
    pub structured: Vec<String>,
    /// Contents of every `[[...]]` span, in comment order, duplicates kept.
    pub links: Vec<String>,
    /// Free text outside the block and the link spans: lowercased and split
    /// on runs of non-alphanumeric characters.
    pub unstructured: Vec<String>,
}

fn link_spans(s: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut cursor = 0;
    while let Some(open) = s[cursor..].find("[[") {
        let open = cursor + open;
        let Some(close) = s[open + 2..].find("]]") else {
            break;
        };
        let close = open + 2 + close;
        spans.push((open, close + 2));
        cursor = close + 2;
    }
    spans
}

fn text_tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_string)
        .collect()
}

/// Split a comment into structured tokens, wiki-links, and free-text tokens.
///
/// Only the first `/* */` block counts as structured; an unterminated `/*`
/// leaves the remainder as ordinary text. Links are collected from the whole
/// comment. Free text is whatever remains once the block and the complete
/// link spans are removed.
pub fn parse_comment(comment: &str) -> ParsedComment {
    let block = comment.find("/*").and_then(|start| {
        comment[start + 2..]
            .find("*/")
            .map(|end| (start, start + 2 + end + 2))
    });

    let structured = match block {
        Some((start, end)) => comment[start + 2..end - 2]
            .split(|c: char| matches!(c, ':' | '|' | '/' | '*'))
            .map(str::trim)
            .filter(|piece| !piece.is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };

    let links: Vec<String> = link_spans(comment)
        .iter()
        .map(|&(open, close)| comment[open + 2..close - 2].to_string())
        .collect();

    let mut remainder = String::with_capacity(comment.len());
    {
        let mut skip_ranges = link_spans(comment);
        if let Some(block_range) = block {
            skip_ranges.push(block_range);
            skip_ranges.sort_unstable();
        }
        let mut cursor = 0;
        for (open, close) in skip_ranges {
            if open >= cursor {
                remainder.push_str(&comment[cursor..open]);
                cursor = close;
            } else if close > cursor {
                // span overlaps one already removed (a link inside the block)
                cursor = close;
            }
        }
        remainder.push_str(&comment[cursor..]);
    }

    ParsedComment {
        structured,
        links,
        unstructured: text_tokens(&remainder),
    }
}

/// Full extraction: Title, User, CommentStruct, CommentLink, CommentText
/// entries in that fixed order. Pure and deterministic.
pub fn extract_all(record: &RevisionRecord) -> FeatureBag {
    let mut bag = FeatureBag::new();
    for token in page_features(record) {
        bag.push(Family::Title, &token);
    }
    for token in user_features(record) {
        bag.push(Family::User, &token);
    }
    let comment = parse_comment(&record.comment);
    for token in &comment.structured {
        bag.push(Family::CommentStruct, token);
    }
    for token in &comment.links {
        bag.push(Family::CommentLink, token);
    }
    for token in &comment.unstructured {
        bag.push(Family::CommentText, token);
    }
    bag
}
