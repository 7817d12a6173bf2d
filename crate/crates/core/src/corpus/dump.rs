//! Streaming revision-dump parser.

use super::xml::{Token, XmlScanner};
use super::{is_dotted_quad, parse_timestamp, Contributor, CorpusError, RevisionRecord};
use std::io::Read;

/// Parse a revision XML dump into a lazy stream of [`RevisionRecord`]s.
///
/// Revisions are yielded in document order. The `<text>` payload is skipped
/// without being accumulated, so memory stays bounded by the largest single
/// element other than `text`. Revisions missing a required field (id,
/// timestamp, usable contributor, or enclosing page title/id) are skipped and
/// counted rather than aborting the stream; see [`DumpParser::skipped`].
pub fn parse_dump<R: Read>(reader: R) -> DumpParser<R> {
    DumpParser::new(reader)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Prolog,
    InMediawiki,
    InPage,
    Done,
}

pub struct DumpParser<R: Read> {
    scanner: XmlScanner<R>,
    state: State,
    page_title: Option<String>,
    page_id: Option<u64>,
    skipped: u64,
    last_skip: Option<CorpusError>,
    poisoned: bool,
}

impl<R: Read> DumpParser<R> {
    pub fn new(reader: R) -> Self {
        DumpParser {
            scanner: XmlScanner::new(reader),
            state: State::Prolog,
            page_title: None,
            page_id: None,
            skipped: 0,
            last_skip: None,
            poisoned: false,
        }
    }

    /// Number of structurally incomplete revisions skipped so far.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// The reason the most recent revision was skipped, if any.
    pub fn last_skip(&self) -> Option<&CorpusError> {
        self.last_skip.as_ref()
    }

    #[cfg(test)]
    pub(crate) fn scratch_capacity(&self) -> usize {
        self.scanner.scratch_capacity()
    }

    fn malformed(&self, reason: impl Into<String>) -> CorpusError {
        CorpusError::MalformedXml {
            offset: self.scanner.offset(),
            reason: reason.into(),
        }
    }

    /// Read the text content of the element just opened and return it. The
    /// element may contain only character data, not child elements.
    fn read_text_element(&mut self) -> Result<String, CorpusError> {
        let opened = self.scanner.name.clone();
        let mut content = String::new();
        loop {
            match self.scanner.next_token(true)? {
                Token::Text => content.push_str(&self.scanner.text),
                Token::End => {
                    if self.scanner.name != opened {
                        return Err(self.malformed(format!(
                            "expected </{opened}>, found </{}>",
                            self.scanner.name
                        )));
                    }
                    return Ok(content);
                }
                Token::Start | Token::SelfClose => {
                    return Err(self.malformed(format!(
                        "unexpected <{}> inside <{opened}>",
                        self.scanner.name
                    )))
                }
                Token::Eof => return Err(self.malformed(format!("<{opened}> never closed"))),
            }
        }
    }

    /// Skip the element just opened, including arbitrarily large text runs,
    /// verifying that nested tags stay balanced. Used for `<text>` payloads
    /// and any element the dump schema does not need.
    fn skip_element(&mut self) -> Result<(), CorpusError> {
        let mut stack = vec![self.scanner.name.clone()];
        while let Some(expected) = stack.last() {
            match self.scanner.next_token(false)? {
                Token::Text => {}
                Token::SelfClose => {}
                Token::Start => stack.push(self.scanner.name.clone()),
                Token::End => {
                    if &self.scanner.name != expected {
                        return Err(self.malformed(format!(
                            "expected </{expected}>, found </{}>",
                            self.scanner.name
                        )));
                    }
                    stack.pop();
                }
                Token::Eof => {
                    return Err(self.malformed(format!("<{expected}> never closed")))
                }
            }
        }
        Ok(())
    }

    fn unexpected_text(&self) -> Result<(), CorpusError> {
        if self.scanner.text.trim().is_empty() {
            Ok(())
        } else {
            Err(self.malformed("unexpected character data between elements"))
        }
    }

    /// Parse one `<revision>` element to completion. `Ok(None)` means the
    /// revision was structurally incomplete and should be counted as skipped.
    fn parse_revision(&mut self) -> Result<Option<RevisionRecord>, CorpusError> {
        let revision_offset = self.scanner.offset();
        let mut revision_id: Option<u64> = None;
        let mut parent_id: Option<u64> = None;
        let mut timestamp_raw: Option<String> = None;
        let mut comment: Option<String> = None;
        let mut username: Option<String> = None;
        let mut user_id: Option<u64> = None;
        let mut ip: Option<String> = None;

        loop {
            match self.scanner.next_token(true)? {
                Token::Text => self.unexpected_text()?,
                Token::Start => match self.scanner.name.as_str() {
                    "id" => revision_id = self.read_text_element()?.trim().parse().ok(),
                    "parentid" => parent_id = self.read_text_element()?.trim().parse().ok(),
                    "timestamp" => timestamp_raw = Some(self.read_text_element()?),
                    "comment" => comment = Some(self.read_text_element()?),
                    "contributor" => {
                        self.parse_contributor(&mut username, &mut user_id, &mut ip)?
                    }
                    "text" => self.skip_element()?,
                    _ => self.skip_element()?,
                },
                Token::SelfClose => {} // e.g. <minor/> or a deleted contributor
                Token::End => {
                    if self.scanner.name == "revision" {
                        break;
                    }
                    return Err(self.malformed(format!(
                        "expected </revision>, found </{}>",
                        self.scanner.name
                    )));
                }
                Token::Eof => return Err(self.malformed("<revision> never closed")),
            }
        }

        let skip = |field: &'static str| CorpusError::MissingField {
            field,
            offset: revision_offset,
        };
        let Some(revision_id) = revision_id else {
            self.note_skip(skip("revision id"));
            return Ok(None);
        };
        let Some(timestamp) = timestamp_raw.as_deref().map(str::trim).and_then(parse_timestamp)
        else {
            self.note_skip(skip("timestamp"));
            return Ok(None);
        };
        let contributor = match (username, ip) {
            (Some(name), None) if !name.trim().is_empty() => Contributor::Named {
                username: name,
                user_id,
            },
            (None, Some(ip)) if is_dotted_quad(ip.trim()) => Contributor::Anonymous {
                ip: ip.trim().to_string(),
            },
            _ => {
                self.note_skip(skip("contributor"));
                return Ok(None);
            }
        };
        let (Some(page_title), Some(page_id)) = (self.page_title.clone(), self.page_id) else {
            self.note_skip(skip("page title/id"));
            return Ok(None);
        };

        Ok(Some(RevisionRecord {
            page_title,
            page_id,
            revision_id,
            parent_id,
            timestamp,
            contributor,
            comment: comment.unwrap_or_default(),
            tags: Vec::new(),
            geo: None,
            label: None,
        }))
    }

    fn parse_contributor(
        &mut self,
        username: &mut Option<String>,
        user_id: &mut Option<u64>,
        ip: &mut Option<String>,
    ) -> Result<(), CorpusError> {
        loop {
            match self.scanner.next_token(true)? {
                Token::Text => self.unexpected_text()?,
                Token::Start => match self.scanner.name.as_str() {
                    "username" => *username = Some(self.read_text_element()?),
                    "id" => *user_id = self.read_text_element()?.trim().parse().ok(),
                    "ip" => *ip = Some(self.read_text_element()?),
                    _ => self.skip_element()?,
                },
                Token::SelfClose => {}
                Token::End => {
                    if self.scanner.name == "contributor" {
                        return Ok(());
                    }
                    return Err(self.malformed(format!(
                        "expected </contributor>, found </{}>",
                        self.scanner.name
                    )));
                }
                Token::Eof => return Err(self.malformed("<contributor> never closed")),
            }
        }
    }

    fn note_skip(&mut self, reason: CorpusError) {
        self.skipped += 1;
        self.last_skip = Some(reason);
    }

    fn advance(&mut self) -> Result<Option<RevisionRecord>, CorpusError> {
        loop {
            match self.state {
                State::Prolog => match self.scanner.next_token(true)? {
                    Token::Text => self.unexpected_text()?,
                    Token::Start if self.scanner.name == "mediawiki" => {
                        self.state = State::InMediawiki;
                    }
                    Token::SelfClose if self.scanner.name == "mediawiki" => {
                        self.state = State::Done;
                    }
                    Token::Eof => return Err(self.malformed("no root element")),
                    _ => {
                        return Err(self.malformed(format!(
                            "expected <mediawiki> root, found <{}>",
                            self.scanner.name
                        )))
                    }
                },
                State::InMediawiki => match self.scanner.next_token(true)? {
                    Token::Text => self.unexpected_text()?,
                    Token::Start if self.scanner.name == "page" => {
                        self.page_title = None;
                        self.page_id = None;
                        self.state = State::InPage;
                    }
                    Token::Start => self.skip_element()?,
                    Token::SelfClose => {}
                    Token::End if self.scanner.name == "mediawiki" => self.state = State::Done,
                    Token::End => {
                        return Err(self.malformed(format!(
                            "unexpected </{}> in <mediawiki>",
                            self.scanner.name
                        )))
                    }
                    Token::Eof => return Err(self.malformed("<mediawiki> never closed")),
                },
                State::InPage => match self.scanner.next_token(true)? {
                    Token::Text => self.unexpected_text()?,
                    Token::Start => match self.scanner.name.as_str() {
                        "title" => self.page_title = Some(self.read_text_element()?),
                        "id" => self.page_id = self.read_text_element()?.trim().parse().ok(),
                        "revision" => {
                            if let Some(record) = self.parse_revision()? {
                                return Ok(Some(record));
                            }
                        }
                        _ => self.skip_element()?, // ns, redirect, ...
                    },
                    Token::SelfClose => {}
                    Token::End if self.scanner.name == "page" => {
                        self.state = State::InMediawiki;
                    }
                    Token::End => {
                        return Err(self.malformed(format!(
                            "unexpected </{}> in <page>",
                            self.scanner.name
                        )))
                    }
                    Token::Eof => return Err(self.malformed("<page> never closed")),
                },
                State::Done => match self.scanner.next_token(true)? {
                    Token::Text => self.unexpected_text()?,
                    Token::Eof => return Ok(None),
                    _ => return Err(self.malformed("content after document root")),
                },
            }
        }
    }
}

impl<R: Read> Iterator for DumpParser<R> {
    type Item = Result<RevisionRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.poisoned {
            return None;
        }
        match self.advance() {
            Ok(Some(record)) => Some(Ok(record)),
            Ok(None) => None,
            Err(err) => {
                self.poisoned = true;
                Some(Err(err))
            }
        }
    }
}
