//! Minimal streaming XML tokenizer for revision dumps.
//!
//! quick-xml and friends return each text node as a single event, which
//! forces the whole node into memory; dump `<text>` payloads run to hundreds
//! of megabytes, so this tokenizer lets the caller consume text runs in
//! discard mode instead. Supported syntax is exactly what dump files contain:
//! elements, attributes, character data with the five named entities plus
//! numeric references, comments, and processing instructions. DOCTYPE and
//! CDATA are rejected as unsupported.

use super::CorpusError;
use std::io::Read;

const BUF_SIZE: usize = 64 * 1024;
const MAX_NAME_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Token {
    /// `<name ...>`; the name is in [`XmlScanner::name`].
    Start,
    /// `<name ... />`
    SelfClose,
    /// `</name>`
    End,
    /// A character-data run; content is in [`XmlScanner::text`] when the run
    /// was read with `keep_text = true`, otherwise it was discarded.
    Text,
    Eof,
}

pub(crate) struct XmlScanner<R: Read> {
    src: R,
    buf: Vec<u8>,
    pos: usize,
    /// Absolute byte offset of `buf[0]` in the input stream.
    base: u64,
    eof: bool,
    /// Name of the most recent Start/SelfClose/End token.
    pub name: String,
    /// Content of the most recent Text token (kept runs only).
    pub text: String,
    scratch: Vec<u8>,
}

fn malformed(offset: u64, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedXml {
        offset,
        reason: reason.into(),
    }
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b':')
}

impl<R: Read> XmlScanner<R> {
    pub fn new(src: R) -> Self {
        XmlScanner {
            src,
            buf: Vec::with_capacity(BUF_SIZE),
            pos: 0,
            base: 0,
            eof: false,
            name: String::new(),
            text: String::new(),
            scratch: Vec::new(),
        }
    }

    /// Absolute offset of the next unread byte.
    pub fn offset(&self) -> u64 {
        self.base + self.pos as u64
    }

    /// Upper bound on internal buffer memory, for memory-discipline tests.
    #[cfg(test)]
    pub fn scratch_capacity(&self) -> usize {
        self.buf.capacity() + self.scratch.capacity() + self.text.capacity() + self.name.capacity()
    }

    fn refill(&mut self) -> Result<(), CorpusError> {
        debug_assert_eq!(self.pos, self.buf.len());
        self.base += self.buf.len() as u64;
        self.pos = 0;
        self.buf.clear();
        self.buf.resize(BUF_SIZE, 0);
        let n = self.src.read(&mut self.buf)?;
        self.buf.truncate(n);
        if n == 0 {
            self.eof = true;
        }
        Ok(())
    }

    fn peek(&mut self) -> Result<Option<u8>, CorpusError> {
        if self.pos == self.buf.len() {
            if self.eof {
                return Ok(None);
            }
            self.refill()?;
            if self.buf.is_empty() {
                return Ok(None);
            }
        }
        Ok(Some(self.buf[self.pos]))
    }

    fn next_byte(&mut self) -> Result<Option<u8>, CorpusError> {
        let b = self.peek()?;
        if b.is_some() {
            self.pos += 1;
        }
        Ok(b)
    }

    fn expect_byte(&mut self, want: u8, what: &str) -> Result<(), CorpusError> {
        let off = self.offset();
        match self.next_byte()? {
            Some(b) if b == want => Ok(()),
            Some(b) => Err(malformed(
                off,
                format!("expected {what}, found {:?}", b as char),
            )),
            None => Err(malformed(off, format!("expected {what}, found end of input"))),
        }
    }

    fn skip_whitespace(&mut self) -> Result<(), CorpusError> {
        while let Some(b) = self.peek()? {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(())
    }

    /// Read the next token. Text runs are decoded into `self.text` when
    /// `keep_text` is set and skipped in O(buffer) memory otherwise.
    pub fn next_token(&mut self, keep_text: bool) -> Result<Token, CorpusError> {
        loop {
            match self.peek()? {
                None => return Ok(Token::Eof),
                Some(b'<') => {
                    let tag_offset = self.offset();
                    self.pos += 1;
                    match self.peek()? {
                        None => return Err(malformed(tag_offset, "unterminated tag")),
                        Some(b'/') => {
                            self.pos += 1;
                            self.read_name(tag_offset)?;
                            self.skip_whitespace()?;
                            self.expect_byte(b'>', "'>' closing end tag")?;
                            return Ok(Token::End);
                        }
                        Some(b'?') => {
                            self.pos += 1;
                            self.skip_processing_instruction(tag_offset)?;
                        }
                        Some(b'!') => {
                            self.pos += 1;
                            self.skip_comment(tag_offset)?;
                        }
                        Some(_) => {
                            self.read_name(tag_offset)?;
                            let self_closing = self.finish_tag(tag_offset)?;
                            return Ok(if self_closing {
                                Token::SelfClose
                            } else {
                                Token::Start
                            });
                        }
                    }
                }
                Some(_) => {
                    self.read_text_run(keep_text)?;
                    return Ok(Token::Text);
                }
            }
        }
    }

    fn read_name(&mut self, tag_offset: u64) -> Result<(), CorpusError> {
        self.name.clear();
        while let Some(b) = self.peek()? {
            if is_name_byte(b) {
                if self.name.len() >= MAX_NAME_LEN {
                    return Err(malformed(tag_offset, "element name too long"));
                }
                self.name.push(b as char);
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.name.is_empty() {
            return Err(malformed(tag_offset, "empty element name"));
        }
        Ok(())
    }

    /// Consume attributes up to `>` or `/>`. Attribute values are validated
    /// for shape but discarded; the dump schema carries nothing we need there.
    fn finish_tag(&mut self, tag_offset: u64) -> Result<bool, CorpusError> {
        loop {
            self.skip_whitespace()?;
            match self.next_byte()? {
                None => return Err(malformed(tag_offset, "unterminated start tag")),
                Some(b'>') => return Ok(false),
                Some(b'/') => {
                    self.expect_byte(b'>', "'>' after '/'")?;
                    return Ok(true);
                }
                Some(b) if is_name_byte(b) => {
                    while let Some(b) = self.peek()? {
                        if is_name_byte(b) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    self.skip_whitespace()?;
                    self.expect_byte(b'=', "'=' in attribute")?;
                    self.skip_whitespace()?;
                    let quote_offset = self.offset();
                    let quote = match self.next_byte()? {
                        Some(q @ (b'"' | b'\'')) => q,
                        _ => return Err(malformed(quote_offset, "attribute value must be quoted")),
                    };
                    loop {
                        match self.next_byte()? {
                            None => {
                                return Err(malformed(quote_offset, "unterminated attribute value"))
                            }
                            Some(b) if b == quote => break,
                            Some(_) => {}
                        }
                    }
                }
                Some(b) => {
                    return Err(malformed(
                        tag_offset,
                        format!("unexpected {:?} in tag", b as char),
                    ))
                }
            }
        }
    }

    fn skip_processing_instruction(&mut self, tag_offset: u64) -> Result<(), CorpusError> {
        let mut prev_question = false;
        loop {
            match self.next_byte()? {
                None => return Err(malformed(tag_offset, "unterminated processing instruction")),
                Some(b'>') if prev_question => return Ok(()),
                Some(b) => prev_question = b == b'?',
            }
        }
    }

    fn skip_comment(&mut self, tag_offset: u64) -> Result<(), CorpusError> {
        // Already consumed "<!"; only comments are supported from here.
        for _ in 0..2 {
            match self.next_byte()? {
                Some(b'-') => {}
                _ => {
                    return Err(malformed(
                        tag_offset,
                        "unsupported markup (only comments are allowed after '<!')",
                    ))
                }
            }
        }
        let mut dashes = 0usize;
        loop {
            match self.next_byte()? {
                None => return Err(malformed(tag_offset, "unterminated comment")),
                Some(b'-') => dashes += 1,
                Some(b'>') if dashes >= 2 => return Ok(()),
                Some(_) => dashes = 0,
            }
        }
    }

    fn read_text_run(&mut self, keep: bool) -> Result<(), CorpusError> {
        if keep {
            self.scratch.clear();
        }
        let run_offset = self.offset();
        loop {
            if self.pos == self.buf.len() {
                if self.eof {
                    break;
                }
                self.refill()?;
                if self.buf.is_empty() {
                    break;
                }
            }
            // Scan the buffered chunk up to the next markup or entity.
            let chunk = &self.buf[self.pos..];
            match chunk
                .iter()
                .position(|&b| b == b'<' || (keep && b == b'&'))
            {
                None => {
                    // chunk exhausted; keep scanning after the next refill
                    if keep {
                        self.scratch.extend_from_slice(chunk);
                    }
                    self.pos = self.buf.len();
                }
                Some(stop) => {
                    if keep {
                        self.scratch.extend_from_slice(&chunk[..stop]);
                    }
                    self.pos += stop;
                    if self.buf[self.pos] == b'<' {
                        break;
                    }
                    let entity_offset = self.offset();
                    self.pos += 1;
                    self.decode_entity(entity_offset)?;
                }
            }
        }
        if keep {
            let s = std::str::from_utf8(&self.scratch)
                .map_err(|_| malformed(run_offset, "text is not valid UTF-8"))?;
            self.text.clear();
            self.text.push_str(s);
        }
        Ok(())
    }

    fn decode_entity(&mut self, offset: u64) -> Result<(), CorpusError> {
        let mut entity = [0u8; 12];
        let mut len = 0;
        loop {
            match self.next_byte()? {
                None => return Err(malformed(offset, "unterminated entity")),
                Some(b';') => break,
                Some(b) => {
                    if len == entity.len() {
                        return Err(malformed(offset, "entity too long"));
                    }
                    entity[len] = b;
                    len += 1;
                }
            }
        }
        let entity = &entity[..len];
        match entity {
            b"lt" => self.scratch.push(b'<'),
            b"gt" => self.scratch.push(b'>'),
            b"amp" => self.scratch.push(b'&'),
            b"quot" => self.scratch.push(b'"'),
            b"apos" => self.scratch.push(b'\''),
            _ if entity.first() == Some(&b'#') => {
                let digits = &entity[1..];
                let code = if digits.first() == Some(&b'x') || digits.first() == Some(&b'X') {
                    u32::from_str_radix(
                        std::str::from_utf8(&digits[1..])
                            .map_err(|_| malformed(offset, "bad character reference"))?,
                        16,
                    )
                } else {
                    std::str::from_utf8(digits)
                        .map_err(|_| malformed(offset, "bad character reference"))?
                        .parse::<u32>()
                };
                let ch = code
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| malformed(offset, "bad character reference"))?;
                let mut utf8 = [0u8; 4];
                self.scratch.extend_from_slice(ch.encode_utf8(&mut utf8).as_bytes());
            }
            _ => {
                return Err(malformed(
                    offset,
                    format!("unknown entity &{};", String::from_utf8_lossy(entity)),
                ))
            }
        }
        Ok(())
    }
}

/// Escape character data for XML output: the inverse of this scanner's
/// entity decoding, used by the corpus generator and round-trip tests.
pub fn escape_text(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
}
