//! Wire encoding for the scoring protocol.
//!
//! Frames are a 4-byte big-endian length followed by that many UTF-8 payload
//! bytes, capped at 16 MiB. A payload is one revision in canonical text
//! form: one `key<TAB>value` line per populated field, keys in fixed
//! alphabetical order, tags pipe-joined and geo fields flattened to dotted
//! keys. Values escape backslash, tab, newline, and carriage return so the
//! form stays line-oriented for arbitrary comments.

use crate::corpus::{Contributor, GeoMeta, RevisionRecord};
use chrono::{SecondsFormat, Utc};

/// Frames larger than this are a protocol violation.
pub const MAX_FRAME_BYTES: u32 = 16 * 1024 * 1024;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WireError {
    #[error("payload has no revision_id")]
    MissingRevisionId,
    #[error("bad field `{key}`: {reason}")]
    BadField { key: String, reason: String },
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_BYTES}-byte cap")]
    FrameTooLarge(u64),
}

fn escape_value(value: &str, out: &mut String) {
    for ch in value.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(ch),
        }
    }
}

fn unescape_value(value: &str) -> Result<String, String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape \\{}", other.map_or(String::from("<eof>"), |c| c.to_string()))),
        }
    }
    Ok(out)
}

/// Serialize a record to the canonical payload. Absent optional fields are
/// omitted entirely; an empty comment or empty tag list counts as absent.
pub fn encode_record(record: &RevisionRecord) -> Vec<u8> {
    let mut out = String::new();
    let line = |key: &str, value: &str, out: &mut String| {
        out.push_str(key);
        out.push('\t');
        escape_value(value, out);
        out.push('\n');
    };

    // keys in fixed alphabetical order
    if !record.comment.is_empty() {
        line("comment", &record.comment, &mut out);
    }
    if let Some(geo) = &record.geo {
        // present_fields yields declaration order; re-emit alphabetically
        let mut fields: Vec<(&str, &str)> = geo.present_fields().collect();
        fields.sort_unstable_by_key(|&(k, _)| k);
        for (key, value) in fields {
            line(&format!("geo.{key}"), value, &mut out);
        }
    }
    if let Contributor::Anonymous { ip } = &record.contributor {
        line("ip", ip, &mut out);
    }
    if let Some(label) = record.label {
        line("label", if label { "true" } else { "false" }, &mut out);
    }
    line("page_id", &record.page_id.to_string(), &mut out);
    line("page_title", &record.page_title, &mut out);
    if let Some(parent) = record.parent_id {
        line("parent_id", &parent.to_string(), &mut out);
    }
    line("revision_id", &record.revision_id.to_string(), &mut out);
    if !record.tags.is_empty() {
        line("tags", &record.tags.join("|"), &mut out);
    }
    line(
        "timestamp",
        &record
            .timestamp
            .to_rfc3339_opts(SecondsFormat::Secs, true),
        &mut out,
    );
    if let Contributor::Named { username, user_id } = &record.contributor {
        if let Some(id) = user_id {
            line("user_id", &id.to_string(), &mut out);
        }
        line("username", username, &mut out);
    }
    out.into_bytes()
}

/// Parse a canonical payload back into a record.
pub fn decode_record(payload: &[u8]) -> Result<RevisionRecord, WireError> {
    let text = std::str::from_utf8(payload).map_err(|_| WireError::BadField {
        key: String::from("<payload>"),
        reason: String::from("not UTF-8"),
    })?;

    let mut comment = String::new();
    let mut geo = GeoMeta::default();
    let mut has_geo = false;
    let mut ip: Option<String> = None;
    let mut label: Option<bool> = None;
    let mut page_id: Option<u64> = None;
    let mut page_title: Option<String> = None;
    let mut parent_id: Option<u64> = None;
    let mut revision_id: Option<u64> = None;
    let mut tags: Vec<String> = Vec::new();
    let mut timestamp: Option<chrono::DateTime<Utc>> = None;
    let mut user_id: Option<u64> = None;
    let mut username: Option<String> = None;

    for raw_line in text.lines() {
        if raw_line.is_empty() {
            continue;
        }
        let (key, raw_value) = raw_line.split_once('\t').ok_or_else(|| WireError::BadField {
            key: raw_line.chars().take(32).collect(),
            reason: String::from("line has no tab separator"),
        })?;
        let bad = |reason: &str| WireError::BadField {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        let value = unescape_value(raw_value).map_err(|reason| WireError::BadField {
            key: key.to_string(),
            reason,
        })?;
        let parse_u64 = |v: &str| v.parse::<u64>().map_err(|_| bad("not an integer"));

        match key {
            "comment" => comment = value,
            "geo.city_name" => {
                geo.city_name = Some(value);
                has_geo = true;
            }
            "geo.continent_code" => {
                geo.continent_code = Some(value);
                has_geo = true;
            }
            "geo.country_code" => {
                geo.country_code = Some(value);
                has_geo = true;
            }
            "geo.county_name" => {
                geo.county_name = Some(value);
                has_geo = true;
            }
            "geo.region_code" => {
                geo.region_code = Some(value);
                has_geo = true;
            }
            "geo.time_zone" => {
                geo.time_zone = Some(value);
                has_geo = true;
            }
            "ip" => ip = Some(value),
            "label" => {
                label = Some(match value.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad("label must be true or false")),
                })
            }
            "page_id" => page_id = Some(parse_u64(&value)?),
            "page_title" => page_title = Some(value),
            "parent_id" => parent_id = Some(parse_u64(&value)?),
            "revision_id" => revision_id = Some(parse_u64(&value)?),
            "tags" => tags = value.split('|').filter(|t| !t.is_empty()).map(str::to_string).collect(),
            "timestamp" => {
                timestamp = Some(
                    chrono::DateTime::parse_from_rfc3339(&value)
                        .map_err(|_| bad("bad timestamp"))?
                        .with_timezone(&Utc),
                )
            }
            "user_id" => user_id = Some(parse_u64(&value)?),
            "username" => username = Some(value),
            _ => {
                return Err(WireError::BadField {
                    key: key.to_string(),
                    reason: String::from("unknown key"),
                })
            }
        }
    }

    let revision_id = revision_id.ok_or(WireError::MissingRevisionId)?;
    let field_missing = |key: &str| WireError::BadField {
        key: key.to_string(),
        reason: String::from("required field missing"),
    };
    let contributor = match (username, ip) {
        (Some(username), None) => Contributor::Named { username, user_id },
        (None, Some(ip)) => Contributor::Anonymous { ip },
        (Some(_), Some(_)) => {
            return Err(WireError::BadField {
                key: String::from("username/ip"),
                reason: String::from("record has both a username and an ip"),
            })
        }
        (None, None) => return Err(field_missing("username/ip")),
    };

    Ok(RevisionRecord {
        page_title: page_title.ok_or_else(|| field_missing("page_title"))?,
        page_id: page_id.ok_or_else(|| field_missing("page_id"))?,
        revision_id,
        parent_id,
        timestamp: timestamp.ok_or_else(|| field_missing("timestamp"))?,
        contributor,
        comment,
        tags,
        geo: if has_geo { Some(geo) } else { None },
        label,
    })
}

/// Best-effort revision id extraction from a payload that failed to decode,
/// so the error response can still name the revision.
pub fn salvage_revision_id(payload: &[u8]) -> Option<u64> {
    let text = std::str::from_utf8(payload).ok()?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("revision_id\t") {
            return rest.parse().ok();
        }
    }
    None
}

/// A complete frame: big-endian length header plus payload.
pub fn encode_frame(payload: &[u8]) -> Result<Vec<u8>, WireError> {
    if payload.len() as u64 > u64::from(MAX_FRAME_BYTES) {
        return Err(WireError::FrameTooLarge(payload.len() as u64));
    }
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(payload);
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn minimal_record() -> RevisionRecord {
        RevisionRecord {
            page_title: "Q1".to_string(),
            page_id: 7,
            revision_id: 42,
            parent_id: None,
            timestamp: Utc.with_ymd_and_hms(2016, 3, 1, 10, 22, 33).unwrap(),
            contributor: Contributor::Named {
                username: "Alice".to_string(),
                user_id: None,
            },
            comment: String::new(),
            tags: Vec::new(),
            geo: None,
            label: None,
        }
    }

    #[test]
    fn minimal_record_round_trips() {
        let record = minimal_record();
        let payload = encode_record(&record);
        assert_eq!(decode_record(&payload).unwrap(), record);
    }

    #[test]
    fn full_record_round_trips_with_sorted_keys() {
        let mut record = minimal_record();
        record.parent_id = Some(41);
        record.contributor = Contributor::Anonymous {
            ip: "90.219.230.105".to_string(),
        };
        record.comment = "/* wbsdescription-add:1|es */ tab\there".to_string();
        record.tags = vec!["mobile-edit".to_string(), "OAuth".to_string()];
        record.geo = Some(GeoMeta {
            continent_code: Some("EU".to_string()),
            country_code: Some("GB".to_string()),
            region_code: Some("EN".to_string()),
            county_name: Some("WEST_YORKSHIRE".to_string()),
            city_name: Some("LEEDS".to_string()),
            time_zone: Some("GMT".to_string()),
        });
        record.label = Some(true);

        let payload = encode_record(&record);
        assert_eq!(decode_record(&payload).unwrap(), record);

        let text = String::from_utf8(payload).unwrap();
        let keys: Vec<&str> = text
            .lines()
            .map(|l| l.split('\t').next().unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted, "keys must be emitted alphabetically");
    }

    #[test]
    fn missing_revision_id_is_reported() {
        let payload = b"page_id\t1\npage_title\tQ1\n";
        assert_eq!(
            decode_record(payload),
            Err(WireError::MissingRevisionId)
        );
    }

    #[test]
    fn unknown_key_and_double_contributor_are_bad_fields() {
        let mut record = minimal_record();
        record.comment = "x".to_string();
        let mut payload = encode_record(&record);
        payload.extend_from_slice(b"wat\t1\n");
        assert!(matches!(
            decode_record(&payload),
            Err(WireError::BadField { .. })
        ));

        let mut payload = encode_record(&minimal_record());
        payload.extend_from_slice(b"ip\t1.2.3.4\n");
        assert!(matches!(
            decode_record(&payload),
            Err(WireError::BadField { .. })
        ));
    }

    #[test]
    fn salvage_finds_the_id_in_broken_payloads() {
        let payload = b"revision_id\t99\nbroken line without tab\n";
        assert_eq!(salvage_revision_id(payload), Some(99));
        assert_eq!(salvage_revision_id(b"nope\t1\n"), None);
    }

    #[test]
    fn frame_header_is_big_endian_length() {
        let frame = encode_frame(b"hello").unwrap();
        assert_eq!(&frame[..4], &[0, 0, 0, 5]);
        assert_eq!(&frame[4..], b"hello");
    }

    prop_compose! {
        fn arb_record()(
            page_title in "[A-Za-z0-9 _:()]{1,20}",
            page_id in 0u64..1_000_000,
            revision_id in 1u64..u64::MAX / 2,
            parent in proptest::option::of(0u64..1_000_000),
            secs in 1_420_070_400i64..1_462_060_800,
            anon in any::<bool>(),
            username in "[A-Za-z][A-Za-z0-9 ]{0,15}",
            user_id in proptest::option::of(1u64..100_000),
            octets in [0u8..=255, 0u8..=255, 0u8..=255, 0u8..=255],
            comment in ".{0,60}",
            tags in proptest::collection::vec("[a-zA-Z-]{1,12}", 0..4),
            with_geo in any::<bool>(),
            city in proptest::option::of("[A-Z_]{1,12}"),
            country in proptest::option::of("[A-Z]{2}"),
            label in proptest::option::of(any::<bool>()),
        ) -> RevisionRecord {
            let contributor = if anon {
                Contributor::Anonymous {
                    ip: format!("{}.{}.{}.{}", octets[0], octets[1], octets[2], octets[3]),
                }
            } else {
                Contributor::Named { username, user_id }
            };
            let geo = if with_geo && (city.is_some() || country.is_some()) {
                Some(GeoMeta { city_name: city, country_code: country, ..GeoMeta::default() })
            } else {
                None
            };
            RevisionRecord {
                page_title,
                page_id,
                revision_id,
                parent_id: parent,
                timestamp: Utc.timestamp_opt(secs, 0).unwrap(),
                contributor,
                comment,
                tags,
                geo,
                label,
            }
        }
    }

    proptest! {
        #[test]
        fn encode_decode_round_trips(record in arb_record()) {
            let payload = encode_record(&record);
            prop_assert_eq!(decode_record(&payload).unwrap(), record);
        }
    }
}
