//! Streaming ingestion of revision dumps, meta CSV, and label CSV.
//!
//! The three inputs are parsed independently and joined on `revision_id`:
//!
//! * the XML dump ([`parse_dump`]) yields one [`RevisionRecord`] per
//!   `<revision>` element without ever buffering the `<text>` payload;
//! * the meta CSV ([`parse_meta`]) carries geolocation for anonymous
//!   contributors plus revision tags;
//! * the label CSV ([`parse_labels`]) marks revisions that were rolled back.
//!
//! Malformed rows and structurally incomplete revisions are skipped and
//! counted instead of aborting the run; truly malformed XML is fatal and
//! reported with a byte offset.

mod dump;
mod labels;
mod meta;
mod xml;

pub use dump::{parse_dump, DumpParser};
pub use labels::{parse_labels, LabelTable, LABEL_HEADER};
pub use meta::{parse_meta, MetaTable, META_HEADER};
pub use xml::escape_text as escape_xml_text;

use chrono::{DateTime, Utc};

/// Errors produced while ingesting corpus files.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    /// The XML structure is broken or uses a construct the dump format
    /// does not contain. Fatal for the stream.
    #[error("malformed xml at byte {offset}: {reason}")]
    MalformedXml { offset: u64, reason: String },
    /// A revision lacked a required field. The record is skipped and
    /// counted; the stream continues.
    #[error("missing field `{field}` near byte {offset}")]
    MissingField { field: &'static str, offset: u64 },
    /// CSV header line does not match the expected schema.
    #[error("bad header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: &'static str, got: String },
    /// A CSV row had the wrong shape. The row is skipped and counted.
    #[error("bad row {line}: {reason}")]
    BadRow { line: u64, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Who made a revision: a logged-in user or an anonymous IP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Contributor {
    Named {
        username: String,
        user_id: Option<u64>,
    },
    /// `ip` is always a dotted quad of decimal octets 0-255.
    Anonymous { ip: String },
}

impl Contributor {
    pub fn is_anonymous(&self) -> bool {
        matches!(self, Contributor::Anonymous { .. })
    }
}

/// Geolocation attached to anonymous contributors via the meta CSV.
/// Absent fields stay `None`; they are never coerced to empty strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeoMeta {
    pub continent_code: Option<String>,
    pub country_code: Option<String>,
    pub region_code: Option<String>,
    pub county_name: Option<String>,
    pub city_name: Option<String>,
    pub time_zone: Option<String>,
}

impl GeoMeta {
    pub fn is_empty(&self) -> bool {
        self.continent_code.is_none()
            && self.country_code.is_none()
            && self.region_code.is_none()
            && self.county_name.is_none()
            && self.city_name.is_none()
            && self.time_zone.is_none()
    }

    /// Fields as `(key, value)` pairs in declaration order, present ones only.
    pub fn present_fields(&self) -> impl Iterator<Item = (&'static str, &str)> {
        [
            ("continent_code", self.continent_code.as_deref()),
            ("country_code", self.country_code.as_deref()),
            ("region_code", self.region_code.as_deref()),
            ("county_name", self.county_name.as_deref()),
            ("city_name", self.city_name.as_deref()),
            ("time_zone", self.time_zone.as_deref()),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
    }
}

/// One parsed revision, optionally enriched with meta and label data.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionRecord {
    pub page_title: String,
    pub page_id: u64,
    pub revision_id: u64,
    pub parent_id: Option<u64>,
    pub timestamp: DateTime<Utc>,
    pub contributor: Contributor,
    pub comment: String,
    pub tags: Vec<String>,
    pub geo: Option<GeoMeta>,
    /// `Some(true)` means the revision was rolled back (vandalism).
    pub label: Option<bool>,
}

/// Enrich a revision stream with meta and label data, keyed on `revision_id`.
///
/// Records without a matching entry pass through unchanged; absence is not an
/// error. Order and length are preserved, including `Err` items.
pub fn join<'a, I>(
    revisions: I,
    meta: &'a MetaTable,
    labels: &'a LabelTable,
) -> impl Iterator<Item = Result<RevisionRecord, CorpusError>> + 'a
where
    I: Iterator<Item = Result<RevisionRecord, CorpusError>> + 'a,
{
    revisions.map(move |item| {
        item.map(|mut record| {
            if let Some((geo, tags)) = meta.entries.get(&record.revision_id) {
                if !geo.is_empty() {
                    record.geo = Some(geo.clone());
                }
                record.tags = tags.clone();
            }
            if let Some(&label) = labels.entries.get(&record.revision_id) {
                record.label = Some(label);
            }
            record
        })
    })
}

/// Validate a dotted-quad IPv4 string: four '.'-separated decimal octets 0-255.
pub(crate) fn is_dotted_quad(ip: &str) -> bool {
    let mut octets = 0;
    for piece in ip.split('.') {
        if piece.is_empty() || piece.len() > 3 || !piece.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
        match piece.parse::<u16>() {
            Ok(v) if v <= 255 => octets += 1,
            _ => return false,
        }
    }
    octets == 4
}

/// Parse an ISO-8601 timestamp; a bare date means midnight UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    let date = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    Some(DateTime::from_naive_utc_and_offset(
        date.and_hms_opt(0, 0, 0)?,
        Utc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn record(id: u64) -> RevisionRecord {
        RevisionRecord {
            page_title: "Q1".to_string(),
            page_id: 1,
            revision_id: id,
            parent_id: None,
            timestamp: Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap(),
            contributor: Contributor::Named {
                username: "Alice".to_string(),
                user_id: Some(7),
            },
            comment: String::new(),
            tags: Vec::new(),
            geo: None,
            label: None,
        }
    }

    #[test]
    fn dotted_quad_validation() {
        assert!(is_dotted_quad("90.219.230.105"));
        assert!(is_dotted_quad("0.0.0.0"));
        assert!(is_dotted_quad("255.255.255.255"));
        assert!(!is_dotted_quad("256.1.1.1"));
        assert!(!is_dotted_quad("1.2.3"));
        assert!(!is_dotted_quad("1.2.3.4.5"));
        assert!(!is_dotted_quad("a.b.c.d"));
        assert!(!is_dotted_quad("1..2.3"));
        assert!(!is_dotted_quad(""));
    }

    #[test]
    fn timestamp_bare_date_is_midnight_utc() {
        let ts = parse_timestamp("2015-01-01").unwrap();
        assert_eq!(ts, Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap());
        let ts = parse_timestamp("2016-03-01T10:22:33Z").unwrap();
        assert_eq!(ts, Utc.with_ymd_and_hms(2016, 3, 1, 10, 22, 33).unwrap());
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn join_enriches_matching_ids_only() {
        // 3 records, meta for 2 of them, labels for 1.
        let meta = MetaTable {
            entries: [
                (
                    1,
                    (
                        GeoMeta {
                            country_code: Some("GB".to_string()),
                            ..GeoMeta::default()
                        },
                        vec!["tag-a".to_string()],
                    ),
                ),
                (2, (GeoMeta::default(), vec!["tag-b".to_string()])),
            ]
            .into_iter()
            .collect(),
            skipped: 0,
        };
        let labels = LabelTable {
            entries: [(1, true)].into_iter().collect(),
            skipped: 0,
        };
        let input: Vec<Result<RevisionRecord, CorpusError>> =
            vec![Ok(record(1)), Ok(record(2)), Ok(record(3))];
        let out: Vec<_> = join(input.into_iter(), &meta, &labels)
            .map(|r| r.unwrap())
            .collect();

        assert_eq!(out.len(), 3);
        assert_eq!(out[0].revision_id, 1);
        assert_eq!(out[0].geo.as_ref().unwrap().country_code.as_deref(), Some("GB"));
        assert_eq!(out[0].tags, vec!["tag-a"]);
        assert_eq!(out[0].label, Some(true));
        // meta with empty geo attaches tags but leaves geo = None
        assert!(out[1].geo.is_none());
        assert_eq!(out[1].tags, vec!["tag-b"]);
        assert_eq!(out[1].label, None);
        // untouched record passes through unchanged
        assert_eq!(out[2], record(3));
    }

    #[test]
    fn join_preserves_length_and_order() {
        let meta = MetaTable::default();
        let labels = LabelTable::default();
        let input: Vec<Result<RevisionRecord, CorpusError>> =
            (0..100).map(|i| Ok(record(i))).collect();
        let out: Vec<_> = join(input.into_iter(), &meta, &labels).collect();
        assert_eq!(out.len(), 100);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap().revision_id, i as u64);
        }
    }
}
