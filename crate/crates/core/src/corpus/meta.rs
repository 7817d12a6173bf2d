//! Meta CSV: per-revision geolocation and tags.

use super::{CorpusError, GeoMeta};
use std::collections::HashMap;
use std::io::Read;

pub const META_HEADER: &str =
    "REVISION_ID,CONTINENT_CODE,COUNTRY_CODE,REGION_CODE,COUNTY_NAME,CITY_NAME,TIME_ZONE,TAGS";
const META_COLUMNS: usize = 8;

/// Geolocation and tag data keyed by revision id.
#[derive(Debug, Default)]
pub struct MetaTable {
    pub entries: HashMap<u64, (GeoMeta, Vec<String>)>,
    /// Rows dropped for having the wrong shape.
    pub skipped: u64,
}

fn cell(record: &csv::StringRecord, idx: usize) -> Option<String> {
    let v = record.get(idx)?;
    if v.is_empty() {
        None
    } else {
        Some(v.to_string())
    }
}

/// Parse the meta CSV. A malformed header is fatal; rows with the wrong
/// column count or an unparsable revision id are skipped and counted.
pub fn parse_meta<R: Read>(reader: R) -> Result<MetaTable, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut rows = csv_reader.records();
    let header = match rows.next() {
        Some(Ok(record)) => record.iter().collect::<Vec<_>>().join(","),
        Some(Err(err)) => {
            return Err(CorpusError::BadHeader {
                expected: META_HEADER,
                got: err.to_string(),
            })
        }
        None => {
            return Err(CorpusError::BadHeader {
                expected: META_HEADER,
                got: String::from("<empty file>"),
            })
        }
    };
    if header.trim_start_matches('\u{feff}') != META_HEADER {
        return Err(CorpusError::BadHeader {
            expected: META_HEADER,
            got: header,
        });
    }

    let mut table = MetaTable::default();
    for (line, row) in rows.enumerate() {
        let record = match row {
            Ok(record) => record,
            Err(_) => {
                table.skipped += 1;
                continue;
            }
        };
        if record.len() != META_COLUMNS {
            table.skipped += 1;
            continue;
        }
        let Some(revision_id) = record.get(0).and_then(|v| v.trim().parse::<u64>().ok()) else {
            table.skipped += 1;
            continue;
        };
        let geo = GeoMeta {
            continent_code: cell(&record, 1),
            country_code: cell(&record, 2),
            region_code: cell(&record, 3),
            county_name: cell(&record, 4),
            city_name: cell(&record, 5),
            time_zone: cell(&record, 6),
        };
        let tags: Vec<String> = record
            .get(7)
            .unwrap_or("")
            .split('|')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        let _ = line;
        table.entries.insert(revision_id, (geo, tags));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leeds_row_parses_to_full_geo() {
        let input = format!("{META_HEADER}\n1,EU,GB,EN,WEST_YORKSHIRE,LEEDS,GMT,\n");
        let table = parse_meta(input.as_bytes()).unwrap();
        assert_eq!(table.entries.len(), 1);
        let (geo, tags) = &table.entries[&1];
        assert_eq!(geo.continent_code.as_deref(), Some("EU"));
        assert_eq!(geo.country_code.as_deref(), Some("GB"));
        assert_eq!(geo.region_code.as_deref(), Some("EN"));
        assert_eq!(geo.county_name.as_deref(), Some("WEST_YORKSHIRE"));
        assert_eq!(geo.city_name.as_deref(), Some("LEEDS"));
        assert_eq!(geo.time_zone.as_deref(), Some("GMT"));
        assert!(tags.is_empty());
        assert_eq!(table.skipped, 0);
    }

    #[test]
    fn header_only_file_gives_empty_map() {
        let input = format!("{META_HEADER}\n");
        let table = parse_meta(input.as_bytes()).unwrap();
        assert!(table.entries.is_empty());
    }

    #[test]
    fn tags_cell_splits_on_pipe() {
        let input = format!("{META_HEADER}\n7,,,,,,,tag-a|tag-b\n");
        let table = parse_meta(input.as_bytes()).unwrap();
        let (geo, tags) = &table.entries[&7];
        assert!(geo.is_empty());
        assert_eq!(tags, &vec!["tag-a".to_string(), "tag-b".to_string()]);
    }

    #[test]
    fn bad_header_is_fatal() {
        let err = parse_meta("REVISION,NOPE\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::BadHeader { .. }));
    }

    #[test]
    fn wrong_column_count_skips_row() {
        let input = format!("{META_HEADER}\n1,EU\n2,EU,GB,EN,C,L,GMT,\nx,EU,GB,EN,C,L,GMT,\n");
        let table = parse_meta(input.as_bytes()).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert!(table.entries.contains_key(&2));
        assert_eq!(table.skipped, 2);
    }
}
