//! Label CSV: which revisions were rolled back.

use super::CorpusError;
use std::collections::HashMap;
use std::io::Read;

pub const LABEL_HEADER: &str = "REVISION_ID,ROLLBACK_REVERTED";

/// Rollback labels keyed by revision id.
#[derive(Debug, Default)]
pub struct LabelTable {
    pub entries: HashMap<u64, bool>,
    pub skipped: u64,
}

impl LabelTable {
    pub fn positives(&self) -> usize {
        self.entries.values().filter(|&&v| v).count()
    }
}

/// Parse the label CSV. The label is true iff the second column is the
/// literal `true`, case-insensitively.
pub fn parse_labels<R: Read>(reader: R) -> Result<LabelTable, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut rows = csv_reader.records();
    let header = match rows.next() {
        Some(Ok(record)) => record.iter().collect::<Vec<_>>().join(","),
        Some(Err(err)) => {
            return Err(CorpusError::BadHeader {
                expected: LABEL_HEADER,
                got: err.to_string(),
            })
        }
        None => {
            return Err(CorpusError::BadHeader {
                expected: LABEL_HEADER,
                got: String::from("<empty file>"),
            })
        }
    };
    if header.trim_start_matches('\u{feff}') != LABEL_HEADER {
        return Err(CorpusError::BadHeader {
            expected: LABEL_HEADER,
            got: header,
        });
    }

    let mut table = LabelTable::default();
    for row in rows {
        let record = match row {
            Ok(record) => record,
            Err(_) => {
                table.skipped += 1;
                continue;
            }
        };
        if record.len() != 2 {
            table.skipped += 1;
            continue;
        }
        let Some(revision_id) = record.get(0).and_then(|v| v.trim().parse::<u64>().ok()) else {
            table.skipped += 1;
            continue;
        };
        let reverted = record
            .get(1)
            .map(|v| v.trim().eq_ignore_ascii_case("true"))
            .unwrap_or(false);
        table.entries.insert(revision_id, reverted);
    }
    Ok(table)
}
