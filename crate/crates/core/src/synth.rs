//! Synthetic desk-scale corpora with planted vandalism signal.
//!
//! The generator emits the same three files the ingestion layer consumes
//! (dump XML, meta CSV, label CSV) with configurable class skew. Positive
//! revisions carry a planted comment token with probability
//! `signal_strength`, plus milder correlated signal (vandal-leaning IP
//! choices and action mix), so end-to-end ranking claims can be tested
//! without a production-sized corpus.

use crate::corpus::{
    self, parse_dump, parse_labels, parse_meta, Contributor, CorpusError, GeoMeta, RevisionRecord,
};
use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus error: {0}")]
    Corpus(#[from] CorpusError),
    #[error("generated corpus was rejected on re-parse: {0}")]
    Rejected(String),
}

/// The token planted into positive comments; never appears in decoy text.
pub const PLANTED_TOKEN: &str = "zzgraffiti";

/// File names a corpus directory is expected to contain.
pub const DUMP_FILE: &str = "dump.xml";
pub const META_FILE: &str = "meta.csv";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_revisions: usize,
    pub positive_rate: f64,
    /// Probability a positive revision carries [`PLANTED_TOKEN`].
    pub signal_strength: f64,
    pub date_range: (DateTime<Utc>, DateTime<Utc>),
    pub anon_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_revisions: 10_000,
            positive_rate: 0.0025,
            signal_strength: 0.9,
            date_range: (
                Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap(),
                Utc.with_ymd_and_hms(2016, 5, 1, 0, 0, 0).unwrap(),
            ),
            anon_rate: 0.35,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::BadConfig(m.to_string()));
        if self.n_revisions == 0 {
            return bad("n_revisions must be positive");
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad("positive_rate must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad("signal_strength must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.anon_rate) {
            return bad("anon_rate must be in [0, 1]");
        }
        if self.date_range.0 >= self.date_range.1 {
            return bad("date_range start must precede end");
        }
        Ok(())
    }
}

/// Counts reported by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSummary {
    pub revisions: u64,
    pub meta_rows: u64,
    pub label_rows: u64,
    pub positives: u64,
    pub positive_rate: f64,
}

// (continent, country, region, county, city, tz); index i serves IP pool entry i
const GEO_POOL: [(&str, &str, &str, &str, &str, &str); 12] = [
    ("EU", "GB", "EN", "WEST_YORKSHIRE", "LEEDS", "GMT"),
    ("EU", "GB", "SC", "MIDLOTHIAN", "EDINBURGH", "GMT"),
    ("EU", "DE", "BE", "BERLIN", "BERLIN", "CET"),
    ("EU", "ES", "MD", "MADRID", "MADRID", "CET"),
    ("EU", "FR", "IDF", "PARIS", "PARIS", "CET"),
    ("NA", "US", "CA", "SANTA_CLARA", "SAN_JOSE", "PST"),
    ("NA", "US", "NY", "NEW_YORK", "NEW_YORK", "EST"),
    ("NA", "CA", "ON", "TORONTO", "TORONTO", "EST"),
    ("SA", "BR", "SP", "SAO_PAULO", "SAO_PAULO", "BRT"),
    ("AS", "JP", "13", "TOKYO", "TOKYO", "JST"),
    ("AS", "IN", "MH", "MUMBAI", "MUMBAI", "IST"),
    ("OC", "AU", "NSW", "SYDNEY", "SYDNEY", "AEST"),
];

const IP_POOL: [&str; 24] = [
    // vandal-leaning subset: positives pick from these 8 most of the time
    "90.219.230.105",
    "90.219.230.17",
    "178.43.11.5",
    "178.43.208.90",
    "24.16.77.3",
    "24.16.9.140",
    "201.17.52.8",
    "201.17.99.230",
    // general pool
    "85.12.4.40",
    "85.12.200.3",
    "92.226.18.77",
    "92.226.190.2",
    "66.249.70.1",
    "66.249.70.55",
    "99.106.2.8",
    "99.106.77.190",
    "143.107.3.21",
    "143.107.90.6",
    "126.74.11.2",
    "126.74.200.43",
    "117.201.5.9",
    "117.201.88.30",
    "120.148.3.66",
    "120.148.71.12",
];
const VANDAL_IPS: usize = 8;

const USERNAMES: [&str; 20] = [
    "Aldaron", "BThompson", "CuriousCat", "DataDruid", "Edgar Allan", "Fenwick", "GraphGnome",
    "Hypatia", "ItemSmith", "JKlein", "KiwiFarmer", "LabelLord", "Mnemosyne2", "NightParser",
    "Ontologue", "PropertyPete", "QuietQuail", "RevDiff", "StatementSue", "Taxonomix",
];

const ACTIONS: [&str; 7] = [
    "wbsetdescription-add",
    "wbsetlabel-add",
    "wbsetaliases-add",
    "wbeditentity-update",
    "wbcreateclaim-create",
    "wbsetsitelink-add",
    "wbremoveclaims-remove",
];

const LANGS: [&str; 7] = ["en", "es", "de", "fr", "it", "pt", "ru"];

const TAG_POOL: [&str; 4] = ["mobile-edit", "wikidata-ui", "OAuth", "HHVM"];

const DECOY_WORDS: [&str; 48] = [
    "futbolista", "irlandes", "painter", "village", "asteroid", "railway", "composer", "sculptor",
    "province", "album", "species", "protein", "river", "commune", "settlement", "striker",
    "politician", "novelist", "highway", "glacier", "cathedral", "monastery", "island",
    "peninsula", "observatory", "premiere", "astronomer", "botanist", "district", "township",
    "ballad", "sonata", "compound", "mineral", "moth", "beetle", "orchid", "fern", "harbor",
    "lagoon", "viaduct", "aqueduct", "chancellor", "duchess", "cartographer", "lexeme",
    "gazetteer", "almanac",
];

pub fn corpus_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(DUMP_FILE),
        dir.join(META_FILE),
        dir.join(LABELS_FILE),
    )
}

/// Build the synthetic revisions in memory, fully enriched with geo, tags,
/// and labels — the ground truth the written corpus round-trips to.
pub fn synth_records(config: &SynthConfig) -> Result<Vec<RevisionRecord>, SynthError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_revisions;

    let positive_count = (n as f64 * config.positive_rate).round() as usize;
    let mut positive_mask = vec![false; n];
    for idx in rand::seq::index::sample(&mut rng, n, positive_count).iter() {
        positive_mask[idx] = true;
    }

    let span_seconds = (config.date_range.1 - config.date_range.0).num_seconds().max(1);
    let mut records = Vec::with_capacity(n);
    let mut page_counter: u64 = 0;
    let mut page_title = String::new();
    let mut page_id = 0u64;
    let mut last_rev_in_page: Option<u64> = None;

    for i in 0..n {
        if i == 0 || rng.gen_bool(0.65) {
            page_counter += 1;
            page_title = format!("Q{}", 4_000_000 + page_counter);
            page_id = 100_000 + page_counter;
            last_rev_in_page = None;
        }
        let revision_id = (i + 1) as u64;
        let timestamp = config.date_range.0
            + chrono::Duration::seconds(span_seconds * i as i64 / n as i64);
        let positive = positive_mask[i];

        let (contributor, geo) = if rng.gen_bool(config.anon_rate) {
            let ip_idx = if positive && rng.gen_bool(0.8) {
                rng.gen_range(0..VANDAL_IPS)
            } else {
                rng.gen_range(0..IP_POOL.len())
            };
            let g = GEO_POOL[ip_idx % GEO_POOL.len()];
            (
                Contributor::Anonymous {
                    ip: IP_POOL[ip_idx].to_string(),
                },
                Some(GeoMeta {
                    continent_code: Some(g.0.to_string()),
                    country_code: Some(g.1.to_string()),
                    region_code: Some(g.2.to_string()),
                    county_name: Some(g.3.to_string()),
                    city_name: Some(g.4.to_string()),
                    time_zone: Some(g.5.to_string()),
                }),
            )
        } else {
            let idx = rng.gen_range(0..USERNAMES.len());
            (
                Contributor::Named {
                    username: USERNAMES[idx].to_string(),
                    user_id: Some(1000 + idx as u64),
                },
                None,
            )
        };

        let mut tags = Vec::new();
        if rng.gen_bool(0.15) {
            let count = rng.gen_range(1..=2);
            for _ in 0..count {
                let tag = TAG_POOL[rng.gen_range(0..TAG_POOL.len())].to_string();
                if !tags.contains(&tag) {
                    tags.push(tag);
                }
            }
        }

        let comment = build_comment(&mut rng, positive, config.signal_strength);

        records.push(RevisionRecord {
            page_title: page_title.clone(),
            page_id,
            revision_id,
            parent_id: last_rev_in_page,
            timestamp,
            contributor,
            comment,
            tags,
            geo,
            label: Some(positive),
        });
        last_rev_in_page = Some(revision_id);
    }
    Ok(records)
}

fn build_comment(rng: &mut ChaCha8Rng, positive: bool, signal_strength: f64) -> String {
    let carries_signal = positive && signal_strength > 0.0 && rng.gen_bool(signal_strength);
    if !carries_signal && rng.gen_bool(0.05) {
        return String::new();
    }
    let mut words: Vec<String> = (0..rng.gen_range(1..=4))
        .map(|_| DECOY_WORDS[rng.gen_range(0..DECOY_WORDS.len())].to_string())
        .collect();
    if carries_signal {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, PLANTED_TOKEN.to_string());
    }
    let text = words.join(" ");

    let structured = if rng.gen_bool(0.9) {
        let action = if positive && rng.gen_bool(0.7) {
            ACTIONS[rng.gen_range(0..3)]
        } else {
            ACTIONS[rng.gen_range(0..ACTIONS.len())]
        };
        let lang = LANGS[rng.gen_range(0..LANGS.len())];
        format!("/* {}:{}|{} */ ", action, rng.gen_range(1..=2), lang)
    } else {
        String::new()
    };

    let links = if rng.gen_bool(0.35) {
        format!(
            " [[Property:P{}]]: [[Q{}]]",
            rng.gen_range(1..=120),
            rng.gen_range(1..=100_000)
        )
    } else {
        String::new()
    };

    format!("{structured}{text}{links}")
}

/// Serialize enriched records back into the three corpus files. Consecutive
/// records sharing a page id are grouped under one `page` element, matching
/// how the generator lays pages out.
pub fn write_corpus(records: &[RevisionRecord], dir: &Path) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir)?;
    let (dump_path, meta_path, labels_path) = corpus_paths(dir);
    let mut dump = BufWriter::new(std::fs::File::create(dump_path)?);
    let mut meta = BufWriter::new(std::fs::File::create(meta_path)?);
    let mut labels = BufWriter::new(std::fs::File::create(labels_path)?);

    writeln!(meta, "{}", corpus::META_HEADER)?;
    writeln!(labels, "{}", corpus::LABEL_HEADER)?;
    writeln!(dump, "<mediawiki>")?;

    let mut esc = String::new();
    let escape = |s: &str, esc: &mut String| {
        esc.clear();
        corpus::escape_xml_text(s, esc);
    };

    let mut open_page: Option<u64> = None;
    let mut payload = String::new();
    for record in records {
        if open_page != Some(record.page_id) {
            if open_page.is_some() {
                writeln!(dump, "  </page>")?;
            }
            escape(&record.page_title, &mut esc);
            writeln!(dump, "  <page>")?;
            writeln!(dump, "    <title>{esc}</title>")?;
            writeln!(dump, "    <ns>0</ns>")?;
            writeln!(dump, "    <id>{}</id>", record.page_id)?;
            open_page = Some(record.page_id);
        }
        writeln!(dump, "    <revision>")?;
        writeln!(dump, "      <id>{}</id>", record.revision_id)?;
        if let Some(parent) = record.parent_id {
            writeln!(dump, "      <parentid>{parent}</parentid>")?;
        }
        writeln!(
            dump,
            "      <timestamp>{}</timestamp>",
            record
                .timestamp
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        )?;
        match &record.contributor {
            Contributor::Named { username, user_id } => {
                escape(username, &mut esc);
                writeln!(dump, "      <contributor>")?;
                writeln!(dump, "        <username>{esc}</username>")?;
                if let Some(id) = user_id {
                    writeln!(dump, "        <id>{id}</id>")?;
                }
                writeln!(dump, "      </contributor>")?;
            }
            Contributor::Anonymous { ip } => {
                writeln!(dump, "      <contributor>")?;
                writeln!(dump, "        <ip>{ip}</ip>")?;
                writeln!(dump, "      </contributor>")?;
            }
        }
        if !record.comment.is_empty() {
            escape(&record.comment, &mut esc);
            writeln!(dump, "      <comment>{esc}</comment>")?;
        }
        writeln!(dump, "      <model>wikibase-item</model>")?;
        writeln!(dump, "      <format>application/json</format>")?;
        payload.clear();
        payload.push_str("{\"claims\":\"");
        for k in 0..(17 + (record.revision_id % 41) as usize) {
            payload.push((b'a' + ((record.revision_id as usize + k * 7) % 26) as u8) as char);
        }
        payload.push_str("\"}");
        escape(&payload, &mut esc);
        writeln!(dump, "      <text xml:space=\"preserve\">{esc}</text>")?;
        writeln!(dump, "    </revision>")?;

        // one meta row per revision; empty cells mean absent fields
        let empty = GeoMeta::default();
        let geo = record.geo.as_ref().unwrap_or(&empty);
        let field = |v: &Option<String>| v.clone().unwrap_or_default();
        writeln!(
            meta,
            "{},{},{},{},{},{},{},{}",
            record.revision_id,
            field(&geo.continent_code),
            field(&geo.country_code),
            field(&geo.region_code),
            field(&geo.county_name),
            field(&geo.city_name),
            field(&geo.time_zone),
            record.tags.join("|"),
        )?;

        if let Some(label) = record.label {
            writeln!(labels, "{},{}", record.revision_id, label)?;
        }
    }
    if open_page.is_some() {
        writeln!(dump, "  </page>")?;
    }
    writeln!(dump, "</mediawiki>")?;
    dump.flush()?;
    meta.flush()?;
    labels.flush()?;
    Ok(())
}

/// Generate a corpus into `dir`: dump XML, meta CSV, label CSV.
/// Deterministic: the same config writes byte-identical files.
pub fn generate(config: &SynthConfig, dir: &Path) -> Result<(), SynthError> {
    let records = synth_records(config)?;
    write_corpus(&records, dir)
}

/// Re-parse a generated corpus through the ingestion layer and report
/// counts; any parser rejection (error or skipped row/record) is an error.
pub fn validate(dir: &Path) -> Result<CorpusSummary, SynthError> {
    let (dump_path, meta_path, labels_path) = corpus_paths(dir);
    let meta = parse_meta(std::io::BufReader::new(std::fs::File::open(meta_path)?))?;
    let labels = parse_labels(std::io::BufReader::new(std::fs::File::open(labels_path)?))?;

    let mut parser = parse_dump(std::io::BufReader::new(std::fs::File::open(dump_path)?));
    let mut revisions = 0u64;
    for item in parser.by_ref() {
        item?;
        revisions += 1;
    }
    if parser.skipped() > 0 {
        return Err(SynthError::Rejected(format!(
            "dump parser skipped {} revisions",
            parser.skipped()
        )));
    }
    if meta.skipped > 0 || labels.skipped > 0 {
        return Err(SynthError::Rejected(format!(
            "csv parsers skipped {} meta rows, {} label rows",
            meta.skipped, labels.skipped
        )));
    }

    let positives = labels.positives() as u64;
    let label_rows = labels.entries.len() as u64;
    Ok(CorpusSummary {
        revisions,
        meta_rows: meta.entries.len() as u64,
        label_rows,
        positives,
        positive_rate: if label_rows == 0 {
            0.0
        } else {
            positives as f64 / label_rows as f64
        },
    })
}
