//! Model file format.
//!
//! Layout: magic bytes `VSVM1\n`, a text header (`dim`, `bits`, `c`, `loss`,
//! `trained_at`, one `key value` per line), a blank line, then `dim`
//! little-endian 32-bit floats. Weights are stored as f32 for footprint; a
//! save/load/save cycle is byte-identical.

use super::{LearnError, LinearModel, LossKind};
use chrono::{DateTime, SecondsFormat, Utc};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"VSVM1\n";

fn io_err(e: std::io::Error) -> LearnError {
    LearnError::Io(e.to_string())
}

pub fn write_to<W: Write>(model: &LinearModel, mut writer: W) -> Result<(), LearnError> {
    writer.write_all(MAGIC).map_err(io_err)?;
    writeln!(writer, "dim {}", model.weights.len()).map_err(io_err)?;
    match model.bits {
        Some(bits) => writeln!(writer, "bits {bits}").map_err(io_err)?,
        None => writeln!(writer, "bits none").map_err(io_err)?,
    }
    writeln!(writer, "c {}", model.c).map_err(io_err)?;
    writeln!(writer, "loss {}", model.loss.as_str()).map_err(io_err)?;
    writeln!(
        writer,
        "trained_at {}",
        model.trained_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    )
    .map_err(io_err)?;
    writeln!(writer).map_err(io_err)?;
    for &w in &model.weights {
        writer
            .write_all(&(w as f32).to_le_bytes())
            .map_err(io_err)?;
    }
    Ok(())
}

pub fn read_from<R: Read>(reader: R) -> Result<LinearModel, LearnError> {
    let mut reader = BufReader::new(reader);
    let bad = |reason: &str| LearnError::BadModelFile(reason.to_string());

    let mut magic = [0u8; 6];
    reader.read_exact(&mut magic).map_err(io_err)?;
    if magic != MAGIC {
        return Err(bad("wrong magic bytes"));
    }

    // header: `key value` lines up to a blank line
    let mut dim: Option<usize> = None;
    let mut bits: Option<Option<u32>> = None;
    let mut c: Option<f64> = None;
    let mut loss: Option<LossKind> = None;
    let mut trained_at: Option<DateTime<Utc>> = None;
    loop {
        let mut line = String::new();
        let mut byte = [0u8; 1];
        loop {
            reader.read_exact(&mut byte).map_err(|_| bad("truncated header"))?;
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0] as char);
            if line.len() > 256 {
                return Err(bad("header line too long"));
            }
        }
        if line.is_empty() {
            break;
        }
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| bad("header line without value"))?;
        match key {
            "dim" => dim = Some(value.parse().map_err(|_| bad("bad dim"))?),
            "bits" => {
                bits = Some(if value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("bad bits"))?)
                })
            }
            "c" => c = Some(value.parse().map_err(|_| bad("bad c"))?),
            "loss" => loss = Some(LossKind::parse(value).ok_or_else(|| bad("bad loss"))?),
            "trained_at" => {
                trained_at = Some(
                    DateTime::parse_from_rfc3339(value)
                        .map_err(|_| bad("bad trained_at"))?
                        .with_timezone(&Utc),
                )
            }
            _ => return Err(bad("unknown header key")),
        }
    }
    let dim = dim.ok_or_else(|| bad("missing dim"))?;
    let bits = bits.ok_or_else(|| bad("missing bits"))?;
    let c = c.ok_or_else(|| bad("missing c"))?;
    let loss = loss.ok_or_else(|| bad("missing loss"))?;
    let trained_at = trained_at.ok_or_else(|| bad("missing trained_at"))?;

    let mut weights = Vec::with_capacity(dim);
    let mut buf = [0u8; 4];
    for _ in 0..dim {
        reader
            .read_exact(&mut buf)
            .map_err(|_| bad("truncated weights"))?;
        let w = f32::from_le_bytes(buf);
        if !w.is_finite() {
            return Err(bad("non-finite weight"));
        }
        weights.push(f64::from(w));
    }
    if reader.read(&mut buf).map_err(io_err)? != 0 {
        return Err(bad("trailing bytes after weights"));
    }

    Ok(LinearModel::new(weights, bits, c, loss).with_trained_at(trained_at))
}

pub fn save(model: &LinearModel, path: &Path) -> Result<(), LearnError> {
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    write_to(model, &mut writer)?;
    writer.flush().map_err(io_err)
}

pub fn load(path: &Path) -> Result<LinearModel, LearnError> {
    let file = std::fs::File::open(path).map_err(io_err)?;
    read_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn sample_model() -> LinearModel {
        LinearModel::new(
            vec![0.5, -1.25, 0.0, 3.0e-3],
            Some(22),
            0.5,
            LossKind::SquaredHinge,
        )
        .with_trained_at(Utc.with_ymd_and_hms(2016, 4, 30, 23, 59, 59).unwrap())
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let model = sample_model();
        let mut first = Vec::new();
        write_to(&model, &mut first).unwrap();
        let loaded = read_from(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_to(&loaded, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(loaded.bits, Some(22));
        assert_eq!(loaded.c, 0.5);
        assert_eq!(loaded.loss, LossKind::SquaredHinge);
        assert_eq!(loaded.trained_at, model.trained_at);
    }

    #[test]
    fn header_is_human_readable() {
        let mut bytes = Vec::new();
        write_to(&sample_model(), &mut bytes).unwrap();
        let text = String::from_utf8_lossy(&bytes[..bytes.len() - 16]);
        assert!(text.starts_with("VSVM1\n"));
        assert!(text.contains("dim 4\n"));
        assert!(text.contains("bits 22\n"));
        assert!(text.contains("c 0.5\n"));
        assert!(text.contains("loss squared_hinge\n"));
        assert!(text.contains("trained_at 2016-04-30T23:59:59Z\n"));
    }

    #[test]
    fn dict_models_store_bits_none() {
        let model = LinearModel::new(vec![1.0], None, 1.0, LossKind::Logistic);
        let mut bytes = Vec::new();
        write_to(&model, &mut bytes).unwrap();
        let loaded = read_from(bytes.as_slice()).unwrap();
        assert_eq!(loaded.bits, None);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(matches!(
            read_from(b"NOPE1\n".as_slice()),
            Err(LearnError::Io(_)) | Err(LearnError::BadModelFile(_))
        ));
        let mut bytes = Vec::new();
        write_to(&sample_model(), &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(
            read_from(bytes.as_slice()),
            Err(LearnError::BadModelFile(_))
        ));
        let mut bytes = Vec::new();
        write_to(&sample_model(), &mut bytes).unwrap();
        bytes.push(0);
        assert!(matches!(
            read_from(bytes.as_slice()),
            Err(LearnError::BadModelFile(_))
        ));
    }

    #[test]
    fn full_width_model_fits_the_disk_budget() {
        // a 2^22-bucket model plus intercept stays well under 64 MB
        let dim = (1usize << 22) + 1;
        let header_bound = 128;
        assert!(dim * 4 + header_bound <= 64 * 1024 * 1024);
    }
}
