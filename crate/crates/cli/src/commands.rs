//! Subcommand implementations.

use crate::{
    CliError, EvalArgs, GenArgs, GridsearchArgs, ScoreStreamArgs, ServeArgs, StackArgs, TrainArgs,
};
use chrono::{DateTime, Utc};
use revpatrol::corpus::parse_timestamp;
use revpatrol::eval::{time_split, SplitSpec};
use revpatrol::learn::{grid_search_c, LinearModel, TrainConfig, DEFAULT_C_LADDER};
use revpatrol::pipeline::{
    self, evaluate_records, ingest_dir, train_combined, train_stack,
};
use revpatrol::serve::{stream_client, ScoreOutcome, Server, StreamError};
use revpatrol::synth::{self, SynthConfig};
use revpatrol::RevisionRecord;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

fn parse_time_flag(value: &str, flag: &str) -> Result<DateTime<Utc>, CliError> {
    parse_timestamp(value).ok_or_else(|| {
        CliError::Usage(format!(
            "--{flag} {value:?} is not a date (2016-01-01) or RFC 3339 timestamp"
        ))
    })
}

fn ingest(corpus: &Path) -> Result<Vec<RevisionRecord>, CliError> {
    let (records, stats) = ingest_dir(corpus)?;
    if stats.skipped_revisions + stats.skipped_meta_rows + stats.skipped_label_rows > 0 {
        eprintln!(
            "warning: skipped {} revisions, {} meta rows, {} label rows",
            stats.skipped_revisions, stats.skipped_meta_rows, stats.skipped_label_rows
        );
    }
    Ok(records)
}

pub fn gen(args: GenArgs) -> Result<(), CliError> {
    let start = parse_time_flag(&args.start, "start")?;
    let end = parse_time_flag(&args.end, "end")?;
    let config = SynthConfig {
        n_revisions: args.n,
        positive_rate: args.positive_rate,
        signal_strength: args.signal,
        date_range: (start, end),
        anon_rate: args.anon_rate,
        seed: args.seed,
    };
    synth::generate(&config, &args.out).map_err(|e| match e {
        synth::SynthError::BadConfig(msg) => CliError::Usage(msg),
        other => CliError::Data(other.to_string()),
    })?;
    let summary = synth::validate(&args.out)?;
    println!(
        "generated {} revisions ({} positives, rate {:.4}%) in {}",
        summary.revisions,
        summary.positives,
        summary.positive_rate * 100.0,
        args.out.display()
    );
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let train_end = parse_time_flag(&args.train_end, "train-end")?;
    let records = ingest(&args.corpus)?;
    let train_slice: Vec<RevisionRecord> = records
        .into_iter()
        .filter(|r| r.timestamp < train_end)
        .collect();
    let config = TrainConfig {
        c: args.c,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let model = train_combined(&train_slice, args.bits, &config)?;
    model.save(&args.model)?;
    let nonzero = model.weights.iter().filter(|&&w| w != 0.0).count();
    println!(
        "trained on {} records: dim {}, {} nonzero weights, c {}, wrote {}",
        train_slice.len(),
        model.dim(),
        nonzero,
        args.c,
        args.model.display()
    );
    Ok(())
}

fn parse_candidates(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|piece| {
            let piece = piece.trim();
            piece
                .parse::<f64>()
                .ok()
                .filter(|c| *c > 0.0 && c.is_finite())
                .ok_or_else(|| {
                    CliError::Usage(format!("--candidates entry {piece:?} is not a positive number"))
                })
        })
        .collect()
}

pub fn gridsearch(args: GridsearchArgs) -> Result<(), CliError> {
    let train_end = parse_time_flag(&args.train_end, "train-end")?;
    let valid_end = parse_time_flag(&args.valid_end, "valid-end")?;
    let spec = SplitSpec::new(train_end, valid_end)
        .map_err(|_| CliError::Usage("--train-end must precede --valid-end".to_string()))?;
    let candidates = match &args.candidates {
        Some(raw) => parse_candidates(raw)?,
        None => DEFAULT_C_LADDER.to_vec(),
    };

    let records = ingest(&args.corpus)?;
    let (train_records, valid_records, _) = time_split(records, spec);
    let train_set = pipeline::hashed_dataset(&pipeline::labeled_examples(&train_records), args.bits)?;
    let valid_set = pipeline::hashed_dataset(&pipeline::labeled_examples(&valid_records), args.bits)?;

    let base = TrainConfig {
        seed: args.seed,
        ..TrainConfig::default()
    };
    let outcome = grid_search_c(&train_set, &valid_set, &candidates, &base)?;

    let mut report = String::from("c,train_seconds,roc_auc\n");
    for row in &outcome.rows {
        match row.auc {
            Some(auc) => {
                report.push_str(&format!("{},{:.3},{:.6}\n", row.c, row.seconds, auc));
            }
            None => {
                report.push_str(&format!("{},{:.3},\n", row.c, row.seconds));
                if let Some(error) = &row.error {
                    eprintln!("candidate {}: {error}", row.c);
                }
            }
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, &report)?,
        None => print!("{report}"),
    }
    println!("best c {} (roc_auc {:.6})", outcome.best_c, outcome.best_auc);
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let train_end = parse_time_flag(&args.train_end, "train-end")?;
    let valid_end = parse_time_flag(&args.valid_end, "valid-end")?;
    let spec = SplitSpec::new(train_end, valid_end)
        .map_err(|_| CliError::Usage("--train-end must precede --valid-end".to_string()))?;

    let model = LinearModel::load(&args.model)?;
    let records = ingest(&args.corpus)?;
    let (train_records, valid_records, test_records) = time_split(records, spec);
    let slice = match args.split.as_str() {
        "train" => train_records,
        "valid" => valid_records,
        "test" => test_records,
        "all" => {
            let mut all = train_records;
            all.extend(valid_records);
            all.extend(test_records);
            all
        }
        other => return Err(CliError::Usage(format!("unknown split {other:?}"))),
    };

    let report = evaluate_records(&model, &slice, args.threshold)?;
    println!("{report}");
    println!("{}", revpatrol::EvalReport::CSV_HEADER);
    println!("{}", report.to_csv_line());
    if let Some(path) = &args.out {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "{}", revpatrol::EvalReport::CSV_HEADER)?;
        writeln!(file, "{}", report.to_csv_line())?;
    }
    Ok(())
}

fn family_model_filename(family: revpatrol::Family) -> &'static str {
    match family {
        revpatrol::Family::Title => "title.model",
        revpatrol::Family::User => "user.model",
        revpatrol::Family::CommentStruct => "comment_struct.model",
        revpatrol::Family::CommentLink => "comment_links.model",
        revpatrol::Family::CommentText => "comment_text.model",
    }
}

pub fn stack(args: StackArgs) -> Result<(), CliError> {
    let train_end = parse_time_flag(&args.train_end, "train-end")?;
    let records = ingest(&args.corpus)?;
    let train_slice: Vec<RevisionRecord> = records
        .into_iter()
        .filter(|r| r.timestamp < train_end)
        .collect();

    let base = TrainConfig::default();
    let trained = train_stack(&train_slice, args.bits, &base, args.l2, args.seed)?;

    std::fs::create_dir_all(&args.out)?;
    for (family, model) in &trained.stack.family_models {
        model.save(&args.out.join(family_model_filename(*family)))?;
    }
    trained.stack.stacker.save(&args.out.join("stacker.model"))?;

    println!("family,oof_roc_auc");
    for (family, auc) in trained.family_oof_auc()? {
        println!("{},{:.6}", family.as_str(), auc);
    }
    println!("stacker,{:.6}", trained.stacker_oof_auc()?);
    println!("wrote 6 models to {}", args.out.display());
    Ok(())
}

/// Raised by SIGINT/SIGTERM; polled by the serve loop.
static SIGNAL_SEEN: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_signal: libc::c_int) {
    SIGNAL_SEEN.store(true, Ordering::SeqCst);
}

fn install_signal_handlers() {
    unsafe {
        libc::signal(libc::SIGINT, on_signal as *const () as usize);
        libc::signal(libc::SIGTERM, on_signal as *const () as usize);
    }
}

pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let model = Arc::new(LinearModel::load(&args.model)?);
    let server = Server::bind(&args.listen, model)?;
    let addr = server.local_addr()?;
    install_signal_handlers();

    let shutdown = Arc::new(AtomicBool::new(false));
    let watcher_flag = Arc::clone(&shutdown);
    std::thread::spawn(move || loop {
        if SIGNAL_SEEN.load(Ordering::SeqCst) {
            watcher_flag.store(true, Ordering::SeqCst);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    });

    println!("listening on {addr}");
    server.run(shutdown)?;
    println!("shut down");
    Ok(())
}

pub fn score_stream(args: ScoreStreamArgs) -> Result<(), CliError> {
    let records = ingest(&args.corpus)?;
    let outcome = stream_client(&args.connect, &records, args.window);

    let write_lines = |lines: &[(u64, ScoreOutcome)], out: &Option<PathBuf>| -> Result<(), CliError> {
        let mut sink: Box<dyn Write> = match out {
            Some(path) => Box::new(std::fs::File::create(path)?),
            None => Box::new(std::io::stdout().lock()),
        };
        for (id, score) in lines {
            match score {
                ScoreOutcome::Score(text) => writeln!(sink, "{id}\t{text}")?,
                ScoreOutcome::ServerError => writeln!(sink, "{id}\tERROR")?,
            }
        }
        Ok(())
    };

    match outcome {
        Ok(lines) => {
            write_lines(&lines, &args.out)?;
            Ok(())
        }
        Err(StreamError::ConnectionLost { received, reason }) => {
            write_lines(&received, &args.out)?;
            Err(CliError::Data(format!(
                "connection lost after {} responses: {reason}",
                received.len()
            )))
        }
        Err(other) => Err(CliError::Data(other.to_string())),
    }
}
