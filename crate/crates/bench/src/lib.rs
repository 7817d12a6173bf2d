//! Shared fixtures for the pipeline benchmarks.

use revpatrol::synth::{synth_records, SynthConfig};
use revpatrol::RevisionRecord;

pub fn bench_records(n: usize) -> Vec<RevisionRecord> {
    synth_records(&SynthConfig {
        n_revisions: n,
        positive_rate: 0.01,
        seed: 99,
        ..SynthConfig::default()
    })
    .expect("benchmark corpus config is valid")
}
