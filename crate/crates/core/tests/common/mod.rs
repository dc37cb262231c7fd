#![allow(dead_code)]

use std::path::{Path, PathBuf};

use agsr::corpus::{load_dataset, AttributeId, Dataset};
use agsr::metrics::TverskyParams;
use agsr::pipeline::{execute, load_run, PredictionRecord, RunArtifact, RunConfig, RunOptions, RunSummary};
use agsr::report::{score_run, EvaluationReport};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn params() -> TverskyParams {
    TverskyParams::new(0.8, 0.2).unwrap()
}

pub fn options(out: &Path) -> RunOptions {
    RunOptions {
        out_dir: out.to_path_buf(),
        resume: false,
        dry_run: false,
        max_records: None,
    }
}

pub fn run_with(config: &str, opts: RunOptions) -> RunSummary {
    let cfg = RunConfig::load(&fixture(config)).unwrap();
    cfg.validate().unwrap();
    execute(&cfg, &opts).unwrap()
}

pub fn run(config: &str, out: &Path) -> RunSummary {
    run_with(config, options(out))
}

pub fn gold(manifest: &str) -> Dataset {
    load_dataset(fixture(manifest)).unwrap()
}

pub fn score(dir: &Path, manifest: &str) -> (RunArtifact, EvaluationReport) {
    let art = load_run(dir).unwrap();
    let report = score_run(&art, &gold(manifest), params()).unwrap();
    (art, report)
}

/// Attribute names that appear in `prompt` but are not in `support`,
/// checked by plain lowercase substring search.
pub fn leaked_names(prompt: &str, support: &[AttributeId]) -> Vec<&'static str> {
    let lower = prompt.to_lowercase();
    AttributeId::ALL
        .into_iter()
        .filter(|a| !support.contains(a))
        .map(|a| a.name())
        .filter(|name| lower.contains(name))
        .collect()
}

pub fn record_leaks(r: &PredictionRecord) -> Option<Vec<&'static str>> {
    let prompt = r.final_prompt.as_deref()?;
    let support: Vec<AttributeId> = r.salience_vector?.support().iter().collect();
    Some(leaked_names(prompt, &support))
}
