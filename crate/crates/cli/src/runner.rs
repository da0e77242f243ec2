use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use entangle_core::metrics::RunMetadata;
use entangle_core::netstate::StateTrace;
use entangle_core::{
    run_experiment_with_jobs, run_trial_observed, LatencySeries, NetworkState, Request, SimError,
    TrialObserver,
};
use serde::Serialize;
use serde_json::json;

use crate::document::{ExperimentDocument, Overrides, ResolvedVariant};
use crate::CliError;

pub const BUILD: &str = env!("ENTSIM_BUILD");

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    pub trace: bool,
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub label: String,
    pub csv: Option<PathBuf>,
    pub meta: PathBuf,
    pub failed_trials: usize,
    pub series: Option<LatencySeries>,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub variants: Vec<VariantOutcome>,
}

impl RunReport {
    pub fn any_failed(&self) -> bool {
        self.variants.iter().any(|v| v.failed_trials > 0)
    }
}

fn outputs(dir: &Path, label: &str, trace: bool) -> Vec<PathBuf> {
    let mut v = vec![
        dir.join(format!("{label}.csv")),
        dir.join(format!("{label}.meta.json")),
    ];
    if trace {
        v.push(dir.join(format!("{label}.trace.jsonl")));
    }
    v
}

/// Runs every variant of `doc`, writing `<label>.csv` and `<label>.meta.json`
/// per variant under `opts.out_dir`. Trials that hit the step cap are left
/// out of the CSV and counted in the metadata.
pub fn run_document(
    doc: &ExperimentDocument,
    base_dir: &Path,
    overrides: Overrides,
    opts: &RunOptions,
) -> Result<RunReport, CliError> {
    let variants = doc.resolve(base_dir, overrides)?;
    if !opts.force {
        for v in &variants {
            if let Some(p) = outputs(&opts.out_dir, &v.label, opts.trace).into_iter().find(|p| p.exists()) {
                return Err(CliError::WouldOverwrite(p));
            }
        }
    }
    fs::create_dir_all(&opts.out_dir).map_err(|e| CliError::io(&opts.out_dir, e))?;

    let mut report = RunReport::default();
    for v in &variants {
        report.variants.push(run_variant(doc, v, opts)?);
    }
    Ok(report)
}

fn run_variant(
    doc: &ExperimentDocument,
    v: &ResolvedVariant,
    opts: &RunOptions,
) -> Result<VariantOutcome, CliError> {
    let paths = outputs(&opts.out_dir, &v.label, opts.trace);
    let (csv_path, meta_path) = (&paths[0], &paths[1]);

    let (series, failed) = match run_experiment_with_jobs(&v.config, &v.topology, &v.traffic, opts.jobs) {
        Ok(exp) => (Some(exp.series), exp.failed.len()),
        Err(SimError::AllTrialsFailed(n)) => (None, n),
        Err(e) => return Err(CliError::Config(format!("{}: {e}", v.label))),
    };
    if let Some(s) = &series {
        let f = File::create(csv_path).map_err(|e| CliError::io(csv_path, e))?;
        s.write_csv(BufWriter::new(f))
            .map_err(|e| CliError::Output(format!("{}: {e}", csv_path.display())))?;
    } else if csv_path.exists() {
        fs::remove_file(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    }

    let meta = RunMetadata {
        label: v.label.clone(),
        scheme: v.config.scheme.kind.name().to_owned(),
        seed: v.config.seed,
        trials: v.config.trials,
        failed_trials: failed,
        build: BUILD.to_owned(),
        config: json!({
            "experiment": doc.name,
            "requests": doc.requests,
            "sim": v.config,
            "topology": v.topology.to_document(),
        }),
    };
    write_json(meta_path, &meta)?;

    if opts.trace {
        write_trace(v, &paths[2])?;
    }
    Ok(VariantOutcome {
        label: v.label.clone(),
        csv: series.is_some().then(|| csv_path.clone()),
        meta: meta_path.clone(),
        failed_trials: failed,
        series,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    active_request: Option<usize>,
    #[serde(flatten)]
    state: &'a StateTrace,
}

struct TraceWriter<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> TrialObserver for TraceWriter<W> {
    fn on_step(&mut self, _t: u64, active: Option<&Request>, state: &NetworkState<'_>) {
        if self.error.is_some() {
            return;
        }
        let trace = state.trace();
        let line = TraceLine {
            active_request: active.map(|r| r.index),
            state: &trace,
        };
        let res = serde_json::to_writer(&mut self.out, &line)
            .map_err(std::io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = res {
            self.error = Some(e);
        }
    }
}

/// Per-step network state of trial 0, one JSON object per line.
fn write_trace(v: &ResolvedVariant, path: &Path) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = TraceWriter {
        out: BufWriter::new(f),
        error: None,
    };
    // A capped trial still leaves a useful trace.
    let _ = run_trial_observed(&v.config, &v.topology, &v.traffic, 0, &mut w);
    if let Some(e) = w.error {
        return Err(CliError::io(path, e));
    }
    w.out.flush().map_err(|e| CliError::io(path, e))
}
