//! Stage orchestration: ingest → clean → impute → label → windows, plus
//! the analysis reports. Every artifact is produced in memory first and then
//! written through `.partial` files, so an aborted run never leaves a file
//! that looks complete.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{missingness_report, per_class_correlation};
use crate::config::PipelineConfig;
use crate::impute::{imputation_trace, impute_all, write_trace_csv, ImputationReport};
use crate::ingest::{inventory, parse_csv, write_canonical_csv, write_inventory_csv, SubjectSeries};
use crate::label::LabeledSeries;
use crate::quality::{clean, QualityReport};
use crate::series::Channel;
use crate::window_file::encode_windows;
use crate::windows::{build_datasets, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Clean,
    Impute,
    Label,
    Windows,
    Analyze,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Clean => "clean",
            Stage::Impute => "impute",
            Stage::Label => "label",
            Stage::Windows => "windows",
            Stage::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Run through this stage and emit everything produced so far.
    Through(Stage),
    /// Every stage and every report.
    All,
}

impl Target {
    fn runs(self, stage: Stage) -> bool {
        match self {
            Target::All => true,
            Target::Through(Stage::Analyze) => stage != Stage::Windows,
            Target::Through(last) => stage <= last,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{stage} stage failed{}: {message}", .subject.as_ref().map(|s| format!(" for subject {s}")).unwrap_or_default())]
    Stage {
        stage: Stage,
        subject: Option<String>,
        message: String,
    },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn stage_err(stage: Stage, e: impl fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        subject: None,
        message: e.to_string(),
    }
}

/// Named output files, keyed by path relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts {
    pub files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(Path::new(name)).map(Vec::as_slice)
    }

    /// Writes every file as `<name>.partial`, then renames them all once
    /// every write has succeeded.
    pub fn write_to(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| PipelineError::Io { path, source }
        };
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let final_path = out_dir.join(name);
            if let Some(parent) = final_path.parent() {
                std::fs::create_dir_all(parent).map_err(io(parent))?;
            }
            let mut partial = final_path.clone().into_os_string();
            partial.push(".partial");
            let partial = PathBuf::from(partial);
            std::fs::write(&partial, bytes).map_err(io(&partial))?;
            staged.push((partial, final_path));
        }
        for (partial, final_path) in staged {
            std::fs::rename(&partial, &final_path).map_err(io(&final_path))?;
        }
        Ok(())
    }
}

/// Filesystem-safe stem for a subject's per-subject files.
pub fn file_stem(series: &SubjectSeries) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    format!("{}__{}", clean(&series.dataset_tag), clean(&series.subject_id))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("in-memory csv write");
    buf
}

/// Reads and aligns every configured input, sorted by (dataset_tag, subject_id).
pub fn load_inputs(cfg: &PipelineConfig, artifacts: &mut Artifacts) -> Result<Vec<SubjectSeries>, PipelineError> {
    if cfg.input.paths.is_empty() {
        return Err(stage_err(Stage::Ingest, "no input paths configured"));
    }
    let mut series = Vec::new();
    let mut diag = csv::Writer::from_writer(Vec::new());
    diag.write_record(["file", "line", "message"])
        .expect("in-memory csv write");
    for path in &cfg.input.paths {
        let file = File::open(path).map_err(|e| stage_err(Stage::Ingest, format!("{}: {e}", path.display())))?;
        let outcome = parse_csv(BufReader::new(file), &cfg.schema)
            .map_err(|e| stage_err(Stage::Ingest, format!("{}: {e}", path.display())))?;
        log::info!(
            "ingest {}: {} rows, {} skipped, {} duplicate timestamps, {} subjects",
            path.display(),
            outcome.rows_read,
            outcome.rows_skipped(),
            outcome.conflicts,
            outcome.series.len()
        );
        for d in &outcome.diagnostics {
            log::warn!("{}:{}: {}", path.display(), d.line, d.message);
            diag.write_record([path.display().to_string(), d.line.to_string(), d.message.clone()])
                .expect("in-memory csv write");
        }
        series.extend(outcome.series);
    }
    series.sort_by(|a, b| a.key().cmp(&b.key()));
    if let Some(w) = series.windows(2).find(|w| w[0].key() == w[1].key()) {
        return Err(PipelineError::Stage {
            stage: Stage::Ingest,
            subject: Some(w[0].subject_id.clone()),
            message: format!(
                "subject appears in more than one input under dataset {}",
                w[0].dataset_tag
            ),
        });
    }
    artifacts.add(
        "ingest_diagnostics.csv",
        diag.into_inner().expect("in-memory csv flush"),
    );
    Ok(series)
}

/// Runs the pipeline on already-loaded series.
pub fn run_on_series(
    cfg: &PipelineConfig,
    series: Vec<SubjectSeries>,
    target: Target,
    mut artifacts: Artifacts,
) -> Result<Artifacts, PipelineError> {
    cfg.validate()?;
    log::info!("stage ingest: {} subjects", series.len());
    artifacts.add(
        "inventory.csv",
        csv_bytes(|b| write_inventory_csv(&inventory(&series), b)),
    );
    for s in &series {
        artifacts.add(
            format!("series/{}.csv", file_stem(s)),
            csv_bytes(|b| write_canonical_csv(s, b)),
        );
    }
    if target == Target::Through(Stage::Ingest) {
        return Ok(artifacts);
    }

    let cleaned: Vec<SubjectSeries> = if cfg.raw_mode {
        log::info!("stage clean: skipped (raw mode)");
        series
    } else {
        let results: Vec<(SubjectSeries, QualityReport)> =
            series.into_par_iter().map(|s| clean(s, &cfg.quality)).collect();
        let mut report = QualityReport::default();
        let mut out = Vec::with_capacity(results.len());
        for (s, r) in results {
            report.merge(r);
            out.push(s);
        }
        log::info!("stage clean: {} values masked", report.total_masked());
        artifacts.add("quality_report.csv", csv_bytes(|b| report.write_csv(b)));
        out
    };
    if target == Target::Through(Stage::Clean) {
        return Ok(artifacts);
    }

    let imputed: Vec<SubjectSeries> = if cfg.raw_mode {
        log::info!("stage impute: skipped (raw mode)");
        cleaned.clone()
    } else {
        let results: Vec<(SubjectSeries, ImputationReport)> =
            cleaned.par_iter().map(|s| impute_all(s.clone(), &cfg.impute)).collect();
        let mut report = ImputationReport::default();
        let mut out = Vec::with_capacity(results.len());
        for (s, r) in results {
            report.merge(r);
            out.push(s);
        }
        let filled: usize = report.rows.iter().map(|r| r.slots_filled()).sum();
        log::info!("stage impute: {filled} slots filled");
        artifacts.add("imputation_report.csv", csv_bytes(|b| report.write_csv(b)));
        if cfg.write_trace {
            let traces: Vec<_> = cleaned
                .iter()
                .flat_map(|s| {
                    s.channels()
                        .map(|c| (s.subject_id.clone(), c, imputation_trace(s, c, &cfg.impute)))
                        .collect::<Vec<_>>()
                })
                .collect();
            artifacts.add("imputation_trace.csv", csv_bytes(|b| write_trace_csv(&traces, b)));
        }
        out
    };
    if target == Target::Through(Stage::Impute) {
        return Ok(artifacts);
    }

    let labeled: Vec<LabeledSeries> = imputed
        .par_iter()
        .map(|s| LabeledSeries::new(s.clone(), cfg.label.threshold))
        .collect();
    log::info!("stage label: {} subjects labeled", labeled.len());
    for l in &labeled {
        artifacts.add(
            format!("labeled/{}.csv", file_stem(&l.series)),
            csv_bytes(|b| l.write_csv(b)),
        );
    }

    if target.runs(Stage::Windows) {
        let datasets = build_datasets(&labeled, &cfg.windows, cfg.seed).map_err(|e| stage_err(Stage::Windows, e))?;
        let m = &datasets.manifest;
        for split in Split::ALL {
            let bytes = encode_windows(
                datasets.get(split),
                m.window_length,
                cfg.windows.channels.count(),
                m.label_set_size,
            )
            .map_err(|e| stage_err(Stage::Windows, e))?;
            log::info!("stage windows: {split} {} windows", datasets.get(split).len());
            artifacts.add(format!("{}.diaw", split.as_str()), bytes);
        }
        artifacts.add("split_manifest.json", m.to_json().into_bytes());
    }

    if target.runs(Stage::Analyze) {
        let report =
            missingness_report(&cleaned, &imputed, &cfg.impute.gaps).map_err(|e| stage_err(Stage::Analyze, e))?;
        artifacts.add("missingness.csv", csv_bytes(|b| report.write_csv(b)));
        artifacts.add("missingness.txt", report.summary_table().into_bytes());
        if labeled.iter().all(|l| l.series.channel(Channel::HeartRate).is_some()) && !labeled.is_empty() {
            let corr = per_class_correlation(&labeled).map_err(|e| stage_err(Stage::Analyze, e))?;
            artifacts.add("correlation.csv", csv_bytes(|b| corr.write_csv(b)));
            artifacts.add("correlation.txt", corr.summary_table().into_bytes());
        } else {
            log::info!("stage analyze: correlation skipped, heart rate not present for every subject");
        }
    }
    Ok(artifacts)
}

/// Loads inputs and runs up to `target`, returning artifacts in memory.
pub fn run_pipeline(cfg: &PipelineConfig, target: Target) -> Result<Artifacts, PipelineError> {
    cfg.validate()?;
    let mut artifacts = Artifacts::default();
    let series = load_inputs(cfg, &mut artifacts)?;
    run_on_series(cfg, series, target, artifacts)
}
