//! Manifest-driven pipeline commands behind the command-line front end.
//!
//! Each command is an ordinary function so the pipeline can be driven from
//! tests as well as from the binary. All outputs are deterministic given
//! identical inputs, config and seed.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::audio::{read_wav, resample, AudioError};
use crate::dataset::{EmotionLabel, LabeledEmbedding, FOUR_CLASS};
use crate::embed::{
    extract_utterance_embedding, make_backend, EmbedError, EmbedderConfig, Embedding,
};
use crate::emotion::{
    config_hash, train_detector, train_flat, train_hierarchical, ClassifierBundle, ClfError,
    DetectorClass,
};
use crate::eval::{evaluate, split_speaker_disjoint, EvalError, EvalReport, SplitSpec};
use crate::matchscore::{run_matchscore_experiment, MatchError};
use crate::store::{load_embeddings, save_embeddings, StoreError};
use crate::svm::TrainParams;
use crate::synth::{gen_synthetic_corpus, SynthConfig, SynthError};
use crate::NOMINAL_SAMPLE_RATE;

/// Environment variable holding a default config file path.
pub const CONFIG_ENV: &str = "EMOKIT_CONFIG";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("manifest is empty: {0}")]
    EmptyManifest(String),
    #[error("manifest row {row}: {reason}")]
    BadManifestRow { row: usize, reason: String },
    #[error("all {0} manifest rows failed extraction")]
    AllRowsFailed(usize),
    #[error("unknown head {0}; expected flat, hierarchical or detector")]
    UnknownHead(String),
    #[error("unknown backend {0}; expected 'spectral' or 'file:<path>'")]
    UnknownBackend(String),
    #[error("embedding for utterance {0} not found in backend file")]
    MissingEmbedding(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Flat JSON config; CLI flags override file values, file values override
/// these defaults (the paper's constants where it states them).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub frame_len: usize,
    pub hop: usize,
    pub dim: usize,
    pub backend: String,
    pub seed: u64,
    pub c: f64,
    pub gamma: f64,
    pub kkt_tol: f64,
    pub first_class: EmotionLabel,
    pub train_fraction: f64,
    pub speaker_disjoint: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            frame_len: 22_000,
            hop: 220,
            dim: 256,
            backend: "spectral".to_string(),
            seed: 42,
            c: 1000.0,
            gamma: 0.1,
            kkt_tol: 1e-3,
            first_class: EmotionLabel::Sad,
            train_fraction: 0.8,
            speaker_disjoint: true,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Config, CliError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Explicit path, else the `EMOKIT_CONFIG` environment variable,
    /// else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Config, CliError> {
        if let Some(p) = path {
            return Config::load(p);
        }
        if let Ok(p) = std::env::var(CONFIG_ENV) {
            if !p.is_empty() {
                return Config::load(p);
            }
        }
        Ok(Config::default())
    }

    pub fn embedder(&self) -> EmbedderConfig {
        EmbedderConfig {
            frame_len: self.frame_len,
            hop: self.hop,
            dim: self.dim,
            backend: self.backend.clone(),
            seed: self.seed,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            c: self.c,
            gamma: self.gamma,
            kkt_tol: self.kkt_tol,
            seed: self.seed,
            ..TrainParams::default()
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
            speaker_disjoint: self.speaker_disjoint,
        }
    }
}

/// One parsed manifest row: `path,speaker_id,utterance_id,emotion,sentence_id,split`.
#[derive(Debug, Clone)]
pub struct ManifestRow {
    pub path: String,
    pub speaker_id: String,
    pub utterance_id: String,
    pub emotion: EmotionLabel,
    pub sentence_id: Option<String>,
    pub split: Option<String>,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>, CliError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let mut rows = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let emotion: EmotionLabel = field(3)
            .parse()
            .map_err(|e: String| CliError::BadManifestRow { row: i + 1, reason: e })?;
        let utterance_id = field(2);
        if !seen_ids.insert(utterance_id.clone()) {
            return Err(CliError::BadManifestRow {
                row: i + 1,
                reason: format!("duplicate utterance_id {utterance_id}"),
            });
        }
        let opt = |s: String| if s.is_empty() { None } else { Some(s) };
        rows.push(ManifestRow {
            path: field(0),
            speaker_id: field(1),
            utterance_id,
            emotion,
            sentence_id: opt(field(4)),
            split: opt(field(5)),
        });
    }
    if rows.is_empty() {
        return Err(CliError::EmptyManifest(path.display().to_string()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipEntry {
    pub utterance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractReport {
    pub written: usize,
    pub skipped: Vec<SkipEntry>,
    pub config_hash: String,
}

/// Extract one embedding per manifest row into an EMB1 file. Rows that are
/// too short (or unreadable) are collected in the skip report; the command
/// only fails outright when every row does.
pub fn cmd_extract(
    manifest_path: &Path,
    out_path: &Path,
    config: &Config,
) -> Result<ExtractReport, CliError> {
    let manifest = read_manifest(manifest_path)?;
    let embedder = config.embedder();
    embedder.validate()?;

    // "file:<path>" serves precomputed utterance embeddings keyed by
    // utterance id; anything else is a frame-level backend.
    let precomputed: Option<BTreeMap<String, Embedding>> =
        if let Some(emb_path) = config.backend.strip_prefix("file:") {
            let rows = load_embeddings(Path::new(emb_path))?;
            Some(rows.into_iter().map(|r| (r.utterance_id, r.embedding)).collect())
        } else {
            None
        };
    let backend = if precomputed.is_none() {
        Some(make_backend(&embedder, NOMINAL_SAMPLE_RATE)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for m in &manifest {
        let embedding = if let Some(map) = &precomputed {
            match map.get(&m.utterance_id) {
                Some(e) => Ok(e.clone()),
                None => Err(CliError::MissingEmbedding(m.utterance_id.clone())),
            }
        } else {
            read_wav(&m.path)
                .map_err(CliError::from)
                .map(|clip| resample(&clip, NOMINAL_SAMPLE_RATE))
                .and_then(|clip| {
                    extract_utterance_embedding(
                        &clip,
                        &embedder,
                        backend.as_deref().expect("backend built"),
                    )
                    .map_err(CliError::from)
                })
        };
        match embedding {
            Ok(e) => rows.push(LabeledEmbedding {
                embedding: e,
                speaker_id: m.speaker_id.clone(),
                utterance_id: m.utterance_id.clone(),
                emotion: m.emotion,
                sentence_id: m.sentence_id.clone(),
            }),
            Err(e) => {
                log::warn!("skipping {}: {e}", m.utterance_id);
                skipped.push(SkipEntry { utterance_id: m.utterance_id.clone(), reason: e.to_string() });
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::AllRowsFailed(manifest.len()));
    }
    let written = save_embeddings(&rows, out_path)?;
    let report = ExtractReport {
        written,
        skipped,
        config_hash: config_hash(&config.train_params()),
    };
    let report_path = skip_report_path(out_path);
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

pub fn skip_report_path(out_path: &Path) -> PathBuf {
    let mut os = out_path.as_os_str().to_owned();
    os.push(".skips.json");
    PathBuf::from(os)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub head: String,
    pub classes: Vec<String>,
    pub class_counts: BTreeMap<String, usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub split_seed: u64,
    pub params: TrainParams,
    pub config_hash: String,
}

/// Train one head on the train side of a speaker-disjoint split and write
/// the bundle directory plus a JSON train report.
pub fn cmd_train(
    embeddings_path: &Path,
    head: &str,
    bundle_dir: &Path,
    config: &Config,
) -> Result<TrainReport, CliError> {
    let data = load_embeddings(embeddings_path)?;
    let spec = config.split_spec();
    let (train, test) = split_speaker_disjoint(&data, &spec)?;
    let params = config.train_params();

    let bundle = match head {
        "flat" => ClassifierBundle::Flat(train_flat(&train, &params)?),
        "hierarchical" => ClassifierBundle::Hierarchical(train_hierarchical(
            &train,
            config.first_class,
            &params,
        )?),
        "detector" => {
            let four: Vec<LabeledEmbedding> = train
                .iter()
                .filter(|r| FOUR_CLASS.contains(&r.emotion))
                .cloned()
                .collect();
            ClassifierBundle::Detector(train_detector(&four, &params)?)
        }
        other => return Err(CliError::UnknownHead(other.to_string())),
    };
    bundle.save(bundle_dir, &params)?;

    let mut class_counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &train {
        *class_counts.entry(r.emotion.to_string()).or_insert(0) += 1;
    }
    let report = TrainReport {
        head: head.to_string(),
        classes: class_counts.keys().cloned().collect(),
        class_counts,
        n_train: train.len(),
        n_test: test.len(),
        split_seed: spec.seed,
        params: params.clone(),
        config_hash: config_hash(&params),
    };
    fs::write(bundle_dir.join("train_report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Evaluate a bundle on the test side of the same seeded split. The report
/// is written as JSON; the returned value renders the plain-text table.
pub fn cmd_evaluate(
    bundle_dir: &Path,
    embeddings_path: &Path,
    out_json: &Path,
    config: &Config,
) -> Result<EvalReport<String>, CliError> {
    let (bundle, _manifest) = ClassifierBundle::load(bundle_dir)?;
    let data = load_embeddings(embeddings_path)?;
    let (_train, test) = split_speaker_disjoint(&data, &config.split_spec())?;
    let test: Vec<LabeledEmbedding> = test
        .into_iter()
        .filter(|r| FOUR_CLASS.contains(&r.emotion))
        .collect();

    let report: EvalReport<String> = match &bundle {
        ClassifierBundle::Detector(_) => {
            let pairs: Vec<(Embedding, String)> = test
                .iter()
                .map(|r| {
                    let truth = if r.emotion == EmotionLabel::Neutral {
                        DetectorClass::Neutral
                    } else {
                        DetectorClass::EmotionPresent
                    };
                    (r.embedding.clone(), truth.to_string())
                })
                .collect();
            let classes =
                vec![DetectorClass::Neutral.to_string(), DetectorClass::EmotionPresent.to_string()];
            evaluate(
                |x: &Embedding| -> Result<String, ClfError> {
                    crate::emotion::predict_detector(
                        match &bundle {
                            ClassifierBundle::Detector(m) => m,
                            _ => unreachable!(),
                        },
                        x,
                    )
                    .map(|c| c.to_string())
                },
                &pairs,
                &classes,
                0,
            )?
        }
        _ => {
            let pairs: Vec<(Embedding, String)> =
                test.iter().map(|r| (r.embedding.clone(), r.emotion.to_string())).collect();
            let classes: Vec<String> = FOUR_CLASS.iter().map(|c| c.to_string()).collect();
            evaluate(
                |x: &Embedding| -> Result<String, ClfError> {
                    bundle.predict_label(x).map(|l| l.to_string())
                },
                &pairs,
                &classes,
                0,
            )?
        }
    };
    let wrapped = serde_json::json!({
        "config_hash": config_hash(&config.train_params()),
        "report": report,
    });
    fs::write(out_json, serde_json::to_string_pretty(&wrapped)?)?;
    Ok(report)
}

/// Predictions as CSV rows `utterance_id,predicted`.
pub fn cmd_predict(
    bundle_dir: &Path,
    embeddings_path: &Path,
    out_csv: &Path,
) -> Result<usize, CliError> {
    let (bundle, _) = ClassifierBundle::load(bundle_dir)?;
    let data = load_embeddings(embeddings_path)?;
    let mut out = String::from("utterance_id,predicted\n");
    let mut n = 0;
    for r in &data {
        let label = match &bundle {
            ClassifierBundle::Detector(m) => {
                crate::emotion::predict_detector(m, &r.embedding)?.to_string()
            }
            other => other.predict_label(&r.embedding)?.to_string(),
        };
        out.push_str(&format!("{},{label}\n", r.utterance_id));
        n += 1;
    }
    fs::write(out_csv, out)?;
    Ok(n)
}

/// Match-score experiment over an embeddings file; writes `<prefix>.csv`
/// (raw scores) and `<prefix>.json` (box stats per pairing kind).
pub fn cmd_matchscore(
    embeddings_path: &Path,
    out_prefix: &Path,
    config: &Config,
) -> Result<crate::matchscore::ExperimentResult, CliError> {
    let data = load_embeddings(embeddings_path)?;
    let result = run_matchscore_experiment(&data, config.seed)?;
    result.write_csv(out_prefix.with_extension("csv"))?;
    let json_path = out_prefix.with_extension("json");
    result.write_boxstats_json(&json_path)?;
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
    let wrapped = serde_json::json!({
        "config_hash": config_hash(&config.train_params()),
        "box_stats": stats,
    });
    fs::write(&json_path, serde_json::to_string_pretty(&wrapped)?)?;
    Ok(result)
}

/// Generate a synthetic corpus as EMB1 plus an optional manifest CSV.
pub fn cmd_synth(
    synth: &SynthConfig,
    out_path: &Path,
    manifest_out: Option<&Path>,
) -> Result<usize, CliError> {
    let rows = gen_synthetic_corpus(synth)?;
    let written = save_embeddings(&rows, out_path)?;
    if let Some(manifest_path) = manifest_out {
        let mut out = String::from("path,speaker_id,utterance_id,emotion,sentence_id,split\n");
        for r in &rows {
            out.push_str(&format!(
                ",{},{},{},{},\n",
                r.speaker_id,
                r.utterance_id,
                r.emotion,
                r.sentence_id.clone().unwrap_or_default()
            ));
        }
        fs::write(manifest_path, out)?;
    }
    Ok(written)
}
