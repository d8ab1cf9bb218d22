use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use emokit::cli::{
    cmd_evaluate, cmd_extract, cmd_matchscore, cmd_predict, cmd_synth, cmd_train, Config,
};
use emokit::dataset::EmotionLabel;
use emokit::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "emokit", about = "Speech emotion recognition on speaker embeddings")]
struct Cli {
    /// JSON config file (falls back to $EMOKIT_CONFIG, then defaults)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// SVM regularization C override
    #[arg(long, global = true)]
    c: Option<f64>,
    /// RBF gamma override
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Embedding backend override ("spectral" or "file:<emb1 path>")
    #[arg(long, global = true)]
    backend: Option<String>,
    /// First class split off by the hierarchical head
    #[arg(long, global = true)]
    first_class: Option<EmotionLabel>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract utterance embeddings from a manifest CSV into an EMB1 file
    Extract {
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train a classifier head on a speaker-disjoint split of an EMB1 file
    Train {
        embeddings: PathBuf,
        /// flat | hierarchical | detector
        #[arg(long, default_value = "hierarchical")]
        head: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate a trained bundle on the held-out side of the split
    Evaluate {
        bundle: PathBuf,
        embeddings: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Predict labels for every row of an EMB1 file
    Predict {
        bundle: PathBuf,
        embeddings: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Cosine match-score experiment (per-emotion vs neutral baselines)
    Matchscore {
        embeddings: PathBuf,
        /// Output prefix; writes <prefix>.csv and <prefix>.json
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate a deterministic synthetic embedding corpus
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        manifest_out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        speakers: usize,
        #[arg(long, default_value_t = 5)]
        utterances_per_cell: usize,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 0.6)]
        emotion_scale: f64,
        #[arg(long, default_value_t = 0.2)]
        noise_scale: f64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut config = Config::resolve(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(c) = cli.c {
        config.c = c;
    }
    if let Some(gamma) = cli.gamma {
        config.gamma = gamma;
    }
    if let Some(backend) = cli.backend {
        config.backend = backend;
    }
    if let Some(first) = cli.first_class {
        config.first_class = first;
    }

    match cli.command {
        Command::Extract { manifest, out } => {
            let report = cmd_extract(&manifest, &out, &config)?;
            println!(
                "wrote {} embeddings to {} ({} skipped)",
                report.written,
                out.display(),
                report.skipped.len()
            );
        }
        Command::Train { embeddings, head, out } => {
            let report = cmd_train(&embeddings, &head, &out, &config)?;
            println!(
                "trained {} head on {} rows ({} held out) -> {}",
                report.head,
                report.n_train,
                report.n_test,
                out.display()
            );
        }
        Command::Evaluate { bundle, embeddings, out } => {
            let report = cmd_evaluate(&bundle, &embeddings, &out, &config)?;
            println!("{report}");
            println!("report written to {}", out.display());
        }
        Command::Predict { bundle, embeddings, out } => {
            let n = cmd_predict(&bundle, &embeddings, &out)?;
            println!("wrote {n} predictions to {}", out.display());
        }
        Command::Matchscore { embeddings, out } => {
            let result = cmd_matchscore(&embeddings, &out, &config)?;
            for (kind, stats) in result.box_stats() {
                println!(
                    "{kind}: n={} median={:.4} q1={:.4} q3={:.4} outliers={}",
                    stats.n, stats.median, stats.q1, stats.q3, stats.n_outliers
                );
            }
            println!(
                "wrote {} and {}",
                out.with_extension("csv").display(),
                out.with_extension("json").display()
            );
        }
        Command::Synth {
            out,
            manifest_out,
            speakers,
            utterances_per_cell,
            dim,
            emotion_scale,
            noise_scale,
        } => {
            let synth = SynthConfig {
                n_speakers: speakers,
                utterances_per_cell,
                dim,
                emotion_offset_scale: emotion_scale,
                noise_scale,
                seed: config.seed,
                ..SynthConfig::default()
            };
            let n = cmd_synth(&synth, &out, manifest_out.as_deref())?;
            println!("wrote {n} synthetic embeddings to {}", out.display());
        }
    }
    Ok(())
}
