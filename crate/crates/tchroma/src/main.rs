use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tchroma::commands::{self, truth_path};
use tchroma::evaluate::{metrics_csv, parse_attacks, EvalSettings};
use tchroma::wav::{load_wav, SampleFormat};
use tchroma::{configfile, report, Error, Result};

/// Pitch- and tempo-invariant audio fingerprinting and copy detection.
#[derive(Parser)]
#[command(name = "tchroma", version)]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, env = configfile::CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn the pattern dictionary from a directory of WAVs.
    BuildDict {
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// k-means seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fingerprint new WAVs of a directory into the database.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Detect copied material in a WAV.
    Query {
        wav: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Score detection on attacked mash-ups of a synthetic corpus.
    Evaluate {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// Directory written by `synth corpus`.
        #[arg(long)]
        corpus: PathBuf,
        /// e.g. `tempo=0.8,1.25;pitch=-12,12;speed=0.9,1.1;noise=40`
        #[arg(long)]
        attacks: String,
        #[command(flatten)]
        mashup: MashupArgs,
        /// Metrics CSV path; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Time-chroma image as CSV (bins x frames).
    DumpChroma {
        wav: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration in config-file form.
    DumpConfig,
    /// Generate synthetic test material.
    #[command(subcommand)]
    Synth(Synth),
}

#[derive(Subcommand)]
enum Synth {
    /// Render a corpus of synthetic songs plus its manifest.
    Corpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 25)]
        songs: usize,
        #[arg(long, default_value_t = 60.0)]
        length: f64,
        #[arg(long, default_value_t = 1000)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
    /// Render one attacked mash-up and its ground-truth table.
    Mashup {
        #[arg(long)]
        corpus: PathBuf,
        /// Take song ids from this database instead of manifest order.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Single level, e.g. `tempo=1.2` or `none`.
        #[arg(long, default_value = "none")]
        attack: String,
        #[command(flatten)]
        mashup: MashupArgs,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
}

#[derive(Args)]
struct MashupArgs {
    #[arg(long, default_value_t = 10)]
    snippets: usize,
    #[arg(long, default_value_t = 10.0)]
    min_len: f64,
    #[arg(long, default_value_t = 20.0)]
    max_len: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl MashupArgs {
    fn settings(&self) -> EvalSettings {
        EvalSettings { snippets: self.snippets, min_len_s: self.min_len, max_len_s: self.max_len, seed: self.seed }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pcm16,
    Pcm24,
    Float32,
}

impl From<Format> for SampleFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pcm16 => SampleFormat::Pcm16,
            Format::Pcm24 => SampleFormat::Pcm24,
            Format::Float32 => SampleFormat::Float32,
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => tchroma::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = configfile::resolve(cli.config.as_deref(), &cli.set)?;
    match cli.cmd {
        Cmd::BuildDict { corpus, out, seed } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let b = commands::build_dict(&corpus, &out, &cfg)?;
            println!("{} patches, {} patterns", b.patches, b.cluster_sizes.len());
            for (i, n) in b.cluster_sizes.iter().enumerate() {
                println!("pattern {i}: {n}");
            }
        }
        Cmd::Ingest { corpus, dict, db } => {
            let s = commands::ingest(&corpus, &dict, &db, &cfg)?;
            for (id, title, n) in &s.added {
                println!("added {id} {title} ({n} fingerprints)");
            }
            for title in &s.skipped {
                println!("skipped {title} (already ingested)");
            }
        }
        Cmd::Query { wav, dict, db } => {
            let (dets, db) = commands::query(&db, &dict, &wav, &cfg)?;
            print!("{}", report::detection_records(&dets));
            eprint!("{}", report::detection_summary(&dets, &db));
        }
        Cmd::Evaluate { dict, db, corpus, attacks, mashup, out } => {
            let attacks = parse_attacks(&attacks)?;
            let rows = commands::run_evaluate(&db, &dict, &corpus, &attacks, &mashup.settings(), &cfg)?;
            emit(out.as_deref(), &metrics_csv(&rows))?;
        }
        Cmd::DumpChroma { wav, out } => emit(out.as_deref(), &commands::dump_chroma(&load_wav(&wav)?, &cfg)?)?,
        Cmd::DumpConfig => print!("{}", configfile::dump(&cfg)),
        Cmd::Synth(Synth::Corpus { dir, songs, length, seed, format }) => {
            let entries = tchroma::corpus::synth_corpus(&dir, songs, length, seed, cfg.chroma(), format.into())?;
            println!("wrote {} songs to {}", entries.len(), dir.display());
        }
        Cmd::Synth(Synth::Mashup { corpus, db, attack, mashup, out, format }) => {
            let levels = parse_attacks(&attack)?;
            let [level] = levels[..] else {
                return Err(Error::Usage("synth mashup takes exactly one attack level".into()));
            };
            let truth =
                commands::synth_mashup(&corpus, db.as_deref(), level, &mashup.settings(), &out, format.into(), &cfg)?;
            println!("wrote {} ({} snippets), truth in {}", out.display(), truth.len(), truth_path(&out).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
