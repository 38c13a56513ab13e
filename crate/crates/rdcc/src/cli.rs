//! `rdcc` subcommands. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rdcc_core::corpus::Document;
use rdcc_core::dictionary::Lexicon;
use rdcc_core::synthetic::{generate, SyntheticConfig};
use rdcc_core::trainer::TrainConfig;

use crate::io::{self, write_atomic};
use crate::{config, model_file, run, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rdcc", version, about = "Residual dilated CNN + CRF tagger for clinical entities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it with its per-epoch history.
    Train(TrainArgs),
    /// Tag raw text or corpus records; writes JSON lines.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Lexicon TSV used for dictionary features.
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against gold records.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the dictionary feature of every character.
    DictTag {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export a corpus as char<TAB>tag columns.
    Columns {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the synthetic corpus (train.jsonl, test.jsonl, lexicon.tsv).
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        train_clauses: usize,
        #[arg(long, default_value_t = 100)]
        test_clauses: usize,
    },
    /// Print the effective run configuration as a config file.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
        /// key=value override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Lexicon TSV; without it every dictionary feature is None.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to <out>.history.csv.
    #[arg(long)]
    history: Option<PathBuf>,
    /// `key = value` run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// left (dilated only), right (standard only) or both.
    #[arg(long)]
    branches: Option<String>,
    /// Drop the identity skip around each residual block.
    #[arg(long)]
    no_residual: bool,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    dilation_base: Option<usize>,
    #[arg(long)]
    std_filters: Option<usize>,
    #[arg(long)]
    std_window: Option<usize>,
    #[arg(long)]
    char_dim: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    constrained: bool,
    /// key=value override of any config key, repeatable; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// No per-epoch progress on standard error.
    #[arg(long)]
    quiet: bool,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push(format!("{key}={v}"));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(|v| v.to_string()));
        push("branches", self.branches.clone());
        push("residual", self.no_residual.then(|| "false".into()));
        push("blocks", self.blocks.map(|v| v.to_string()));
        push("filters", self.filters.map(|v| v.to_string()));
        push("window", self.window.map(|v| v.to_string()));
        push("dilation_base", self.dilation_base.map(|v| v.to_string()));
        push("std_filters", self.std_filters.map(|v| v.to_string()));
        push("std_window", self.std_window.map(|v| v.to_string()));
        push("char_dim", self.char_dim.map(|v| v.to_string()));
        push("feature_dim", self.feature_dim.map(|v| v.to_string()));
        push("constrained_decoding", self.constrained.then(|| "true".into()));
        out.extend(self.overrides.iter().cloned());
        out
    }
}

fn run_config(file: Option<&Path>, overrides: &[String]) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    if let Some(path) = file {
        config::apply_file(&mut c, path, &io::read_to_string(path)?)?;
    }
    config::apply_overrides(&mut c, overrides)?;
    Ok(c)
}

fn lexicon(path: Option<&Path>) -> Result<Lexicon> {
    path.map_or_else(|| Ok(Lexicon::new()), io::read_lexicon)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

fn history_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".history.csv");
    PathBuf::from(s)
}

fn train(args: &TrainArgs) -> Result<()> {
    let config = run_config(args.config.as_deref(), &args.overrides())?;
    config.validate()?;
    let corpus = io::read_corpus(&args.train)?;
    let lex = lexicon(args.dict.as_deref())?;
    let quiet = args.quiet;
    let (model, history) = run::train_timed(&corpus, &lex, config, |row| {
        if !quiet {
            eprintln!("epoch {:>3}  loss {:.6}  {:.2}s", row.stats.epoch, row.stats.mean_loss, row.seconds);
        }
    })?;
    model_file::save(&model, &args.out)?;
    let history_out = args.history.clone().unwrap_or_else(|| history_path(&args.out));
    write_atomic(&history_out, run::history_csv(&history).as_bytes())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => train(&args),
        Command::Predict {
            model,
            dict,
            input,
            output,
        } => {
            let model = model_file::load(&model)?;
            let lex = lexicon(dict.as_deref())?;
            let texts = io::read_texts(&input)?;
            let spans = run::predict_all(&model, &lex, &texts)?;
            let docs: Vec<Document> = texts.into_iter().zip(spans).map(|(t, s)| Document::new(t, s)).collect();
            emit(output.as_deref(), &io::corpus_jsonl(&docs))
        }
        Command::Eval { gold, pred, csv } => {
            let report = run::evaluate_documents(&io::read_corpus(&gold)?, &io::read_corpus(&pred)?)?;
            if let Some(path) = csv {
                write_atomic(&path, run::report_csv(&report).as_bytes())?;
            }
            emit(None, &run::report_table(&report))
        }
        Command::DictTag { dict, input, output } => {
            let lex = io::read_lexicon(&dict)?;
            emit(output.as_deref(), &io::dict_tag(&io::read_texts(&input)?, &lex))
        }
        Command::Columns { input, output } => emit(output.as_deref(), &io::columns(&io::read_corpus(&input)?)?),
        Command::Synth {
            out_dir,
            seed,
            train_clauses,
            test_clauses,
        } => {
            let c = generate(&SyntheticConfig {
                seed,
                train_clauses,
                test_clauses,
                ..SyntheticConfig::default()
            })?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            write_atomic(&out_dir.join("train.jsonl"), io::corpus_jsonl(&c.train).as_bytes())?;
            write_atomic(&out_dir.join("test.jsonl"), io::corpus_jsonl(&c.test).as_bytes())?;
            write_atomic(&out_dir.join("lexicon.tsv"), io::lexicon_tsv(&c.lexicon).as_bytes())
        }
        Command::Config { config, overrides } => emit(None, &config::render(&run_config(config.as_deref(), &overrides)?)),
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rdcc: {e}");
            e.exit_code()
        }
    }
}
