//! Command-line front end.
//!
//! Every command prints JSON lines, each object tagged with a `type`:
//!
//! * `score`: `{"type":"score","method":..,"score":..}`
//! * `level`: one per recursion level from `inspect`, with the level number,
//!   group count, transport plan, cost and similarity matrices, coefficient,
//!   level score, and marginal violation.
//! * `prediction`: one per dataset row from `eval`:
//!   `{"type":"prediction","index":..,"gold":..,"score":..}`, where `score`
//!   is `null` for skipped rows.
//! * `summary`: closes `eval`: method, `pearson_x100`, and row counts.
//!
//! Settings are read from the file named by `ROT_SIM_CONFIG`, then
//! overridden by flags.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{Settings, CONFIG_ENV};
use crate::embeddings::{load_embeddings, load_frequencies};
use crate::eval::{read_sts_dataset, run_eval, Scorer};
use crate::similarity::{Method, TreeKind};
use crate::treebank::{read_conllu, read_pair_trees, PairTree};
use crate::weighting::SchemeKind;

#[derive(Debug, Parser)]
#[command(name = "rots", version, about = "Recursive optimal transport sentence similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one sentence pair.
    Sim {
        #[command(flatten)]
        common: Common,
        sentence1: String,
        sentence2: String,
    },
    /// Score a TSV dataset and report Pearson correlation x100.
    Eval {
        #[command(flatten)]
        common: Common,
        /// `gold<TAB>sentence1<TAB>sentence2` lines.
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Print per-level diagnostics for one sentence pair.
    Inspect {
        #[command(flatten)]
        common: Common,
        sentence1: String,
        sentence2: String,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// wmd, cos, rot, or rots.
    #[arg(long)]
    method: Option<Method>,
    /// Word vectors, one `word v1 .. vd` per line.
    #[arg(long)]
    vectors: PathBuf,
    /// Word counts, one `word count` per line.
    #[arg(long)]
    freq: Option<PathBuf>,
    /// uniform, sif, or usif.
    #[arg(long = "weight-scheme")]
    weight_scheme: Option<SchemeKind>,
    #[arg(long = "sif-a")]
    sif_a: Option<f64>,
    /// Principal components removed from the vectors.
    #[arg(long)]
    components: Option<usize>,
    /// binary or dependency.
    #[arg(long)]
    tree: Option<TreeKind>,
    /// Parses: JSON lines of sentence pairs, or CoNLL-U (`.conllu`) with the
    /// two sentences of each pair in consecutive blocks. Implies
    /// `--tree dependency` unless `--tree` is given.
    #[arg(long)]
    trees: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Look words up verbatim instead of lowercased.
    #[arg(long = "no-lowercase")]
    no_lowercase: bool,
}

impl Common {
    fn settings(&self, config_file: Option<&Path>) -> anyhow::Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = config_file {
            let file = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
            s.merge_file(BufReader::new(file))
                .with_context(|| format!("reading config {}", path.display()))?;
        }
        if let Some(m) = self.method {
            s.method = m;
        }
        if let Some(w) = self.weight_scheme {
            s.weight_scheme = w;
        }
        if let Some(a) = self.sif_a {
            s.sif_a = a;
        }
        if let Some(c) = self.components {
            s.components = c;
        }
        match (self.tree, &self.trees) {
            (Some(t), _) => s.similarity.tree_kind = t,
            (None, Some(_)) => s.similarity.tree_kind = TreeKind::Dependency,
            (None, None) => {}
        }
        if let Some(d) = self.depth {
            s.similarity.depth = d;
        }
        if let Some(g) = self.gamma {
            s.similarity.gamma = g;
        }
        if let Some(w) = self.workers {
            s.workers = w;
        }
        if self.no_lowercase {
            s.lowercase = false;
        }
        s.validate()?;
        Ok(s)
    }

    fn scorer(&self, settings: &Settings, err: &mut dyn Write) -> anyhow::Result<Scorer> {
        let file = File::open(&self.vectors).with_context(|| format!("opening {}", self.vectors.display()))?;
        let table = load_embeddings(BufReader::new(file), None)
            .with_context(|| format!("reading vectors {}", self.vectors.display()))?;
        if !table.rejected_lines().is_empty() {
            writeln!(
                err,
                "warning: skipped {} malformed lines in {} (first at line {})",
                table.rejected_lines().len(),
                self.vectors.display(),
                table.rejected_lines()[0]
            )?;
        }
        if table.duplicates() > 0 {
            writeln!(err, "warning: {} repeated words in {}; last occurrence kept", table.duplicates(), self.vectors.display())?;
        }
        let freq = match &self.freq {
            Some(path) => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                Some(load_frequencies(BufReader::new(file)).with_context(|| format!("reading counts {}", path.display()))?)
            }
            None => None,
        };
        Ok(Scorer::new(table, freq, settings)?)
    }

    fn pair_trees(&self, settings: &Settings) -> anyhow::Result<Option<Vec<PairTree>>> {
        if settings.similarity.tree_kind != TreeKind::Dependency {
            return Ok(None);
        }
        let Some(path) = &self.trees else {
            bail!("--tree dependency needs --trees");
        };
        let file = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
        let pairs = if path.extension().is_some_and(|e| e == "conllu") {
            let trees = read_conllu(file).with_context(|| format!("reading {}", path.display()))?;
            if trees.len() % 2 != 0 {
                bail!("{} holds {} sentences; pairs need an even count", path.display(), trees.len());
            }
            let mut it = trees.into_iter();
            let mut pairs = Vec::new();
            while let (Some(sentence1), Some(sentence2)) = (it.next(), it.next()) {
                pairs.push(PairTree { sentence1, sentence2 });
            }
            pairs
        } else {
            read_pair_trees(file).with_context(|| format!("reading {}", path.display()))?
        };
        Ok(Some(pairs))
    }

    fn single_pair(&self, settings: &Settings) -> anyhow::Result<Option<PairTree>> {
        match self.pair_trees(settings)? {
            None => Ok(None),
            Some(pairs) if pairs.len() == 1 => Ok(pairs.into_iter().next()),
            Some(pairs) => bail!("expected one sentence pair in the tree file, found {}", pairs.len()),
        }
    }
}

fn line(out: &mut dyn Write, value: serde_json::Value) -> anyhow::Result<()> {
    writeln!(out, "{value}")?;
    Ok(())
}

fn execute(cli: Cli, config_file: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Sim {
            common,
            sentence1,
            sentence2,
        } => {
            let settings = common.settings(config_file)?;
            let scorer = common.scorer(&settings, err)?;
            let parses = common.single_pair(&settings)?;
            let score = scorer.score_pair(&sentence1, &sentence2, parses.as_ref(), settings.method)?;
            line(out, json!({"type": "score", "method": settings.method, "score": score}))
        }
        Command::Inspect {
            common,
            sentence1,
            sentence2,
        } => {
            let settings = common.settings(config_file)?;
            let scorer = common.scorer(&settings, err)?;
            let parses = common.single_pair(&settings)?;
            let report = scorer.report_pair(&sentence1, &sentence2, parses.as_ref(), settings.method)?;
            for level in &report.levels {
                let mut value = serde_json::to_value(level)?;
                value["type"] = json!("level");
                line(out, value)?;
            }
            line(out, json!({"type": "score", "method": report.method, "score": report.score}))
        }
        Command::Eval { common, dataset } => {
            let settings = common.settings(config_file)?;
            let scorer = common.scorer(&settings, err)?;
            let parses = common.pair_trees(&settings)?;
            let file = File::open(&dataset).with_context(|| format!("opening {}", dataset.display()))?;
            let data = read_sts_dataset(BufReader::new(file)).with_context(|| format!("reading {}", dataset.display()))?;
            let result = run_eval(&data, &scorer, settings.method, parses.as_deref(), settings.workers)?;
            for (i, (record, score)) in data.records.iter().zip(&result.predictions).enumerate() {
                line(out, json!({"type": "prediction", "index": i, "gold": record.gold, "score": score}))?;
            }
            line(
                out,
                json!({
                    "type": "summary",
                    "method": result.method,
                    "pearson_x100": result.pearson_x100,
                    "records": data.records.len(),
                    "scored": result.scored,
                    "skipped": result.skipped,
                    "malformed": data.malformed,
                }),
            )
        }
    }
}

/// Runs the CLI with settings from `config_file` instead of the environment.
pub fn run_with_config<I, T>(argv: I, config_file: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return e.exit_code();
        }
    };
    match execute(cli, config_file, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

/// Runs the CLI; returns the process exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    run_with_config(argv, config.as_deref(), out, err)
}
