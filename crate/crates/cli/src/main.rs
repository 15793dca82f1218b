use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moralscope::crqa::{Norm, Radius};
use moralscope::fixture::{generate_fixture, to_jsonl, FixtureConfig};
use moralscope::pipeline::{AssignmentMode, Pipeline, PipelineConfig, PipelineError, Stage, StageRecord};

/// Moral-foundation and topic analytics over tweet cascades.
#[derive(Parser, Debug)]
#[command(name = "moralscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate the raw corpus and normalize it.
    Ingest(Overrides),
    /// Reconstruct cascades and their pseudo-documents.
    Cascades(Overrides),
    /// Clean and tokenize tweets and pseudo-documents; build the vocabulary.
    Prep(Overrides),
    /// Score moral loadings and moral/non-moral ratios.
    Score(Overrides),
    /// Fit the topic model and assign topics.
    Topics(Overrides),
    /// Window, topic and daily aggregates.
    Timeseries(Overrides),
    /// Pairwise cross-recurrence of the polarization series.
    Crqa(Overrides),
    /// Summary tables.
    Report(Overrides),
    /// Every stage in order.
    RunAll(Overrides),
    /// Write the synthetic fixture corpus.
    GenFixture(FixtureArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    Euclidean,
    Max,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AssignArg {
    Cascade,
    Tweet,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Check lexicon dimension counts against the published EMFD.
    #[arg(long)]
    lexicon_check: bool,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    top_terms: Option<usize>,
    #[arg(long)]
    drop_top_n: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long, value_enum)]
    assignment: Option<AssignArg>,
    /// Comma-separated candidate K values for a sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_k: Option<Vec<usize>>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    delay: Option<usize>,
    /// Absolute recurrence radius.
    #[arg(long, conflicts_with = "radius_fraction")]
    radius: Option<f64>,
    /// Radius as a fraction of the pair's standard deviation.
    #[arg(long)]
    radius_fraction: Option<f64>,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    #[arg(long)]
    l_min: Option<usize>,
    /// Interpolate missing days in the recurrence input.
    #[arg(long)]
    interpolate: bool,
    /// Write run-length-encoded recurrence matrices.
    #[arg(long)]
    dump_matrices: bool,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    /// Output JSON-lines file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_tweets: Option<usize>,
}

impl Overrides {
    fn into_config(self) -> Result<PipelineConfig, PipelineError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if self.input.is_some() {
            c.input = self.input;
        }
        if self.lexicon.is_some() {
            c.lexicon = self.lexicon;
        }
        if self.stopwords.is_some() {
            c.stopwords = self.stopwords;
        }
        c.lexicon_check |= self.lexicon_check;
        if let Some(v) = self.out {
            c.out_dir = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.top_k {
            c.top_k = v;
        }
        if let Some(v) = self.k {
            c.lda.k = v;
        }
        if let Some(v) = self.top_terms {
            c.top_terms = v;
        }
        if let Some(v) = self.drop_top_n {
            c.clean.drop_top_n_frequent = v;
        }
        if let Some(v) = self.batch_size {
            c.lda.batch_size = v;
        }
        if let Some(v) = self.max_epochs {
            c.lda.max_epochs = v;
        }
        if let Some(v) = self.kappa {
            c.lda.kappa = v;
        }
        if let Some(v) = self.tau0 {
            c.lda.tau0 = v;
        }
        if let Some(v) = self.assignment {
            c.topics.assignment = match v {
                AssignArg::Cascade => AssignmentMode::Cascade,
                AssignArg::Tweet => AssignmentMode::Tweet,
            };
        }
        if let Some(v) = self.sweep_k {
            c.topics.sweep_k = v;
        }
        if let Some(v) = self.embed_dim {
            c.crqa.params.embed_dim = v;
        }
        if let Some(v) = self.delay {
            c.crqa.params.delay = v;
        }
        if let Some(v) = self.radius {
            c.crqa.params.radius = Radius::Fixed(v);
        }
        if let Some(v) = self.radius_fraction {
            c.crqa.params.radius = Radius::StdFraction(v);
        }
        if let Some(v) = self.norm {
            c.crqa.params.norm = match v {
                NormArg::Euclidean => Norm::Euclidean,
                NormArg::Max => Norm::Max,
            };
        }
        if let Some(v) = self.l_min {
            c.crqa.params.l_min = v;
        }
        c.crqa.interpolate |= self.interpolate;
        c.crqa.dump_matrices |= self.dump_matrices;
        Ok(c)
    }
}

fn report(stage: Stage, rec: &StageRecord) {
    println!(
        "{stage}: {} in, {} out, {} files, {} ms{}",
        rec.records_in,
        rec.records_out,
        rec.outputs.len(),
        rec.wall_ms,
        if rec.cache_hit { " (cached)" } else { "" }
    );
}

fn run(command: Command) -> Result<(), PipelineError> {
    let (stages, overrides): (Vec<Stage>, Overrides) = match command {
        Command::GenFixture(args) => {
            let mut config = FixtureConfig::default();
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(n) = args.n_tweets {
                config.n_tweets = n;
            }
            let records = generate_fixture(&config);
            std::fs::write(&args.out, to_jsonl(&records)).map_err(|e| PipelineError::Io {
                path: args.out.display().to_string(),
                source: e,
            })?;
            println!("wrote {} tweets to {}", records.len(), args.out.display());
            return Ok(());
        }
        Command::Ingest(o) => (vec![Stage::Ingest], o),
        Command::Cascades(o) => (vec![Stage::Cascades], o),
        Command::Prep(o) => (vec![Stage::Prep], o),
        Command::Score(o) => (vec![Stage::Score], o),
        Command::Topics(o) => (vec![Stage::Topics], o),
        Command::Timeseries(o) => (vec![Stage::Timeseries], o),
        Command::Crqa(o) => (vec![Stage::Crqa], o),
        Command::Report(o) => (vec![Stage::Report], o),
        Command::RunAll(o) => (Stage::ALL.to_vec(), o),
    };
    let pipeline = Pipeline::new(overrides.into_config()?)?;
    for stage in stages {
        let rec = pipeline.run_stage(stage)?;
        report(stage, &rec);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
