use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use panelvox::evaluation::{render_report, ReportFormat};
use panelvox::pipeline::{
    evaluate_predictions, plan_manifest, read_predictions, run_baselines, run_ingest, run_pipeline, RunConfig,
    RunSummary, Setting, Stages,
};
use panelvox::tts::manifest_jsonl;

#[derive(Parser)]
#[command(name = "panelvox", version, about = "Comic dialogue to attributed, emotion-tagged voice jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    pages_limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated title filter.
    #[arg(long, value_delimiter = ',')]
    titles: Vec<String>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.setting {
            cfg.setting = s;
        }
        if let Some(n) = self.pages_limit {
            cfg.corpus.pages_limit = Some(n);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.titles.is_empty() {
            cfg.corpus.titles = self.titles.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse annotations and sidecars into a corpus dump.
    Ingest(Common),
    /// Corpus dump with reading order and frame assignments attached.
    Layout(Common),
    /// Rule-based speaker baselines and their reports.
    Baseline(Common),
    /// Perception and LLM attribution, writing predictions.
    Attribute(Common),
    /// Score a predictions file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "text_table")]
        format: ReportFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Voice jobs for a predictions file.
    TtsPlan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every stage end to end.
    Run(Common),
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn report_summary(summary: &RunSummary) -> ExitCode {
    for t in &summary.titles {
        match &t.error {
            None => eprintln!("{}: {} regions, {} texts", t.title, t.regions, t.texts),
            Some(e) => eprintln!("{}: aborted: {e}", t.title),
        }
    }
    ExitCode::from(u8::try_from(summary.exit_code()).unwrap_or(1))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Ingest(c) => {
            let path = run_ingest(&c.load()?, false)?;
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Layout(c) => {
            let path = run_ingest(&c.load()?, true)?;
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Baseline(c) => Ok(report_summary(&run_baselines(&c.load()?)?)),
        Command::Attribute(c) => Ok(report_summary(&run_pipeline(&c.load()?, Stages::ATTRIBUTE_ONLY)?)),
        Command::Run(c) => Ok(report_summary(&run_pipeline(&c.load()?, Stages::ALL)?)),
        Command::Evaluate { common, predictions, format, out } => {
            let cfg = common.load()?;
            let src = std::fs::read_to_string(&predictions)?;
            let report = evaluate_predictions(&cfg, &read_predictions(&src)?)?;
            emit(out.as_ref(), &render_report(&report, format)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::TtsPlan { common, predictions, out } => {
            let cfg = common.load()?;
            let src = std::fs::read_to_string(&predictions)?;
            let lines = plan_manifest(&cfg, &read_predictions(&src)?)?;
            emit(out.as_ref(), manifest_jsonl(&lines).as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
