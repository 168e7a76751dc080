use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::Pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "entprobe",
    version,
    about = "Probe entity embeddings against knowledge-base tasks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated task families or task ids
    #[arg(long, global = true)]
    pub tasks: Option<String>,
    #[arg(long, global = true)]
    pub per_label: Option<usize>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// tsv or json
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Also report every subtask of aggregated families
    #[arg(long, global = true)]
    pub subtasks: bool,
    /// Extra KEY=VALUE setting, applied after the config file
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Parse the knowledge-base dumps into a snapshot
    Ingest,
    /// Write a synthetic embedding table with planted structure
    Synth,
    /// Generate every probing dataset
    GenTasks,
    /// Train and evaluate one probe per task
    Probe,
    /// Train and evaluate the entity linker
    El,
    /// Write the results table
    Report,
    /// Run every stage in order
    Run,
}

impl Cli {
    pub fn to_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let here = Path::new("");
        let mut set = |k: &str, v: String| cfg.set(k, &v, here);
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            set(k.trim(), v.trim().to_owned())?;
        }
        if let Some(v) = self.seed {
            set("seed", v.to_string())?;
        }
        if let Some(v) = &self.out {
            set("out", v.display().to_string())?;
        }
        if let Some(v) = &self.tasks {
            set("tasks", v.clone())?;
        }
        if let Some(v) = self.per_label {
            set("per_label", v.to_string())?;
        }
        if let Some(v) = self.jobs {
            set("jobs", v.to_string())?;
        }
        if let Some(v) = &self.format {
            set("format", v.clone())?;
        }
        if self.subtasks {
            set("subtasks", "true".into())?;
        }
        Ok(cfg)
    }
}

/// Runs one command and returns a one-line summary.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let p = Pipeline::new(cli.to_config()?)?;
    Ok(match cli.command {
        Command::Ingest => format!("wrote {}", p.ingest()?.display()),
        Command::Synth => format!("wrote {}", p.synth()?.display()),
        Command::GenTasks => {
            let m = p.gen_tasks()?;
            format!(
                "generated {} tasks, {} failed",
                m.tasks.len(),
                m.failures.len()
            )
        }
        Command::Probe => {
            let r = p.probe()?;
            format!("probed {} tasks, {} failed", r.rows.len(), r.failures.len())
        }
        Command::El => {
            let r = p.el()?;
            format!(
                "P@1 micro {:.1} macro {:.1} over {} mentions",
                r.test.micro_p_at_1, r.test.macro_p_at_1, r.test.n_mentions
            )
        }
        Command::Report => format!("wrote {}", p.report()?.display()),
        Command::Run => format!("wrote {}", p.run_all()?.display()),
    })
}

pub fn run_from<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(&cli)
}
