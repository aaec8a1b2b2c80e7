use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mst_core::harness::{self, BenchConfig, RunConfig, Split};
use mst_core::{MstError, Result};

#[derive(Parser)]
#[command(name = "mst", version, about = "Multiset Transformer on persistence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Train the ablated model: no bias and all multiplicities one.
    #[arg(long)]
    no_mult: bool,
    /// Use the raw diagram cache even if the config enables clustering.
    #[arg(long)]
    no_cluster: bool,
    /// Output directory for reports and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.no_mult {
            cfg.model.bias_enabled = false;
        }
        if self.no_cluster {
            cfg.cluster = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute persistence diagrams (or synthetic samples) into the cache.
    Extract(Common),
    /// Repeated k-fold cross-validation.
    Train(Common),
    /// Score a checkpoint and audit permutation invariance.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; defaults to `<out>/model.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train | test | all, relative to the saved fold.
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Forward-pass scaling benchmark.
    Bench {
        /// Optional config; `Hidden`, `H` and `E.Q` set the block sizes.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_out(out: Option<&Path>, name: &str, body: &str) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| MstError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        harness::report::write_text(&dir.join(name), body)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(c) => {
            let cfg = c.load()?;
            let text = harness::cmd_extract(&cfg)?.render();
            print!("{text}");
            write_out(c.out.as_deref(), "extract.txt", &text)
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let report = harness::cmd_train(&cfg, c.out.as_deref())?;
            print!("{}", harness::report::render_table(&report));
            eprintln!("wall clock: {:.1}s", report.wall_clock.as_secs_f64());
            Ok(())
        }
        Command::Eval {
            common,
            checkpoint,
            split,
        } => {
            let cfg = common.load()?;
            let ckpt = match (checkpoint, &common.out) {
                (Some(p), _) => p,
                (None, Some(dir)) => dir.join(harness::CHECKPOINT_FILE),
                (None, None) => return Err(MstError::Config("eval needs --checkpoint or --out".into())),
            };
            let report = harness::cmd_eval(&cfg, &ckpt, split)?;
            let text = report.render();
            print!("{text}");
            write_out(common.out.as_deref(), &format!("eval_{split}.txt"), &text)?;
            if report.audit_passed != report.size {
                return Err(MstError::Consistency(format!(
                    "invariance audit failed on {} of {} samples",
                    report.size - report.audit_passed,
                    report.size
                )));
            }
            Ok(())
        }
        Command::Bench {
            config,
            seed,
            repeats,
            out,
        } => {
            let mut bench = BenchConfig {
                repeats,
                ..BenchConfig::default()
            };
            if let Some(path) = config {
                let cfg = RunConfig::load(&path)?;
                bench.hidden = cfg.model.hidden;
                bench.heads = cfg.model.heads;
                bench.induced = cfg.model.induced_queries;
                bench.seed = cfg.seed;
            }
            if let Some(s) = seed {
                bench.seed = s;
            }
            let report = harness::cmd_bench(&bench, out.as_deref())?;
            print!("{}", harness::bench::render_bench_table(&report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
