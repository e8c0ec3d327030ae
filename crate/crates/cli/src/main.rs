use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsbm_core::pipeline::{default_run_id, lead_tag, PipelineConfig, Run};
use nsbm_core::trajectory::Window;
use nsbm_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "nsbm", version, about = "Crash-risk pipeline: synthetic data, extreme events, GEV networks, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic trajectory corpus.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_crash: Option<usize>,
        #[arg(long)]
        n_noncrash: Option<usize>,
    },
    /// Extract block-maxima events and their scene graphs.
    Extract(Common),
    /// Train the crash and non-crash networks and the stationary baselines.
    Train(Common),
    /// Calibrate warning thresholds on the training split.
    Calibrate(Common),
    /// Score every frame of a trajectory file at one lead time.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV to score.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; defaults to `<run>/predict_<T>.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Held-out metrics for NsBM-GAT, SBM and the SSM baselines.
    Evaluate(Common),
    /// Merge per-lead-time reports into summary tables.
    Report(Common),
    /// synth, extract, train, calibrate, evaluate and report in one go.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_crash: Option<usize>,
        #[arg(long)]
        n_noncrash: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults to the run directory's `config.toml`
    /// when it exists, otherwise built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lead time in seconds; repeat for several. Defaults to every lead time
    /// in the configuration.
    #[arg(long = "T", value_name = "SECONDS")]
    lead_times: Vec<f64>,
    /// Run directory; defaults to `runs/<run-id>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Resolved {
    run: Run,
    lead_times: Vec<f64>,
}

fn resolve(common: &Common, n_crash: Option<usize>, n_noncrash: Option<usize>) -> nsbm_core::Result<Resolved> {
    let stored = common.out.as_ref().map(|o| o.join("config.toml")).filter(|p| p.exists());
    let mut cfg = match common.config.as_deref().or(stored.as_deref()) {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = n_crash {
        cfg.synth.n_crash = n;
    }
    if let Some(n) = n_noncrash {
        cfg.synth.n_noncrash = n;
    }
    cfg.validate()?;
    let root = match &common.out {
        Some(o) => o.clone(),
        None => Path::new("runs").join(default_run_id(&cfg)?),
    };
    let lead_times = if common.lead_times.is_empty() {
        cfg.lead_times.clone()
    } else {
        common.lead_times.clone()
    };
    for &t in &lead_times {
        Window::crash(t)?;
    }
    Ok(Resolved {
        run: Run::new(root, cfg)?,
        lead_times,
    })
}

fn execute(command: Command) -> nsbm_core::Result<Vec<PathBuf>> {
    match command {
        Command::Synth { common, n_crash, n_noncrash } => resolve(&common, n_crash, n_noncrash)?.run.synth(),
        Command::Extract(c) => {
            let r = resolve(&c, None, None)?;
            r.run.extract(&r.lead_times)
        }
        Command::Train(c) => {
            let r = resolve(&c, None, None)?;
            r.run.train(&r.lead_times)
        }
        Command::Calibrate(c) => {
            let r = resolve(&c, None, None)?;
            r.run.calibrate(&r.lead_times)
        }
        Command::Predict { common, input, output } => {
            let r = resolve(&common, None, None)?;
            let [t] = r.lead_times[..] else {
                return Err(Error::InvalidArgument("predict needs exactly one --T".into()));
            };
            let output = output.unwrap_or_else(|| r.run.path(&format!("predict_{}.csv", lead_tag(t))));
            r.run.predict(&input, t, &output)
        }
        Command::Evaluate(c) => {
            let r = resolve(&c, None, None)?;
            r.run.evaluate(&r.lead_times)
        }
        Command::Report(c) => resolve(&c, None, None)?.run.report(),
        Command::Run { common, n_crash, n_noncrash } => {
            let r = resolve(&common, n_crash, n_noncrash)?;
            let ts = r.lead_times;
            let mut written = r.run.synth()?;
            written.extend(r.run.extract(&ts)?);
            written.extend(r.run.train(&ts)?);
            written.extend(r.run.calibrate(&ts)?);
            written.extend(r.run.evaluate(&ts)?);
            written.extend(r.run.report()?);
            Ok(written)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Infeasible(_) => EXIT_USAGE,
        Error::Numerical(_) | Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
