use std::path::PathBuf;
use std::process::ExitCode;

use btmle_cli::commands::{self, CaseStudyArgs, FitArgs};
use btmle_cli::CliResult;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "btmle", version, about = "Classical and Bayesian TMLE of the average treatment effect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its schema.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pair a second-order treatment with a first-order outcome in OPMS.
        #[arg(long)]
        literal_paper_dgp: bool,
    },
    /// Fit one estimator to a CSV dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Classical, BTmleM, BTmleSS, BnTmle1p or BnTmle2p.
        #[arg(long)]
        method: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the ATE samples as CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Run or resume a coverage sweep.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: bool,
        /// Override the spec's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write tables and plot data for a sweep or case-study directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        plot_data: bool,
    },
    /// Compare every estimator on one regenerated case-study dataset.
    CaseStudy {
        /// binary or continuous.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Check a sweep's coverage table against its replication journal.
    Audit {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { spec, out, literal_paper_dgp } => commands::simulate(&spec, &out, literal_paper_dgp),
        Command::Fit { data, schema, method, config, out, seed, samples } => commands::fit(&FitArgs {
            data: &data,
            schema: &schema,
            method: &method,
            config: config.as_deref(),
            out: &out,
            seed,
            samples: samples.as_deref(),
        }),
        Command::Sweep { spec, out, resume, workers } => {
            let s = commands::sweep(&spec, &out, resume, workers)?;
            eprintln!(
                "{} cells run, {} resumed, {} failed method fits, {} coverage rows",
                s.cells_run,
                s.cells_resumed,
                s.failed_rows,
                s.coverage.len()
            );
            Ok(())
        }
        Command::Report { input, format, plot_data } => {
            for p in commands::report(&input, &format, plot_data)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::CaseStudy { kind, seed, out, n, config, methods } => commands::case_study(&CaseStudyArgs {
            kind: &kind,
            seed,
            out: &out,
            n,
            config: config.as_deref(),
            methods: methods.as_deref(),
        }),
        Command::Audit { input } => {
            let r = commands::audit(&input)?;
            println!("{} coverage rows match (max difference {:e})", r.rows_checked, r.max_abs_difference);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
