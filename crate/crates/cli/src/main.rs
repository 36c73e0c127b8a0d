mod error;
mod learn;
mod prep;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shapecl::model::EncoderKind;
use shapecl::train::TrainConfig;

use error::{write_output, CliError, CliResult};
use learn::{Metric, NnArgs, Space, TrainArgs};

#[derive(Parser)]
#[command(name = "shapecl", version, about = "3D similarity datasets and learned shape/color embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gnn,
    Ecfp,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizeArg {
    Small,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Shape,
    Color,
    Graph,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Tanimoto2d,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Subcommand)]
enum Command {
    /// Generate conformers from a SMILES file or re-emit an SDF.
    Conformers {
        #[arg(long, conflicts_with = "sdf")]
        smiles: Option<PathBuf>,
        #[arg(long)]
        sdf: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        max_confs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute all pairwise shape and color overlay scores.
    Matrix {
        #[arg(long)]
        sdf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        random_starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// also write the pairs as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train an encoder on a similarity matrix.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        smiles: PathBuf,
        #[arg(long, value_enum, default_value = "gnn")]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "small")]
        size: SizeArg,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        split: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// per-epoch losses; defaults to `<out>.history.csv`
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1e-4)]
        lr_floor: f64,
        #[arg(long, default_value_t = 300)]
        max_epochs: usize,
        #[arg(long, default_value_t = 20)]
        patience: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Score a checkpoint on one split role.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "test")]
        split_role: String,
        #[arg(long)]
        smiles: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Write embeddings for a SMILES file as CSV.
    Embed {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        smiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// add radius of gyration and principal moments from these conformers
        #[arg(long)]
        sdf: Option<PathBuf>,
    },
    /// Nearest neighbours of a molecule in an embedding CSV.
    Nn {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value = "shape")]
        space: SpaceArg,
        #[arg(long, value_enum, default_value = "euclidean")]
        metric: MetricArg,
        #[arg(long)]
        smiles: Option<PathBuf>,
        /// add the true overlay scores from this matrix
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Summary statistics of molecular properties in an SDF.
    Stats {
        #[arg(long)]
        sdf: PathBuf,
    },
}

fn print(text: &str) -> CliResult<()> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Conformers { smiles, sdf, max_confs, seed, out } => {
            prep::conformers(smiles.as_deref(), sdf.as_deref(), max_confs, seed, &out)
        }
        Command::Matrix { sdf, out, workers, random_starts, seed, csv } => {
            if workers == 0 {
                return Err(CliError::Usage("--workers must be at least 1".into()));
            }
            prep::matrix(&sdf, &out, workers, random_starts, seed, csv.as_deref())
        }
        Command::Train {
            matrix,
            smiles,
            model,
            size,
            split,
            seed,
            out,
            history,
            batch_size,
            lr,
            lr_floor,
            max_epochs,
            patience,
            lambda,
        } => learn::train(&TrainArgs {
            matrix,
            smiles,
            kind: match model {
                ModelArg::Gnn => EncoderKind::Gnn,
                ModelArg::Ecfp => EncoderKind::Ecfp,
            },
            full_size: matches!(size, SizeArg::Full),
            split,
            out,
            history,
            cfg: TrainConfig {
                batch_size,
                lr,
                lr_floor,
                max_epochs,
                patience,
                lambda,
                seed,
            },
        }),
        Command::Eval { ckpt, matrix, split_role, smiles, out, workers } => {
            if workers == 0 {
                return Err(CliError::Usage("--workers must be at least 1".into()));
            }
            let report = learn::eval(&ckpt, &matrix, &split_role, smiles.as_deref(), workers)?;
            match out {
                Some(path) => write_output(&path, report.as_bytes()),
                None => print(&report),
            }
        }
        Command::Embed { ckpt, smiles, out, sdf } => learn::embed(&ckpt, &smiles, sdf.as_deref(), &out),
        Command::Nn { embeddings, query, k, space, metric, smiles, matrix } => {
            let text = learn::nn(&NnArgs {
                embeddings: &embeddings,
                query: &query,
                k,
                space: match space {
                    SpaceArg::Shape => Space::Shape,
                    SpaceArg::Color => Space::Color,
                    SpaceArg::Graph => Space::Graph,
                },
                metric: match metric {
                    MetricArg::Euclidean => Metric::Euclidean,
                    MetricArg::Tanimoto2d => Metric::Tanimoto2d,
                },
                smiles: smiles.as_deref(),
                matrix: matrix.as_deref(),
            })?;
            print(&text)
        }
        Command::Stats { sdf } => print(&prep::stats(&sdf)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
