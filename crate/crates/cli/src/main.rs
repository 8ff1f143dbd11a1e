//! Command-line surface for the docqs toolkit: metric computation,
//! feature building, surrogate training, prediction, evaluation and
//! closed-loop automatic binarization.
//!
//! Exit codes: 0 on success, 1 on numeric domain errors (convergence,
//! conditioning, divergence), 2 on usage and file errors. Every failure
//! prints a single `error: ...` line to stderr. All randomness flows
//! from the global `--seed` flag.

mod commands;
mod errors;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "docqs", version, about = "Surrogate models of document image quality metrics")]
struct Cli {
    /// Seed for every random choice (splits, restarts, optimizers).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Verbose logging to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelType {
    Gp,
    Svr,
    Ann,
    Ensemble,
}

#[derive(Subcommand)]
enum Command {
    /// Compute F-Measure, PSNR, DRD and NRM for a binarized image
    /// against its ground truth; prints one CSV row.
    Metrics {
        /// Binarized (predicted) image: PBM or bilevel PGM/PNG.
        pred: String,
        /// Ground-truth image.
        gt: String,
    },
    /// Build the feature table for every manifest entry that has both a
    /// processed image and a ground truth; other entries are skipped
    /// with a warning.
    Build {
        /// Manifest CSV with header id,original,processed,gt.
        #[arg(long)]
        manifest: String,
        /// Output feature CSV.
        #[arg(long)]
        out: String,
    },
    /// Train a surrogate on a feature table and save it.
    Train {
        /// Feature CSV with targets.
        #[arg(long)]
        features: String,
        #[arg(long, value_enum)]
        model_type: ModelType,
        /// Output model file (JSON text).
        #[arg(long)]
        out: String,
        /// SMO iteration budget per SVR solve.
        #[arg(long, default_value_t = docqs::surrogates::DEFAULT_SMO_BUDGET)]
        smo_budget: usize,
        /// Hidden units of the ANN.
        #[arg(long, default_value_t = docqs::surrogates::DEFAULT_HIDDEN)]
        hidden: usize,
        /// Levenberg-Marquardt step budget of the ANN.
        #[arg(long, default_value_t = docqs::surrogates::DEFAULT_MAX_EPOCHS)]
        max_epochs: usize,
    },
    /// Predict F-Measure for each row of a feature table.
    Predict {
        /// Trained model file.
        #[arg(long)]
        model: String,
        /// Feature CSV (targets may be absent).
        #[arg(long)]
        features: String,
        /// Output CSV with header id,prediction.
        #[arg(long)]
        out: String,
    },
    /// Compare a prediction CSV against targets and print rrse,mae,rmse.
    Evaluate {
        /// CSV with header id,prediction.
        #[arg(long)]
        predictions: String,
        /// Feature CSV whose f_measure_target column holds the actuals.
        #[arg(long)]
        targets: String,
    },
    /// Binarize an image with Sauvola parameters chosen to maximize the
    /// surrogate-predicted F-Measure.
    AutoBinarize {
        /// Grayscale document image (PGM or PNG).
        #[arg(long)]
        image: String,
        /// Trained model file.
        #[arg(long)]
        model: String,
        /// Output bilevel image (.pbm or .pgm).
        #[arg(long)]
        out: String,
        /// Optional per-iteration trace CSV.
        #[arg(long)]
        trace: Option<String>,
        /// Objective evaluations (binarizations) to spend.
        #[arg(long, default_value_t = 25)]
        budget: usize,
        /// Smallest window (odd, >= 3).
        #[arg(long, default_value_t = 3)]
        w_min: usize,
        /// Largest window (odd).
        #[arg(long, default_value_t = 51)]
        w_max: usize,
        /// Lower sensitivity bound.
        #[arg(long, default_value_t = 0.01)]
        k_min: f64,
        /// Upper sensitivity bound.
        #[arg(long, default_value_t = 0.6)]
        k_max: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(if cli.verbose { "debug" } else { "warn" })
        .init();

    let result = match cli.command {
        Command::Metrics { pred, gt } => commands::metrics(&pred, &gt),
        Command::Build { manifest, out } => commands::build(&manifest, &out),
        Command::Train {
            features,
            model_type,
            out,
            smo_budget,
            hidden,
            max_epochs,
        } => commands::train(
            &features, model_type, &out, smo_budget, hidden, max_epochs, cli.seed,
        ),
        Command::Predict {
            model,
            features,
            out,
        } => commands::predict(&model, &features, &out),
        Command::Evaluate {
            predictions,
            targets,
        } => commands::evaluate(&predictions, &targets),
        Command::AutoBinarize {
            image,
            model,
            out,
            trace,
            budget,
            w_min,
            w_max,
            k_min,
            k_max,
        } => commands::auto_binarize(
            &image,
            &model,
            &out,
            trace.as_deref(),
            budget,
            (w_min, w_max),
            (k_min, k_max),
            cli.seed,
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
