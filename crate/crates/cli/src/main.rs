#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod analysis;
mod geometry;
mod input;
mod molecules;
mod suites;

use std::process::ExitCode;

use anisowave::Error;
use clap::{Parser, Subcommand};

/// Anisotropic wavelet transforms, maximal functions and coorbit checks.
#[derive(Debug, Parser)]
#[command(name = "anisowave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expansiveness, ellipsoid and structural constants of a dilation.
    Matrix {
        #[command(subcommand)]
        op: geometry::MatrixOp,
    },
    /// The step quasi-norm ρ_A.
    Quasinorm {
        #[command(subcommand)]
        op: geometry::QuasinormOp,
    },
    /// Build or inspect a spectral window file.
    Wavelet {
        #[command(subcommand)]
        op: geometry::WaveletOp,
    },
    /// Sampled wavelet transform of a signal, written as a GAF1 field.
    Transform(analysis::TransformArgs),
    /// Maximal functions of a GAF1 field.
    Maximal(analysis::MaximalArgs),
    /// Triebel-Lizorkin type norms of a signal or a coefficient sequence.
    Norm(analysis::NormArgs),
    /// Norm-equivalence suite.
    Equiv {
        #[command(subcommand)]
        op: suites::VerifyOp,
    },
    /// Sequence-equivalence suite.
    Seq {
        #[command(subcommand)]
        op: suites::VerifyOp,
    },
    /// The weight v and the standard control weight.
    Weight {
        #[command(subcommand)]
        op: molecules::WeightOp,
    },
    /// Vector conditions for molecules.
    Molecule {
        #[command(subcommand)]
        op: molecules::MoleculeOp,
    },
    /// Integrability of standard envelopes.
    Envelope {
        #[command(subcommand)]
        op: molecules::EnvelopeOp,
    },
    /// Verification campaigns from a JSON config.
    Campaign {
        #[command(subcommand)]
        op: suites::CampaignOp,
    },
}

/// Whether every hard assertion of a command held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass { Outcome::Pass } else { Outcome::Fail }
    }
}

fn run(cli: Cli) -> anisowave::Result<Outcome> {
    match cli.command {
        Command::Matrix { op } => geometry::matrix(op),
        Command::Quasinorm { op } => geometry::quasinorm(op),
        Command::Wavelet { op } => geometry::wavelet(op),
        Command::Transform(args) => analysis::transform(args),
        Command::Maximal(args) => analysis::maximal(args),
        Command::Norm(args) => analysis::norm(args),
        Command::Equiv { op } => suites::verify(op, anisowave::campaign::Suite::NormEquiv),
        Command::Seq { op } => suites::verify(op, anisowave::campaign::Suite::SeqEquiv),
        Command::Weight { op } => molecules::weight(op),
        Command::Molecule { op } => molecules::molecule(op),
        Command::Envelope { op } => molecules::envelope(op),
        Command::Campaign { op } => suites::campaign(op),
    }
}

/// Numerical breakdowns count as failed assertions; everything else is a
/// problem with the input.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergent(_) | Error::ConvergenceFailure { .. } => 1,
        _ => 2,
    }
}

fn threads() -> anisowave::Result<Option<usize>> {
    match std::env::var("ANISOWAVE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("ANISOWAVE_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads().and_then(|t| match t {
        Some(n) => anisowave::par::with_threads(n, || run(cli)),
        None => run(cli),
    });
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
