#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod crossed_cmd;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use fraclap_core::rng::DEFAULT_SEED;

/// Exit status for a check that ran and failed.
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NONCONVERGENCE: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// A failure carrying its own exit status.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn fail(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit { code, message: message.into() }.into()
}

#[derive(Parser, Debug)]
#[command(name = "fraclap", version, about = "Fractional Laplacians and spectral metrics on finite fractal models")]
pub struct Cli {
    /// Directory for artifacts; `FRACLAP_OUT_DIR` overrides the default `.`.
    #[arg(long, global = true, env = "FRACLAP_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Run file; see the README for the format.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Check metric, measure and dimension data of a space.
    SpaceValidate(SpaceValidateArgs),
    /// Dyadic cube systems and Haar wavelets.
    #[command(subcommand)]
    Dyadic(DyadicCmd),
    /// Eigenvalues and eigenfunctions of the generator.
    Spectrum(SpectrumArgs),
    /// Log–log fit of the eigenvalue growth.
    Weyl(WeylArgs),
    /// Commutator kernel, Schatten norms and Hölder comparisons.
    Commutator(CommutatorArgs),
    /// Distance between two states.
    Mk(MkArgs),
    /// Distances between all pairs of point masses.
    DiracScan(DiracScanArgs),
    /// Dual-group length functions and crossed-product seminorms.
    #[command(subcommand)]
    Crossed(CrossedCmd),
    /// Run the full acceptance suite.
    VerifyAll(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpaceArg {
    /// `cantor:N,λ,L`, `circle:n` or a space file.
    #[arg(long)]
    pub space: String,
}

#[derive(Args, Debug)]
pub struct SpaceValidateArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    /// Radii for the Ahlfors table (default: every distinct distance, at most 12).
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long, default_value = "space.json")]
    pub out: PathBuf,
    /// Also write the space in file form.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DyadicCmd {
    /// Check the cube axioms and the Haar basis.
    Validate {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long, default_value = "dyadic.json")]
        out: PathBuf,
    },
    /// Write the Haar wavelets as `cube_id,u,point_id,re,im`.
    Wavelets {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long, default_value = "wavelets.csv")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    /// Order `s`.
    #[arg(long)]
    pub s: f64,
    /// Closed-form spectrum (Cantor spaces).
    #[arg(long)]
    pub exact: bool,
    /// Largest space to diagonalise.
    #[arg(long, default_value_t = fraclap_core::laplacian::SPECTRUM_GUARD)]
    pub guard: usize,
    #[arg(long, default_value = "spectrum.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WeylArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub exact: bool,
    /// Index window `a,b` as fractions of the nonzero spectrum.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    #[arg(long, default_value = "weyl.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CommutatorArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    #[arg(long)]
    pub alpha: f64,
    /// A file of `id,value[,im]` rows, or a preset: `dist[:id]`, `haar[:k]`, `random[:k]`.
    #[arg(long, default_value = "dist")]
    pub h: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Hölder exponent for the two-sided comparison.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Truncation radii for the decay fit.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long, default_value = "commutator.json")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Closed,
    Linsolve,
    Sup,
}

#[derive(Args, Debug)]
pub struct MkArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// `dirac:<id>`, `uniform`, `random` or an `id,prob` file.
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub psi: String,
    #[arg(long, value_enum, default_value = "closed")]
    pub method: MethodArg,
    /// Closed-form spectrum (Cantor spaces).
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value = "mk.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DiracScanArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value = "dirac_scan.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "dirac_scan.json")]
    pub summary: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Circle,
    Cantor,
}

#[derive(Args, Debug, Clone)]
pub struct GroupArgs {
    #[arg(long, value_enum)]
    pub kind: GroupKind,
    #[arg(long)]
    pub alpha: f64,
    /// Truncation radius (depth for Cantor characters).
    #[arg(long = "radius", visible_alias = "R")]
    pub radius: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Gauss–Legendre nodes per panel for circle lengths.
    #[arg(long, default_value_t = fraclap_core::crossed::DEFAULT_QUADRATURE_NODES)]
    pub nodes: usize,
}

#[derive(Args, Debug, Clone)]
pub struct BaseArgs {
    /// Base space acted on (`cantor:…` with cantor groups, `circle:n` with circle groups).
    #[arg(long)]
    pub base: Option<String>,
    /// `holder:<β>` or `energy:<α>`.
    #[arg(long, default_value = "holder:0.5")]
    pub base_seminorm: String,
}

#[derive(Subcommand, Debug)]
pub enum CrossedCmd {
    /// Tabulate a length function and check its axioms.
    Length {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, default_value = "length.csv")]
        out: PathBuf,
    },
    /// Partial sums and decay of a translation increment.
    Tail {
        #[command(flatten)]
        group: GroupArgs,
        /// Group element label.
        #[arg(long)]
        gamma: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value = "tail.json")]
        out: PathBuf,
    },
    /// Seminorms of an element read from a `label,point,re,im` file.
    Seminorm {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long)]
        f: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value = "seminorm.json")]
        out: PathBuf,
    },
    /// Random Berezin contraction trials.
    BerezinTest {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4")]
        p: Vec<f64>,
        #[arg(long, default_value = "berezin.json")]
        out: PathBuf,
    },
    /// Conjugate the generator by characters.
    Fourier {
        #[command(flatten)]
        group: GroupArgs,
        /// Circle size for circle groups.
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value = "fourier.json")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Extra space for the kernel check.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return e.code;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<fraclap_core::Error>() {
            return match e {
                fraclap_core::Error::NonConvergence { .. } | fraclap_core::Error::Singular(_) => EXIT_NONCONVERGENCE,
                fraclap_core::Error::Io(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

/// Later occurrences of a flag replace earlier ones, so command-line flags
/// override a run file.
fn command() -> clap::Command {
    fn walk(c: clap::Command) -> clap::Command {
        c.args_override_self(true).mut_subcommands(walk)
    }
    walk(Cli::command())
}

fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    let mut cmd = command();
    let matches = cmd.try_get_matches_from_mut(argv)?;
    Cli::from_arg_matches(&matches).map_err(|e| e.format(&mut cmd))
}

fn main() -> ExitCode {
    let argv = match config::resolve_argv(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(if e.chain().any(|c| c.is::<std::io::Error>()) { EXIT_IO } else { EXIT_VALIDATION });
        }
    };
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
