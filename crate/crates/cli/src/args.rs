use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nmfkit::exact::ExactStrategy;
use nmfkit::nmf::Algorithm;
use nmfkit::separable::Method;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "nmfkit", version, about = "Nonnegative matrix factorization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Approximate NMF with MU, HALS or ANLS.
    Factorize(FactorizeArgs),
    /// Bracket the nonnegative rank with exact-NMF restarts.
    Rankplus(RankplusArgs),
    /// Separable NMF: pick r columns of the data as the basis.
    Separable(SeparableArgs),
    /// Slack matrix of a regular polygon or of a polytope file.
    Slack(SlackArgs),
    /// Check that factors of a slack matrix define a lift of the polytope.
    Lift(LiftArgs),
    /// Hexagon family matrices and the limiting integer factorization.
    Hexagon(HexagonArgs),
    /// Nested-polygon picture of a rank-3 nonnegative matrix.
    Npp(NppArgs),
    /// Generate a synthetic hyperspectral cube.
    HsiGen(HsiGenArgs),
    /// Unmix a hyperspectral cube and score it against stored ground truth.
    HsiUnmix(HsiUnmixArgs),
    /// Run the benchmark suites and write a summary table.
    Bench(BenchArgs),
    /// Rerun a recorded command and compare its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Factorize(_) => "factorize",
            Command::Rankplus(_) => "rankplus",
            Command::Separable(_) => "separable",
            Command::Slack(_) => "slack",
            Command::Lift(_) => "lift",
            Command::Hexagon(_) => "hexagon",
            Command::Npp(_) => "npp",
            Command::HsiGen(_) => "hsi-gen",
            Command::HsiUnmix(_) => "hsi-unmix",
            Command::Bench(_) => "bench",
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Factorize(a) => Some(a.seed),
            Command::Rankplus(a) => Some(a.seed),
            Command::HsiGen(a) => Some(a.seed),
            Command::Bench(a) => Some(a.seed),
            _ => None,
        }
    }

    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Factorize(a) => a.out.out_dir.as_ref(),
            Command::Rankplus(a) => a.out.out_dir.as_ref(),
            Command::Separable(a) => a.out.out_dir.as_ref(),
            Command::Slack(a) => a.out.out_dir.as_ref(),
            Command::Lift(a) => a.out.out_dir.as_ref(),
            Command::Hexagon(a) => a.out.out_dir.as_ref(),
            Command::Npp(a) => a.out.out_dir.as_ref(),
            Command::HsiGen(a) => Some(&a.out_dir),
            Command::HsiUnmix(a) => a.out.out_dir.as_ref(),
            Command::Bench(a) => a.out.out_dir.as_ref(),
            Command::Replay(_) => None,
        }
    }

    /// Matrix input read from a file or, when absent, standard input.
    pub fn matrix_input(&self) -> Option<&Option<PathBuf>> {
        match self {
            Command::Factorize(a) => Some(&a.input),
            Command::Rankplus(a) => Some(&a.input),
            Command::Separable(a) => Some(&a.input),
            Command::Npp(a) => Some(&a.input),
            _ => None,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutDir {
    /// Directory for output files and the run manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FactorizeArgs {
    /// Matrix file (CSV or JSON); standard input when omitted.
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value = "hals", value_parser = parse_algorithm)]
    pub alg: Algorithm,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent random starts; the best final residual is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Initialize from SPA columns instead of random factors.
    #[arg(long)]
    pub spa_init: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct RankplusArgs {
    pub input: Option<PathBuf>,
    /// Largest rank to try; defaults to min(p, n).
    #[arg(long)]
    pub rmax: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = nmfkit::exact::DEFAULT_EXACT_TOL)]
    pub tol: f64,
    #[arg(long, default_value = "random", value_parser = parse_strategy)]
    pub strategy: ExactStrategy,
    /// Extrapolated HALS sweeps.
    #[arg(long)]
    pub extrapolate: bool,
    /// Try only this rank instead of climbing from the numerical rank.
    #[arg(long)]
    pub only: Option<usize>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct SeparableArgs {
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value = "spa", value_parser = parse_method)]
    pub method: Method,
    /// Rank-r PCA projection before selection.
    #[arg(long)]
    pub denoise: bool,
    /// Re-examine the selected vertices.
    #[arg(long)]
    pub refine: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct PolytopeSource {
    /// Regular polygon with this many vertices.
    #[arg(long, conflicts_with = "polytope")]
    pub polygon: Option<usize>,
    /// Polytope JSON file with fields A, b, vertices.
    #[arg(long)]
    pub polytope: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SlackArgs {
    #[command(flatten)]
    pub source: PolytopeSource,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct LiftArgs {
    #[command(flatten)]
    pub source: PolytopeSource,
    #[arg(long)]
    pub u: PathBuf,
    #[arg(long)]
    pub v: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct HexagonArgs {
    /// Family parameter, a > 1.
    #[arg(long, conflicts_with = "inf")]
    pub a: Option<f64>,
    /// The integer limit matrix; writes its printed factors with --out-dir.
    #[arg(long)]
    pub inf: bool,
    /// With --inf, check the integer factorization exactly.
    #[arg(long, requires = "inf")]
    pub verify: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct NppArgs {
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct HsiGenArgs {
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 50)]
    pub width: usize,
    #[arg(long, default_value_t = 50)]
    pub height: usize,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    /// Plant one pure pixel per endmember.
    #[arg(long)]
    pub pure: bool,
    /// Noise level in dB; noiseless when omitted.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct HsiUnmixArgs {
    /// Directory written by hsi-gen.
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value = "spa", value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub denoise: bool,
    /// HALS refinement from the selected pixels.
    #[arg(long)]
    pub refine: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    /// Suite name, or "all".
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First seed; suites use seeds seed..seed+seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Where to write the rerun outputs; defaults to a sibling `replay` directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: nmfkit::NmfError| e.to_string())
}

fn parse_strategy(s: &str) -> Result<ExactStrategy, String> {
    s.parse().map_err(|e: nmfkit::NmfError| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: nmfkit::NmfError| e.to_string())
}
