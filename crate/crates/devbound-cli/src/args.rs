//! Command-line surface: one subcommand per experiment, shared flag
//! groups for sequences and n grids, global flags for config, output
//! and constants overrides.

use crate::config::{NGrid, SeqDescriptor};
use crate::report::Format;
use clap::{Args, Parser, Subcommand};
use devbound::oracle::Side;
use devbound::sim::HugeBlockMode;
use devbound::{Error, Result};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "devbound",
    version,
    about = "Deviation bounds, exact references, and Monte Carlo experiments \
             for product binomial models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Report format (default csv).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Report file; stdout when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Constant override NAME=VALUE (c0, C_anti, C1, c2, dkw_c1,
    /// dkw_c2, hp_a1, hp_a2); repeatable.
    #[arg(long = "const", global = true, value_name = "NAME=VALUE")]
    pub consts: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form deviation rate for a sequence over an n grid.
    Bound(BoundCmd),
    /// Three-regime block rate phi_{J,q}(n).
    Phi(ScalarCmd),
    /// Exact binomial-quantile threshold epsilon_{J,q}(n).
    Epsilon(ScalarCmd),
    /// Exact expected sup deviation (and optional quantiles).
    Oracle(OracleCmd),
    /// Monte Carlo deviation experiments.
    Simulate(SimulateCmd),
    /// Cross a sequence list with an n grid over selected quantities.
    Sweep(SweepCmd),
    /// Localized empirical-CDF deviation: simulation plus tail bounds.
    Dkw(DkwCmd),
    /// The 1/(K sqrt n) sequence: exact deviation against its
    /// sqrt(S/n) + T/n decomposition.
    Openproblem(OpenProblemCmd),
    /// lq-norm deviation band (and optional exact moments).
    Lq(LqCmd),
    /// High-probability deviation band at given confidence levels.
    Hp(HpCmd),
}

/// Sequence selection; mirrors [`SeqDescriptor`] field for field.
#[derive(Debug, Clone, Default, Args)]
pub struct SeqArgs {
    /// step, blocks, explicit, power_law, open_problem or poissonian.
    #[arg(long)]
    pub family: Option<String>,

    /// Count as ln(J+1); stays finite for J far beyond 2^64.
    #[arg(long = "lnJp1")]
    pub ln_jp1: Option<f64>,

    /// Integer count: step J or the poissonian index cap.
    #[arg(long = "J")]
    pub j: Option<u64>,

    #[arg(long)]
    pub q: Option<f64>,

    /// Blocks as "log_count:q;log_count:q;..." with natural-log counts.
    #[arg(long)]
    pub blocks: Option<String>,

    /// Explicit nonincreasing values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,

    /// Power-law scale p(j) = min(a j^-b, 1/2).
    #[arg(long)]
    pub a: Option<f64>,

    /// Power-law exponent.
    #[arg(long)]
    pub b: Option<f64>,

    /// Power-law index cap.
    #[arg(long)]
    pub cap: Option<u64>,

    #[arg(long = "n-ref")]
    pub n_ref: Option<u64>,

    /// Open-problem K factor.
    #[arg(long = "K")]
    pub k_factor: Option<f64>,

    /// Poissonian scale sigma^2(j) = alpha/(2 n_ref j).
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Treat the values as variances.
    #[arg(long)]
    pub variance: bool,
}

impl SeqArgs {
    /// Descriptor from the flags, or None when no sequence flags were
    /// given (the config file supplies the sequences then).
    pub fn descriptor(&self) -> Result<Option<SeqDescriptor>> {
        let any_param = self.ln_jp1.is_some()
            || self.j.is_some()
            || self.q.is_some()
            || self.blocks.is_some()
            || self.values.is_some()
            || self.a.is_some()
            || self.b.is_some()
            || self.cap.is_some()
            || self.n_ref.is_some()
            || self.k_factor.is_some()
            || self.alpha.is_some()
            || self.variance;
        match &self.family {
            None if any_param => {
                Err(Error::domain("sequence flags need --family to pick a constructor"))
            }
            None => Ok(None),
            Some(family) => Ok(Some(SeqDescriptor {
                family: family.clone(),
                ln_jp1: self.ln_jp1,
                j: self.j,
                q: self.q,
                blocks: self.blocks.clone(),
                values: self.values.clone(),
                a: self.a,
                b: self.b,
                cap: self.cap,
                n_ref: self.n_ref,
                k_factor: self.k_factor,
                alpha: self.alpha,
                variance: self.variance,
            })),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// n values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,

    /// Geometric n grid START:END:FACTOR.
    #[arg(long = "n-geom", value_name = "START:END:FACTOR")]
    pub n_geom: Option<String>,
}

impl GridArgs {
    pub fn grid(&self) -> Result<Option<NGrid>> {
        match (&self.n, &self.n_geom) {
            (Some(_), Some(_)) => {
                Err(Error::domain("give either --n or --n-geom, not both"))
            }
            (Some(ns), None) => Ok(Some(NGrid::List(ns.clone()))),
            (None, Some(text)) => {
                let parts: Vec<&str> = text.split(':').collect();
                let bad = || {
                    Error::domain(format!(
                        "--n-geom expects START:END:FACTOR, got {text:?}"
                    ))
                };
                if parts.len() != 3 {
                    return Err(bad());
                }
                let start: u64 = parts[0].parse().map_err(|_| bad())?;
                let end: u64 = parts[1].parse().map_err(|_| bad())?;
                let factor: f64 = parts[2].parse().map_err(|_| bad())?;
                Ok(Some(NGrid::Geometric { start, end, factor }))
            }
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SideArg {
    TwoSided,
    Upper,
    Lower,
}

impl SideArg {
    pub fn to_side(self) -> Side {
        match self {
            SideArg::TwoSided => Side::TwoSided,
            SideArg::Upper => Side::Upper,
            SideArg::Lower => Side::Lower,
        }
    }

    pub fn parse_name(name: &str) -> Result<Self> {
        match name {
            "two_sided" | "two-sided" => Ok(SideArg::TwoSided),
            "upper" => Ok(SideArg::Upper),
            "lower" => Ok(SideArg::Lower),
            _ => Err(Error::domain(format!(
                "field side: expected two_sided, upper or lower, got {name:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Direct,
    MaxInversion,
}

impl ModeArg {
    pub fn to_mode(self) -> HugeBlockMode {
        match self {
            ModeArg::Direct => HugeBlockMode::Direct,
            ModeArg::MaxInversion => HugeBlockMode::MaxInversion,
        }
    }

    pub fn parse_name(name: &str) -> Result<Self> {
        match name {
            "direct" => Ok(ModeArg::Direct),
            "max_inversion" | "max-inversion" => Ok(ModeArg::MaxInversion),
            _ => Err(Error::domain(format!(
                "field mode: expected direct or max_inversion, got {name:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TargetArg {
    /// Independent coordinates, per-block binomial extremes.
    Product,
    /// All coordinates indicate one shared uniform sample.
    Coupled,
    /// Variance profile on {0, eta} valued coordinates.
    TwoPoint,
    /// sup |F_n - F| left of a cutoff for uniform samples.
    Cdf,
}

#[derive(Debug, Args)]
pub struct BoundCmd {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

/// Flags shared by phi and epsilon: a single (J, q) block.
#[derive(Debug, Args)]
pub struct ScalarCmd {
    /// Count as ln(J+1).
    #[arg(long = "lnJp1")]
    pub ln_jp1: f64,
    #[arg(long)]
    pub q: f64,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct OracleCmd {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = SideArg::TwoSided)]
    pub side: SideArg,
    /// Quantile levels to report next to the expectation.
    #[arg(long, value_delimiter = ',')]
    pub level: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = TargetArg::Product)]
    pub target: TargetArg,
    /// Block sampling mode for --target product.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CDF cutoff for --target cdf.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Sample count per trial for --target cdf.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Quantile levels (default 0.5, 0.9, 0.99).
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Exceedance thresholds (default none).
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Stream per-trial values here, one per line.
    #[arg(long, value_name = "FILE")]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Quantities to emit per cell: rate, exact, sim_mean.
    #[arg(long, value_delimiter = ',')]
    pub quantities: Option<Vec<String>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DkwCmd {
    /// Localization cutoffs in (0, 1), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x0: Vec<f64>,
    /// Sample sizes per trial (the report's n column).
    #[command(flatten)]
    pub grid: GridArgs,
    /// Thresholds in sqrt(V/n) units (default 1,2,4).
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OpenProblemCmd {
    #[command(flatten)]
    pub grid: GridArgs,
    /// K factor; default max(4, ln n) per grid point.
    #[arg(long = "K")]
    pub k_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LqCmd {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Norm exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub qnorm: Option<Vec<f64>>,
    /// Also emit the exact moment root (needs integer counts).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct HpCmd {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Failure probabilities in (0, 1/2), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
}
