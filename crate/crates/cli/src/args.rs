use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gw_bounds::bounds::QuadratureSpec;
use gw_bounds::graphs::{FeatureKind, GraphKind, GraphModel};
use gw_bounds::{Bound, BoundConfig, OuterSolver, SinkhornParams};
use serde::Serialize;

use crate::isotest::Method;

#[derive(Parser, Debug, Clone)]
#[command(name = "gwb", version, about = "Lower bounds and sliced approximations of (fused) Gromov-Wasserstein distances")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CommonArgs {
    /// Root seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Exact,
    Sinkhorn,
}

/// Quadrature size: a number of midpoint knots, or `n` for a rule matched to
/// the input sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleArg {
    Midpoint(usize),
    MatchSize,
}

impl FromStr for RuleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("n") {
            return Ok(RuleArg::MatchSize);
        }
        match s.parse::<usize>() {
            Ok(r) if r > 0 => Ok(RuleArg::Midpoint(r)),
            _ => Err(format!("expected a positive integer or `n`, got `{s}`")),
        }
    }
}

impl fmt::Display for RuleArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleArg::Midpoint(r) => write!(f, "{r}"),
            RuleArg::MatchSize => f.write_str("n"),
        }
    }
}

impl Serialize for RuleArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl RuleArg {
    pub fn spec(self) -> QuadratureSpec {
        match self {
            RuleArg::Midpoint(r) => QuadratureSpec::Midpoint { r },
            RuleArg::MatchSize => QuadratureSpec::MatchSize,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoundArgs {
    /// Order of the distance.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Weight of the feature term in fused bounds.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Quadrature size for sliced bounds (`n` matches the input size).
    /// `bench` accepts a comma-separated sweep.
    #[arg(long = "r", value_delimiter = ',', default_value = "10")]
    pub r: Vec<RuleArg>,
    /// Number of random projections for sliced bounds. `bench` accepts a
    /// comma-separated sweep.
    #[arg(long = "L", value_delimiter = ',', default_value = "50")]
    pub num_projections: Vec<usize>,
    /// Outer transport solver for TLB and FTLB.
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    pub solver: SolverArg,
    /// Entropic regularisation for `--solver sinkhorn`.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Iteration cap for Sinkhorn; hitting it exits with status 3.
    #[arg(long, default_value_t = 10_000)]
    pub sinkhorn_iters: usize,
}

impl BoundArgs {
    /// Config built from the first `--r` and `--L` values.
    pub fn config(&self, seed: u64) -> BoundConfig {
        let outer_solver = match self.solver {
            SolverArg::Exact => OuterSolver::Exact,
            SolverArg::Sinkhorn => OuterSolver::Sinkhorn(SinkhornParams {
                epsilon: self.epsilon,
                max_iter: self.sinkhorn_iters,
                ..SinkhornParams::default()
            }),
        };
        BoundConfig {
            p: self.p,
            alpha: self.alpha,
            rule: self.r[0].spec(),
            num_projections: self.num_projections[0],
            seed,
            outer_solver,
            ..BoundConfig::default()
        }
    }

    pub fn single(&self) -> Result<(), String> {
        if self.r.len() != 1 || self.num_projections.len() != 1 {
            return Err("--r and --L take a single value here".into());
        }
        Ok(())
    }
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Pairwise distance matrix between spaces.
    Dist(DistArgs),
    /// k-nearest-neighbour accuracy on a distance matrix.
    Knn(KnnArgs),
    /// Graph isomorphism testing on random graph pairs.
    Isotest(IsoArgs),
    /// Runtime of bounds on random Euclidean instances.
    Bench(BenchArgs),
    /// Free-support barycenter of target spaces.
    Bary(BaryArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DistArgs {
    /// Space files: CSV distance matrices or JSON structured spaces.
    pub inputs: Vec<PathBuf>,
    /// flb, slb, tlb, ftlb, stlb, sftlb, gw-brute or fgw-entropic.
    #[arg(long)]
    pub bound: Bound,
    /// Use a generated set of 2D shapes, this many per class, instead of
    /// input files. Class labels go to `labels.csv`.
    #[arg(long, conflicts_with = "inputs")]
    pub shapes: Option<usize>,
    /// Points per generated shape.
    #[arg(long, default_value_t = 100)]
    pub shape_points: usize,
    #[command(flatten)]
    pub bound_args: BoundArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KnnArgs {
    /// Square distance matrix, headerless CSV.
    #[arg(long)]
    pub matrix: PathBuf,
    /// One label per line (or comma-separated), aligned with the matrix rows.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[arg(long, default_value_t = 0.25)]
    pub train_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    /// Watts-Strogatz (`--neighbors`, `--p-e`).
    Ws,
    /// Barabasi-Albert (`--m`).
    Ba,
    /// Random regular (`--degree`).
    Rr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureArg {
    None,
    Normal,
    Bernoulli,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IsoArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Ring neighbours per node for WS (even).
    #[arg(long, default_value_t = 4)]
    pub neighbors: usize,
    /// Rewiring probability for WS.
    #[arg(long, default_value_t = 0.1)]
    pub p_e: f64,
    /// Edges per new node for BA.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Degree for RR.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, value_enum, default_value_t = FeatureArg::None)]
    pub features: FeatureArg,
    /// Success probability of Bernoulli features.
    #[arg(long, default_value_t = 0.5)]
    pub bernoulli_p: f64,
    /// Nodes per graph.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Pairs per repetition (even; half are isomorphic).
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Methods: any bound name, `wl-d` or `wl-f`.
    #[arg(long, value_delimiter = ',', default_value = "stlb")]
    #[serde(serialize_with = "crate::args::names")]
    pub bound: Vec<Method>,
    #[arg(long, default_value_t = 3)]
    pub wl_iterations: usize,
    /// Feature bins for `wl-f`.
    #[arg(long, default_value_t = 10)]
    pub wl_bins: usize,
    /// Sanity mode: every pair is a relabelled copy.
    #[arg(long)]
    pub all_isomorphic: bool,
    #[command(flatten)]
    pub bound_args: BoundArgs,
}

pub(crate) fn names<S: serde::Serializer>(m: &[Method], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|m| m.name()))
}

impl IsoArgs {
    pub fn model(&self) -> GraphModel {
        let kind = match self.model {
            ModelArg::Ws => GraphKind::Ws {
                k: self.neighbors,
                p_e: self.p_e,
            },
            ModelArg::Ba => GraphKind::Ba { m: self.m },
            ModelArg::Rr => GraphKind::Rr { r: self.degree },
        };
        let features = match self.features {
            FeatureArg::None => FeatureKind::None,
            FeatureArg::Normal => FeatureKind::Normal1d,
            FeatureArg::Bernoulli => FeatureKind::Bernoulli { p: self.bernoulli_p },
        };
        GraphModel::new(kind, features)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, value_delimiter = ',', default_value = "ftlb,sftlb")]
    pub bound: Vec<Bound>,
    /// Dimension of the random point clouds.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub bound_args: BoundArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaryDistanceArg {
    Tlb,
    Stlb,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BaryArgs {
    /// Target spaces (distance matrices, or coordinates with `--point-clouds`).
    #[arg(required = true)]
    pub targets: Vec<PathBuf>,
    /// Read targets as point coordinates (one point per row).
    #[arg(long)]
    pub point_clouds: bool,
    #[arg(long, value_enum, default_value_t = BaryDistanceArg::Tlb)]
    pub distance: BaryDistanceArg,
    /// Quadrature size for STLB (`n` uses the number of barycenter points).
    #[arg(long = "r", default_value = "n")]
    pub r: RuleArg,
    #[arg(long = "L", default_value_t = 50)]
    pub num_projections: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Gradient step width.
    #[arg(long, alias = "width", default_value_t = 0.1)]
    pub step_size: f64,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    /// Barycenter size (default: size of the first target).
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Barycenter dimension (default: 2, or the warm start's).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Start every restart from these coordinates.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
}
