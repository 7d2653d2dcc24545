use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use chainforge_core::des::BacklogMode;
use chainforge_core::stochastic::{AffordabilityAggregation, BalanceForm};

#[derive(Debug, Parser)]
#[command(name = "chainforge", version, about = "Design and evaluate three-echelon food distribution networks")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Maximum number of worker threads.
    #[arg(long, global = true, value_parser = positive)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place DCs and assign linkages; writes design.json.
    Gfa(GfaArgs),
    /// Estimate Z1 and Z2 over an epsilon grid; writes solutions.csv and plans/.
    Optimize(OptimizeArgs),
    /// Extract the non-dominated solutions; writes front.csv and front.svg.
    Pareto(ParetoArgs),
    /// Simulate solutions under an (S, s) policy; writes validation.csv.
    Validate(ValidateArgs),
    /// All stages in sequence, plus manifest.json.
    Run(RunArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GfaOpts {
    /// DC count for a region, as REGION=K. Repeatable.
    #[arg(long = "dc-count", value_parser = parse_dc_count)]
    pub dc_counts: Vec<(String, usize)>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000, value_parser = positive)]
    pub max_iterations: usize,
    /// Movement threshold in km.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceArg {
    Delivered,
    Demand,
}

impl From<BalanceArg> for BalanceForm {
    fn from(b: BalanceArg) -> Self {
        match b {
            BalanceArg::Delivered => BalanceForm::Delivered,
            BalanceArg::Demand => BalanceForm::Demand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffordabilityArg {
    Once,
    PerPeriod,
}

impl From<AffordabilityArg> for AffordabilityAggregation {
    fn from(a: AffordabilityArg) -> Self {
        match a {
            AffordabilityArg::Once => AffordabilityAggregation::Once,
            AffordabilityArg::PerPeriod => AffordabilityAggregation::PerPeriod,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BacklogArg {
    Drop,
    Wait,
}

impl From<BacklogArg> for BacklogMode {
    fn from(b: BacklogArg) -> Self {
        match b {
            BacklogArg::Drop => BacklogMode::Drop,
            BacklogArg::Wait => BacklogMode::Wait,
        }
    }
}

/// `lo:hi:steps`, optionally suffixed `:log` for geometric spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub log: bool,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let log = match parts.get(3) {
            None => false,
            Some(&"log") => true,
            Some(&"lin") => false,
            Some(other) => return Err(format!("unknown spacing {other:?}, expected log or lin")),
        };
        if !(3..=4).contains(&parts.len()) {
            return Err("expected lo:hi:steps[:log]".into());
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let steps: usize = parts[2].parse().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        if steps == 0 {
            return Err("steps must be at least 1".into());
        }
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
            return Err("need 0 ≤ lo ≤ hi".into());
        }
        if log && lo == 0.0 {
            return Err("log spacing needs lo > 0".into());
        }
        Ok(Self { lo, hi, steps, log })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeOpts {
    /// Epsilon grid as lo:hi:steps[:log].
    #[arg(long, default_value = "1e-7:1e-3:9:log")]
    pub epsilon_grid: GridSpec,
    /// Monte Carlo replications per epsilon.
    #[arg(long, default_value_t = 50, value_parser = positive)]
    pub replications: usize,
    /// Safety-stock fraction v, overriding the instance.
    #[arg(long, value_parser = fraction)]
    pub safety_stock: Option<f64>,
    #[arg(long, value_enum, default_value = "delivered")]
    pub balance: BalanceArg,
    #[arg(long, value_enum, default_value = "once")]
    pub affordability: AffordabilityArg,
    /// Read every demand `variance` in the instance as a standard deviation.
    #[arg(long)]
    pub variance_is_std_dev: bool,
    /// Write the period models of the first replication as LP files here.
    #[arg(long)]
    pub dump_models: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimOpts {
    /// Simulation runs per solution.
    #[arg(long, default_value_t = 30, value_parser = positive)]
    pub runs: usize,
    #[arg(long, value_enum, default_value = "wait")]
    pub backlog: BacklogArg,
    /// Replenishment lead time in periods.
    #[arg(long, default_value_t = 0)]
    pub lead_time: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub orders_per_period: usize,
}

#[derive(Debug, Args)]
pub struct GfaArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub gfa: GfaOpts,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    #[command(flatten)]
    pub opt: OptimizeOpts,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub solutions: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    /// Plan JSON written by `optimize`. Repeatable.
    #[arg(long = "solution", required = true)]
    pub solutions: Vec<PathBuf>,
    /// Read every demand `variance` in the instance as a standard deviation.
    #[arg(long)]
    pub variance_is_std_dev: bool,
    #[command(flatten)]
    pub sim: SimOpts,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub gfa: GfaOpts,
    #[command(flatten)]
    pub opt: OptimizeOpts,
    #[command(flatten)]
    pub sim: SimOpts,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

fn parse_dc_count(s: &str) -> Result<(String, usize), String> {
    let (region, k) = s.split_once('=').ok_or("expected REGION=K")?;
    Ok((region.to_string(), positive(k)?))
}
