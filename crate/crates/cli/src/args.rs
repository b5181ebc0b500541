//! Command-line flags. Every run field is optional here so that a JSON
//! config file can supply it; flags win over file values.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use peakon_core::experiments::{Component, Density, MicroPeakon};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "peakon-lab", version, about = "Multipeakon experiments for the Camassa-Holm equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a multipeakon state and sample its invariants.
    Simulate(SimulateArgs),
    /// Eigenvalues of the isospectral matrix of a state.
    Spectrum(SpectrumArgs),
    /// Perturbed-train stability runs over one or more epsilons.
    Stability(StabilityArgs),
    /// Weighted energy to the right of the moving cuts.
    Monotonicity(MonotonicityArgs),
    /// Long-time limits of momenta and speeds.
    Asymptotics(AsymptoticsArgs),
    /// Finite-difference check of the weighted energy identity.
    IdentityCheck(IdentityArgs),
    /// Peakon approximation of a nonnegative momentum density.
    Approximate(ApproximateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Spectrum(_) => "spectrum",
            Command::Stability(_) => "stability",
            Command::Monotonicity(_) => "monotonicity",
            Command::Asymptotics(_) => "asymptotics",
            Command::IdentityCheck(_) => "identity-check",
            Command::Approximate(_) => "approximate",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Spectrum(a) => &a.common,
            Command::Stability(a) => &a.common,
            Command::Monotonicity(a) => &a.common,
            Command::Asymptotics(a) => &a.common,
            Command::IdentityCheck(a) => &a.common,
            Command::Approximate(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; without it the JSON report goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats written to --out.
    #[arg(long, value_delimiter = ',', value_parser = ["csv", "json", "svg"])]
    pub formats: Option<Vec<String>>,
}

fn parse_micro(s: &str) -> Result<MicroPeakon, String> {
    let (x, a) = s.split_once(':').ok_or("expected POSITION:AMP")?;
    Ok(MicroPeakon {
        position: x.trim().parse().map_err(|e| format!("{e}"))?,
        amp: a.trim().parse().map_err(|e| format!("{e}"))?,
    })
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated numbers".to_string())
}

fn parse_box(s: &str) -> Result<Component, String> {
    let [lo, hi, mass] = parse_triple(s)?;
    Ok(Component::Box { lo, hi, mass })
}

fn parse_gaussian(s: &str) -> Result<Component, String> {
    let [mean, sd, mass] = parse_triple(s)?;
    Ok(Component::Gaussian { mean, sd, mass })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Momenta p_1..p_N.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    /// Positions q_1 < … < q_N.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Add λ_1..λ_N columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub spectrum: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// Include eigenvectors and their residuals.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub vectors: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub speeds: Option<Vec<f64>>,
    /// Initial centers; default 0, L, 2L, …
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub shifts: Option<Vec<f64>>,
    /// Train spacing.
    #[arg(long = "L")]
    #[serde(rename = "L", alias = "spacing")]
    pub spacing: Option<f64>,
    /// Weight scale; default max(4, sqrt(L)/8).
    #[arg(long = "K")]
    #[serde(rename = "K", alias = "scale")]
    pub scale: Option<f64>,
    /// One or more epsilons; the initial distance is eps².
    #[arg(long = "eps", value_delimiter = ',')]
    #[serde(rename = "eps", alias = "epsilon")]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeded amplitude and node directions.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub random: Option<bool>,
    /// Number of seeded micro-peakons.
    #[arg(long)]
    pub random_micro: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub amp: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub node: Option<Vec<f64>>,
    /// Micro-peakons as POSITION:AMP.
    #[arg(long, value_delimiter = ',', value_parser = parse_micro, allow_hyphen_values = true)]
    pub micro: Option<Vec<MicroPeakon>>,
    /// Worker threads for the sweep.
    #[arg(long, env = "PEAKON_LAB_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicityArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub speeds: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub shifts: Option<Vec<f64>>,
    #[arg(long = "L")]
    #[serde(rename = "L", alias = "spacing")]
    pub spacing: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K", alias = "scale")]
    pub scale: Option<f64>,
    #[arg(long = "eps")]
    #[serde(rename = "eps", alias = "epsilon")]
    pub epsilon: Option<f64>,
    /// End time; negative runs backward.
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub random: Option<bool>,
    #[arg(long)]
    pub random_micro: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub amp: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub node: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_micro, allow_hyphen_values = true)]
    pub micro: Option<Vec<MicroPeakon>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// Integrate to ±T.
    #[arg(long = "T")]
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fail when |p - λ| or |q̇ - λ| exceeds this at ±T.
    #[arg(long)]
    pub max_error: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// psi, one-minus-psi, psi-difference or unit.
    #[arg(long, value_parser = ["unit", "psi", "one-minus-psi", "psi-difference"])]
    pub kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub left: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub right: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K", alias = "scale")]
    pub scale: Option<f64>,
    /// Time step of the central difference.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Box component LO,HI,MASS (repeatable).
    #[arg(long = "box", value_parser = parse_box, allow_hyphen_values = true)]
    #[serde(rename = "boxes")]
    pub boxes: Option<Vec<Component>>,
    /// Gaussian component MEAN,SD,MASS (repeatable).
    #[arg(long = "gaussian", value_parser = parse_gaussian, allow_hyphen_values = true)]
    #[serde(rename = "gaussians")]
    pub gaussians: Option<Vec<Component>>,
    /// Full density (config file only).
    #[arg(skip)]
    pub density: Option<Density>,
    /// Number of peakons.
    #[arg(long = "n")]
    pub n: Option<usize>,
}
