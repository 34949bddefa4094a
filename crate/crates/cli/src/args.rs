use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sdd", version, about = "Explore non-unique solutions of state-dependent delay equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Registered problems and their parameters
    List,
    /// Residuals of every closed-form solution of a problem
    Verify(RunArgs),
    /// Seed and integrate the branches of a problem with solution families
    Branches(RunArgs),
    /// Red / yellow / blue segmentation of closed forms and of the default integration
    Classify(RunArgs),
    /// Red-solution and uniqueness certificates
    Certify(RunArgs),
    /// Write closed forms as (t, s, x) curves with surface and plane residuals
    Export3d(Export3dArgs),
    /// Verify closed forms over a grid of parameter values
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Registry key, see `sdd list`
    pub problem: String,

    /// Problem parameter, `name=value`; repeatable
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Branching times for solution families; comma-separated or repeated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub tau: Vec<f64>,

    /// Offset of a branch seed past its branching time
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,

    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,

    /// |ṡ| at or below this counts as red for integrated trajectories
    #[arg(long, default_value_t = 1e-8)]
    pub tol_red: f64,

    /// Uniqueness needs |q - 1| above this
    #[arg(long, default_value_t = 1e-9)]
    pub margin: f64,

    /// Samples per exported curve
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    All,
    Red,
    Yellow,
    Blue,
}

#[derive(Debug, Clone, Args)]
pub struct Export3dArgs {
    #[command(flatten)]
    pub run: RunArgs,

    #[arg(long, value_enum, default_value_t = Which::All)]
    pub which: Which,

    /// Write curves as JSON instead of CSV
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Parameter to vary, `name=v1,v2,...`; repeatable, the grid is the product
    #[arg(long, value_name = "NAME=V1,V2,...", value_parser = parse_values)]
    pub vary: Vec<(String, Vec<f64>)>,
}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    if name.trim().is_empty() {
        return Err(format!("missing parameter name in `{s}`"));
    }
    Ok((name.trim().to_string(), parse_number(value)?))
}

pub fn parse_values(s: &str) -> Result<(String, Vec<f64>), String> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=V1,V2,..., got `{s}`"))?;
    if name.trim().is_empty() {
        return Err(format!("missing parameter name in `{s}`"));
    }
    let values = values.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
    Ok((name.trim().to_string(), values))
}
