use std::fmt;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nhca_core::grid::GridKind;
use nhca_core::kernel::{KernelSpec, Truncation};
use serde::{Serialize, Serializer};

use crate::error::Result;

/// Default truncation scale when `--gamma` is omitted for `cauchy-trunc`.
pub const DEFAULT_GAMMA: f64 = 1.0 / 1024.0;

#[derive(Parser, Debug)]
#[command(name = "nhca", version, about = "Haar analysis and Calderón-Zygmund diagnostics on atomic measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: Global,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Output directory (file for `measure gen`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "NHCA_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every sampled field and pair.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate or check a measure file.
    Measure {
        #[command(subcommand)]
        action: MeasureCmd,
    },
    /// Haar system checks.
    Haar {
        #[command(subcommand)]
        action: HaarCmd,
    },
    /// Testing-condition scan over cube families.
    Scan(ScanArgs),
    /// Compactness table over lagom windows.
    Compact(CompactArgs),
    /// Two-bump decay report.
    Bump(BumpArgs),
    /// Paraproduct forms and the Carleson check of their coefficients.
    Para(ParaArgs),
    /// Collar-set masses.
    Collar(CollarArgs),
    /// Bucket decomposition of the compressed bilinear form.
    Buckets(BucketArgs),
    /// Check a configuration without running it.
    Validate(ValidateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Measure { action: MeasureCmd::Gen(_) } => "measure gen",
            Command::Measure { action: MeasureCmd::Check(_) } => "measure check",
            Command::Haar { .. } => "haar check",
            Command::Scan(_) => "scan",
            Command::Compact(_) => "compact",
            Command::Bump(_) => "bump",
            Command::Para(_) => "para",
            Command::Collar(_) => "collar",
            Command::Buckets(_) => "buckets",
            Command::Validate(_) => "validate",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum MeasureCmd {
    Gen(GenArgs),
    Check(CheckArgs),
}

#[derive(Subcommand, Debug)]
pub enum HaarCmd {
    Check(HaarArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Segment,
    Square,
    Cantor4,
    Random,
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    /// Atom count; a perfect square for `square`, a power of 4 for `cantor4`.
    #[arg(long)]
    pub atoms: usize,
    /// Height of the segment.
    #[arg(long, default_value_t = nhca_core::measure::DEFAULT_Y0)]
    pub y0: f64,
    /// Ambient dimension of a random measure.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Cell depth of a random measure.
    #[arg(long, default_value_t = 6)]
    pub depth: i32,
    /// Random atoms live in `[-2^span, 2^span)^dim`.
    #[arg(long, default_value_t = 1)]
    pub span: i32,
}

#[derive(Args, Debug, Serialize)]
pub struct MeasureArg {
    #[arg(long)]
    pub measure: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    /// Skeleton depth for the off-skeleton check; defaults to the resolution level.
    #[arg(long)]
    pub depth: Option<i32>,
    /// Growth ceiling reported as violations.
    #[arg(long, default_value_t = 10.0)]
    pub ceiling: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct HaarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[arg(long, default_value = "std")]
    pub grids: GridList,
    /// Wavelet levels; defaults to the system's own range.
    #[arg(long)]
    pub levels: Option<Span>,
    /// Sampled wavelet pairs for the Gram check.
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    Cauchy,
    CauchyTrunc,
}

#[derive(Args, Debug, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "cauchy-trunc")]
    pub kernel: KernelName,
    /// Truncation scale; also truncates `cauchy` when given.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Spatial cutoff `Q = [-2^N, 2^N]^n`.
    #[arg(long = "bigQ", default_value_t = 2)]
    #[serde(rename = "bigQ")]
    pub big_q: i32,
}

impl KernelArgs {
    pub fn build(&self) -> Result<KernelSpec> {
        let gamma = match (self.kernel, self.gamma) {
            (KernelName::Cauchy, None) => return Ok(KernelSpec::cauchy()),
            (_, Some(g)) => g,
            (KernelName::CauchyTrunc, None) => DEFAULT_GAMMA,
        };
        Ok(KernelSpec::cauchy().truncate(Truncation::new(gamma, self.big_q)?)?)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value = "std")]
    pub grids: GridList,
    #[arg(long)]
    pub levels: Span,
}

#[derive(Args, Debug, Serialize)]
pub struct CompactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value = "std")]
    pub grids: GridList,
    /// Scanned levels; defaults to `0` through two past the last window, capped at the resolution level.
    #[arg(long)]
    pub levels: Option<Span>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Span,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Separated,
    Nested,
}

#[derive(Args, Debug, Serialize)]
pub struct BumpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value = "separated")]
    pub mode: Mode,
    #[arg(long, default_value_t = 4)]
    pub depth: i32,
    /// Gap exponent; defaults to `α/(α+δ/2)`.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ParaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    /// Apply `P_M^⊥` to both inputs.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<u32>,
    /// Random fields for the Carleson check.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CollarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = 0)]
    pub n0: i32,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub theta: f64,
    /// Collar scales `k`; defaults to `N0` through the resolution level.
    #[arg(long)]
    pub levels: Option<Span>,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct BucketArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long = "M", default_value_t = 1)]
    #[serde(rename = "M")]
    pub m: u32,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub theta: f64,
    /// Wavelet levels below the top level; defaults to all of them.
    #[arg(long)]
    pub depth: Option<i32>,
}

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Ambient dimension when no measure is given.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Growth exponent when no measure is given.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub grids: Option<GridList>,
    #[arg(long)]
    pub levels: Option<Span>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<Span>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "bigQ")]
    #[serde(rename = "bigQ")]
    pub big_q: Option<i32>,
}

/// Inclusive integer range written `A..B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub lo: i32,
    pub hi: i32,
}

impl Span {
    pub fn range(self) -> RangeInclusive<i32> {
        self.lo..=self.hi
    }

    pub fn unsigned(self) -> Result<RangeInclusive<u32>> {
        let lo = u32::try_from(self.lo).map_err(|_| nonneg(self))?;
        let hi = u32::try_from(self.hi).map_err(|_| nonneg(self))?;
        Ok(lo..=hi)
    }
}

fn nonneg(s: Span) -> crate::error::CliError {
    crate::error::CliError::Usage(format!("range {s} must be nonnegative"))
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
        let lo: i32 = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
        let hi: i32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end {b:?}"))?;
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        Ok(Span { lo, hi })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Comma-separated grid tags such as `std,sh1,bd1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridList(pub Vec<GridKind>);

impl FromStr for GridList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| GridKind::parse(t.trim()).map_err(|e| e.to_string()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(GridList)
    }
}

impl Serialize for GridList {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|g| g.tag()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_parsing() {
        assert_eq!("2..6".parse::<Span>().unwrap(), Span { lo: 2, hi: 6 });
        assert_eq!("-1..=3".parse::<Span>().unwrap(), Span { lo: -1, hi: 3 });
        assert!("5..2".parse::<Span>().is_err());
        assert!("5".parse::<Span>().is_err());
        assert_eq!(Span { lo: 0, hi: 4 }.to_string(), "0..4");
        assert!(Span { lo: -1, hi: 2 }.unsigned().is_err());
    }

    #[test]
    fn grid_lists() {
        let g: GridList = "std, sh1,bd1".parse().unwrap();
        assert_eq!(g.0, vec![GridKind::Standard, GridKind::Shifted(1), GridKind::Boundary(1)]);
        assert!("std,xx".parse::<GridList>().is_err());
    }

    #[test]
    fn kernel_selection() {
        let raw = KernelArgs {
            kernel: KernelName::Cauchy,
            gamma: None,
            big_q: 2,
        };
        assert!(raw.build().unwrap().truncation.is_none());
        let t = KernelArgs {
            kernel: KernelName::CauchyTrunc,
            gamma: None,
            big_q: 2,
        };
        assert_eq!(t.build().unwrap().truncation.unwrap().gamma, DEFAULT_GAMMA);
        let bad = KernelArgs {
            kernel: KernelName::CauchyTrunc,
            gamma: Some(100.0),
            big_q: 2,
        };
        assert_eq!(bad.build().unwrap_err().kind(), "RangeError");
    }
}
