use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mia_llr::bavaria::OfflineForm;
use mia_llr::{CenteringMode, StatisticKind, VarianceMode};

#[derive(Parser, Debug)]
#[command(name = "mia-llr", version, about = "Membership-inference scoring with log-likelihood ratios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score every point of a dataset with one method.
    Score(ScoreArgs),
    /// AUC and TPR at fixed FPRs for methods or score files.
    Eval(EvalArgs),
    /// Generate a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Per-point Anderson-Darling normality tests of the shadow log-odds.
    Diagnose(DiagnoseArgs),
    /// Differences of methods from a baseline.
    Compare(CompareArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    Arithmetic,
    Lse,
}

impl From<Centering> for CenteringMode {
    fn from(c: Centering) -> Self {
        match c {
            Centering::Arithmetic => CenteringMode::Arithmetic,
            Centering::Lse => CenteringMode::LogSumExp,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Perpoint,
    Global,
    Hardswitch,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Linear,
    Logcdf,
}

impl From<Form> for OfflineForm {
    fn from(f: Form) -> Self {
        match f {
            Form::Linear => OfflineForm::Linear,
            Form::Logcdf => OfflineForm::LogCdf,
        }
    }
}

fn parse_stat(s: &str) -> Result<StatisticKind, String> {
    s.parse().map_err(|e: mia_llr::Error| e.to_string())
}

/// Options shared by every command that runs scorers.
#[derive(Args, Debug, Clone)]
pub struct MethodOpts {
    /// Statistic stored in the input files: loss, conf or logodds.
    #[arg(long, value_parser = parse_stat)]
    pub stat: StatisticKind,
    /// Treat the audit as offline (no shadow model trained on any point).
    #[arg(long)]
    pub offline: bool,
    /// BASE1 centering.
    #[arg(long, value_enum, default_value_t = Centering::Arithmetic)]
    pub centering: Centering,
    /// LiRA variance estimator.
    #[arg(long, value_enum, default_value_t = Variance::Perpoint)]
    pub variance: Variance,
    /// Shadow count per class below which the hard switch uses global variances.
    #[arg(long, default_value_t = mia_llr::base::HARD_SWITCH_THRESHOLD)]
    pub switch_threshold: usize,
    /// NIG prior file (`mu0 = ...` lines) for the BaVarIA methods.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// ELSA ridge strength.
    #[arg(long, default_value_t = mia_llr::elsa::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Offline BASE scale in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Offline LiRA mean shift.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Labelled reference dataset (same statistic) for the offline mean
    /// shift and BaVarIA prior.
    #[arg(long)]
    pub delta_ref: Option<PathBuf>,
    /// Offline LiRA link.
    #[arg(long, value_enum, default_value_t = Form::Linear)]
    pub offline_form: Form,
}

impl MethodOpts {
    pub fn variance_mode(&self) -> VarianceMode {
        match self.variance {
            Variance::Perpoint => VarianceMode::PerPoint,
            Variance::Global => VarianceMode::Global,
            Variance::Hardswitch => VarianceMode::HardSwitch {
                threshold: self.switch_threshold,
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Long-format CSV: point_id,model_id,stat,member.
    pub input: PathBuf,
    #[arg(long)]
    pub method: String,
    #[command(flatten)]
    pub opts: MethodOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print full precision instead of 6 significant digits.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// One or more labelled datasets; several are treated as replicates.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated method tokens to score and evaluate.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Precomputed `point_id,score` files; the file stem names the method.
    #[arg(long)]
    pub scores: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.001])]
    pub fprs: Vec<f64>,
    #[command(flatten)]
    pub opts: MethodOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Flat key-value config; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// gaussian or exponential.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub offline: bool,
    /// Shadow counts; one dataset per value, sharing truths and targets.
    #[arg(long, value_delimiter = ',')]
    pub sweep_k: Vec<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    pub input: PathBuf,
    #[arg(long, value_parser = parse_stat)]
    pub stat: StatisticKind,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Labelled replicate datasets sharing one point set.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    #[arg(long, default_value = "lira")]
    pub baseline: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.001])]
    pub fprs: Vec<f64>,
    #[command(flatten)]
    pub opts: MethodOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub raw: bool,
}
