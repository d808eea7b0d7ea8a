use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ectctl::synth::CohortGenSpec;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ectctl", version, about = "Network control analysis of ECT seizure data")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// Input files or directories.
    #[arg(long, global = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, env = "ECTCTL_SEED")]
    pub seed: Option<u64>,
    /// Minimum streamline count for an edge.
    #[arg(long, global = true)]
    pub threshold: Option<u32>,
    /// PSI window length in seconds.
    #[arg(long, global = true)]
    pub psi_window: Option<f64>,
    /// Total PSI guard interval around the seizure endpoint, in seconds.
    #[arg(long, global = true)]
    pub psi_guard: Option<f64>,
    /// Sampling rate in Hz.
    #[arg(long, global = true)]
    pub fs: Option<f64>,
    /// Hypothesised effect direction: positive or negative.
    #[arg(long, global = true)]
    pub direction: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub n_boot: Option<usize>,
    #[arg(long, global = true)]
    pub n_perm: Option<usize>,
    /// TOML or JSON file whose values override the flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Flag outlier connectomes with Tukey fences.
    Qc(QcArgs),
    /// Whole-brain and nodal modal/average controllability.
    Controllability(ControllabilityArgs),
    /// Simulate the stimulated network and its EEG proxy.
    Simulate(SimulateArgs),
    /// Postictal suppression index of a recorded trace.
    Psi(PsiArgs),
    /// Covariate-adjusted F-test of one predictor.
    Ancova(AncovaArgs),
    /// Bootstrap/permutation mediation analysis.
    Mediate(MediateArgs),
    /// Nested leave-one-out pipeline benchmark.
    Mlbench(MlbenchArgs),
    /// Generate a synthetic cohort with planted effects.
    Synth(SynthArgs),
    /// Run the four cohort analyses and write a report.
    Replicate(ReplicateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Qc(_) => "qc",
            Command::Controllability(_) => "controllability",
            Command::Simulate(_) => "simulate",
            Command::Psi(_) => "psi",
            Command::Ancova(_) => "ancova",
            Command::Mediate(_) => "mediate",
            Command::Mlbench(_) => "mlbench",
            Command::Synth(_) => "synth",
            Command::Replicate(_) => "replicate",
        }
    }

    fn args_value(&self) -> Result<Value, CliError> {
        let v = match self {
            Command::Qc(a) => serde_json::to_value(a),
            Command::Controllability(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::Psi(a) => serde_json::to_value(a),
            Command::Ancova(a) => serde_json::to_value(a),
            Command::Mediate(a) => serde_json::to_value(a),
            Command::Mlbench(a) => serde_json::to_value(a),
            Command::Synth(a) => serde_json::to_value(a),
            Command::Replicate(a) => serde_json::to_value(a),
        };
        v.map_err(|e| CliError::Config(e.to_string()))
    }

    fn with_args(&self, v: Value) -> Result<Command, CliError> {
        fn de<T: DeserializeOwned>(v: Value, section: &str) -> Result<T, CliError> {
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("[{section}]: {e}")))
        }
        let name = self.name();
        Ok(match self {
            Command::Qc(_) => Command::Qc(de(v, name)?),
            Command::Controllability(_) => Command::Controllability(de(v, name)?),
            Command::Simulate(_) => Command::Simulate(de(v, name)?),
            Command::Psi(_) => Command::Psi(de(v, name)?),
            Command::Ancova(_) => Command::Ancova(de(v, name)?),
            Command::Mediate(_) => Command::Mediate(de(v, name)?),
            Command::Mlbench(_) => Command::Mlbench(de(v, name)?),
            Command::Synth(_) => Command::Synth(de(v, name)?),
            Command::Replicate(_) => Command::Replicate(de(v, name)?),
        })
    }
}

const SECTIONS: [&str; 9] = [
    "qc",
    "controllability",
    "simulate",
    "psi",
    "ancova",
    "mediate",
    "mlbench",
    "synth",
    "replicate",
];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcArgs {
    /// Tukey fence multiplier.
    #[arg(long)]
    pub fence: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllabilityArgs {
    /// Also write per-node values.
    #[arg(long)]
    pub nodal: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub stimulus_steps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub control_nodes: Option<Vec<usize>>,
    #[arg(long)]
    pub background_power: Option<f64>,
    /// Run a stability sweep with this many points instead of one simulation.
    #[arg(long)]
    pub sweep: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiArgs {
    /// Sample index of the seizure endpoint.
    #[arg(long)]
    pub endpoint: Option<usize>,
    /// Number of windows on each side.
    #[arg(long)]
    pub windows: Option<usize>,
    /// Trace column holding the signal.
    #[arg(long)]
    pub column: Option<String>,
    /// Treat samples as amplitudes (squared for power) instead of power.
    #[arg(long)]
    pub amplitude: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AncovaArgs {
    #[arg(long)]
    pub dependent: Option<String>,
    #[arg(long)]
    pub independent: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediateArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlbenchArgs {
    /// Feature matrix as `name=path`; repeatable.
    #[arg(long = "features")]
    pub features: Vec<String>,
    /// Pipeline spec file (TOML or JSON); the default space otherwise.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Cohort column to predict.
    #[arg(long)]
    pub target: Option<String>,
    /// Cohort columns scored as single features.
    #[arg(long, value_delimiter = ',')]
    pub single: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_subjects: Option<usize>,
    #[arg(long)]
    pub n_nodes: Option<usize>,
    /// Full generator spec; only settable from a config file.
    #[arg(skip)]
    pub cohort: Option<CohortGenSpec>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicateArgs {
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub common: Common,
    pub command: Command,
}

impl RunConfig {
    pub fn to_value(&self) -> Result<Value, CliError> {
        let mut v = serde_json::to_value(&self.common).map_err(|e| CliError::Config(e.to_string()))?;
        if let Value::Object(map) = &mut v {
            map.insert(self.command.name().into(), self.command.args_value()?);
        }
        Ok(v)
    }
}

fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<Value>(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str::<Value>(&text).map_err(|e| e.to_string())
    };
    match parsed {
        Ok(v @ Value::Object(_)) => Ok(v),
        Ok(_) => Err(CliError::Config("config file must hold a table".into())),
        Err(e) => Err(CliError::Config(format!("invalid config {}: {e}", path.display()))),
    }
}

/// Keys of `top` replace those of `base`.
fn overlay(base: Value, top: serde_json::Map<String, Value>) -> Value {
    match base {
        Value::Object(mut map) => {
            map.extend(top);
            Value::Object(map)
        }
        other => other,
    }
}

pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let Some(path) = cli.common.config.clone() else {
        return Ok(RunConfig {
            common: cli.common,
            command: cli.command,
        });
    };
    let Value::Object(mut file) = read_config_file(&path)? else {
        unreachable!("read_config_file returns objects")
    };
    let section = match file.remove(cli.command.name()) {
        Some(Value::Object(m)) => m,
        Some(_) => {
            return Err(CliError::Config(format!(
                "[{}] must be a table",
                cli.command.name()
            )))
        }
        None => Default::default(),
    };
    file.retain(|k, _| !SECTIONS.contains(&k.as_str()));

    let base = serde_json::to_value(&cli.common).map_err(|e| CliError::Config(e.to_string()))?;
    let mut common: Common = serde_json::from_value(overlay(base, file))
        .map_err(|e| CliError::Config(format!("config: {e}")))?;
    common.config = Some(path);
    let command = cli.command.with_args(overlay(cli.command.args_value()?, section))?;
    Ok(RunConfig { common, command })
}
