use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Every tunable of every command. A `--config` JSON file may set any of
/// these under the same snake_case names; flags given on the command line
/// take precedence.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// JSON file with default values for any of the options below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue an interrupted adaptive run found in `--out`.
    #[arg(long)]
    #[serde(skip)]
    pub resume: bool,

    /// Builtin gate (cnx, cnz, cnrootx, qft; optionally `name:n`), `haar:<seed>`, or a QASM file.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub qubits: Option<usize>,
    /// connected, chain, star, ring, or a JSON coupling file.
    #[arg(long)]
    pub topology: Option<String>,
    /// hs or relative-phase.
    #[arg(long)]
    pub loss: Option<String>,
    /// xyz or xz.
    #[arg(long)]
    pub block_style: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub cp_gates: Option<usize>,
    #[arg(long)]
    pub reg_weight: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub num_gd_iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub entry_loss: Option<f64>,
    #[arg(long)]
    pub accepted_num_cz_gates: Option<usize>,
    #[arg(long)]
    pub cp_threshold: Option<f64>,
    #[arg(long)]
    pub target_loss: Option<f64>,
    #[arg(long)]
    pub num_gd_iterations_at_verification: Option<usize>,
    #[arg(long)]
    pub learning_rate_at_verification: Option<f64>,

    #[arg(long)]
    pub min_num_cp_gates: Option<usize>,
    #[arg(long)]
    pub max_num_cp_gates: Option<usize>,
    #[arg(long)]
    pub r_mean: Option<f64>,
    #[arg(long)]
    pub r_variance: Option<f64>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// tpe or random.
    #[arg(long)]
    pub suggester: Option<String>,
    #[arg(long)]
    pub goal_cz: Option<usize>,
    #[arg(long)]
    pub max_verifications_per_eval: Option<usize>,

    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub k_step: Option<usize>,
    /// self-instance or haar.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub num_targets: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,

    /// Decomposition store (JSON lines) or QASM file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Print only this record.
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long)]
    pub max_denominator: Option<i64>,
    #[arg(long)]
    pub loss_tolerance: Option<f64>,
    #[arg(long)]
    pub accept_loss: Option<f64>,
    /// same-qubit or all-pairs.
    #[arg(long)]
    pub merge_scope: Option<String>,
    #[arg(long)]
    pub refit_iterations: Option<usize>,
}

impl Options {
    /// Fills unset flags from the `--config` file, if any.
    pub fn resolve(self) -> Result<Self> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: Options = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let serde_json::Value::Object(mut merged) = serde_json::to_value(&file)? else { unreachable!() };
        let serde_json::Value::Object(flags) = serde_json::to_value(&self)? else { unreachable!() };
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        let mut out: Options = serde_json::from_value(serde_json::Value::Object(merged))?;
        out.config = Some(path);
        out.resume = self.resume;
        Ok(out)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("--out is required"),
        }
    }
}

/// Parses a lowercase enum name through its serde representation.
pub fn parse_enum<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).with_context(|| format!("unknown {what} '{s}'"))
}
