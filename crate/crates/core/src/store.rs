//! JSON-lines persistence of decompositions.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{emit_qasm, parse_qasm, CircuitIR, CouplingMap};
use crate::error::{Error, Result};
use crate::synthesis::Decomposition;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    /// Builtin target name, or `sha256:<hex>` of the target matrix.
    pub target: String,
    pub topology: CouplingMap,
    pub cz_count: usize,
    pub cz_depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_depth: Option<usize>,
    pub loss: f64,
    pub angles: Vec<f64>,
    pub qasm: String,
    pub seed: u64,
    pub sample_index: usize,
    pub k: usize,
    pub reg_weight: f64,
    pub config_digest: String,
}

/// Hex SHA-256 of the JSON form of any config value.
pub fn config_digest<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Name for an anonymous target: hash of its entries' bit patterns.
pub fn target_hash(m: &Matrix) -> String {
    let mut h = Sha256::new();
    for z in m.data() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    format!("sha256:{}", hex::encode(h.finalize()))
}

impl StoreRecord {
    pub fn new(d: &Decomposition, target: &str, topology: &CouplingMap, config_digest: &str) -> Result<Self> {
        Ok(Self {
            target: target.to_string(),
            topology: topology.clone(),
            cz_count: d.cz_count,
            cz_depth: d.cz_depth,
            t_count: None,
            t_depth: None,
            loss: d.loss,
            angles: d.params.clone(),
            qasm: emit_qasm(&d.circuit, &d.params)?,
            seed: d.provenance.seed,
            sample_index: d.provenance.sample_index,
            k: d.provenance.k,
            reg_weight: d.provenance.reg_weight,
            config_digest: config_digest.to_string(),
        })
    }

    /// Rebuilds the circuit: structure from the QASM text, angles from the
    /// stored vector so they are bit-exact.
    pub fn circuit(&self) -> Result<CircuitIR> {
        parse_qasm(&self.qasm)?.with_params(&self.angles)
    }
}

pub fn append_record(path: &Path, rec: &StoreRecord) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(rec)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    Ok(())
}

/// Reads every non-empty line of a JSON-lines file.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::InvalidArgument(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<StoreRecord>> {
    read_jsonl(path)
}
