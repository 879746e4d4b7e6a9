//! Chain-description JSON: `{"states": [...], "pi": [...], "P": [[...]]}`,
//! plus `"output_states"` for kernels between distinct spaces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain_core::{Distribution, Kernel, ReversiblePair};
use crate::error::{Error, Result};
use crate::factorization::Factorization;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub states: Vec<String>,
    pub pi: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_states: Option<Vec<String>>,
}

/// Largest state space accepted from a file.
pub const MAX_STATES: usize = 10_000;

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl ChainDocument {
    pub fn from_pair(pair: &ReversiblePair, states: Vec<String>) -> Result<Self> {
        if states.len() != pair.len() {
            return Err(Error::DimensionMismatch {
                context: "state labels",
                expected: pair.len(),
                found: states.len(),
            });
        }
        Ok(Self {
            states,
            pi: pair.pi().weights().to_vec(),
            p: pair.kernel().to_rows(),
            output_states: None,
        })
    }

    /// The half-step kernel K of a factorization, as an X → Y document.
    pub fn from_factorization(f: &Factorization, states: Vec<String>) -> Result<Self> {
        if states.len() != f.k().n_in() {
            return Err(Error::DimensionMismatch {
                context: "state labels",
                expected: f.k().n_in(),
                found: states.len(),
            });
        }
        Ok(Self {
            states,
            pi: f.pi().weights().to_vec(),
            p: f.k().to_rows(),
            output_states: Some(f.output_labels.clone()),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.check_shape()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("chain documents always serialize");
        s.push('\n');
        s
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.states.len();
        let n_out = self.output_states.as_ref().map_or(n, Vec::len);
        if n == 0 || n > MAX_STATES || n_out == 0 || n_out > MAX_STATES {
            return Err(Error::Parse(format!(
                "state count must be in 1..={MAX_STATES}"
            )));
        }
        if self.pi.len() != n {
            return Err(Error::DimensionMismatch {
                context: "pi",
                expected: n,
                found: self.pi.len(),
            });
        }
        if self.p.len() != n {
            return Err(Error::DimensionMismatch {
                context: "P rows",
                expected: n,
                found: self.p.len(),
            });
        }
        if let Some(row) = self.p.iter().find(|r| r.len() != n_out) {
            return Err(Error::DimensionMismatch {
                context: "P columns",
                expected: n_out,
                found: row.len(),
            });
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<Distribution> {
        Distribution::new(self.pi.clone())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::from_rows(self.p.clone())
    }

    /// Validate as a reversible pair; requires a square kernel.
    pub fn to_pair(&self) -> Result<ReversiblePair> {
        if let Some(out) = &self.output_states {
            if out != &self.states {
                return Err(Error::InvalidKernel(
                    "a reversible pair needs P: X → X".into(),
                ));
            }
        }
        ReversiblePair::new(self.distribution()?, self.kernel()?)
    }
}
