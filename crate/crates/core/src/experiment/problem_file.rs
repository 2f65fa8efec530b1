//! JSON problem files.
//!
//! ```json
//! { "format_version": 1, "n": 2, "blocks": [1, 1],
//!   "q": [4.0, 0.0, 0.0, 1.0], "r": [1.0, 1.0],
//!   "box": { "lower": [-5.0, -5.0], "upper": [5.0, 5.0] } }
//! ```
//!
//! `q` is row-major. Floats are written in shortest round-trip form, so a
//! saved problem reloads bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::qp::{BlockPartition, BoxBounds, QuadraticProblem};

pub const PROBLEM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub format_version: u32,
    pub n: usize,
    pub blocks: Vec<usize>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoxBounds>,
}

impl From<&QuadraticProblem> for ProblemFile {
    fn from(p: &QuadraticProblem) -> Self {
        ProblemFile {
            format_version: PROBLEM_FORMAT_VERSION,
            n: p.dim(),
            blocks: p.partition().sizes().to_vec(),
            q: p.q().as_slice().to_vec(),
            r: p.r().to_vec(),
            bounds: p.bounds().cloned(),
        }
    }
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<QuadraticProblem> {
        if self.format_version != PROBLEM_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported problem format_version {} (expected {PROBLEM_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let partition = BlockPartition::new(self.blocks)?;
        if partition.dim() != self.n {
            return Err(Error::InvalidPartition(format!("blocks sum to {}, but n = {}", partition.dim(), self.n)));
        }
        let q = Matrix::from_row_major(self.n, self.n, self.q)?;
        QuadraticProblem::new(q, self.r, partition, self.bounds)
    }
}

pub fn save_problem(problem: &QuadraticProblem, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&ProblemFile::from(problem)).expect("problem file serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_problem(path: &Path) -> Result<QuadraticProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ProblemFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    file.into_problem()
}
