//! JSON form of operators: `{"dims": [rows, cols], "entries": [[re, im], ...]}`
//! with entries in row-major order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{CMatrix, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerializedOperator {
    pub dims: [usize; 2],
    pub entries: Vec<[f64; 2]>,
}

impl SerializedOperator {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let [rows, cols] = self.dims;
        if self.entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "dims {rows}x{cols} need {} entries, found {}",
                rows * cols,
                self.entries.len()
            )));
        }
        CMatrix::new(
            rows,
            cols,
            self.entries.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        )
    }
}

impl From<&CMatrix> for SerializedOperator {
    fn from(m: &CMatrix) -> Self {
        Self {
            dims: [m.rows(), m.cols()],
            entries: m.as_slice().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// A state vector as a list of `[re, im]` pairs.
pub fn vector_to_pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn pairs_to_vector(p: &[[f64; 2]]) -> Vec<C64> {
    p.iter().map(|&[re, im]| C64::new(re, im)).collect()
}
