//! Real-valued tables over depth-`k` cylinders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::{checked_size, decode, CylinderIndex};

/// Values indexed by depth-`k` words, lexicographic order.
///
/// A table of depth `k` also represents the locally constant function on the
/// shift that reads the first `k` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderTable {
    alphabet: usize,
    depth: usize,
    values: Vec<f64>,
}

/// Finite-depth function on the shift; same representation as a table.
pub type CylinderFunction = CylinderTable;

impl CylinderTable {
    pub fn new(alphabet: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        let expected = CylinderIndex::new(alphabet, depth)?.count();
        if values.len() != expected {
            return Err(Error::TableLength {
                got: values.len(),
                expected,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            alphabet,
            depth,
            values,
        })
    }

    pub fn constant(alphabet: usize, depth: usize, value: f64) -> Result<Self> {
        let count = CylinderIndex::new(alphabet, depth)?.count();
        Self::new(alphabet, depth, vec![value; count])
    }

    /// Tabulates `f` on every depth-`k` word.
    pub fn from_fn(alphabet: usize, depth: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let count = CylinderIndex::new(alphabet, depth)?.count();
        let values = (0..count).map(|i| f(&decode(alphabet, depth, i))).collect();
        Self::new(alphabet, depth, values)
    }

    /// Indicator of the cylinder `[word]`, tabulated at depth `word.len()`.
    pub fn indicator(alphabet: usize, word: &[usize]) -> Result<Self> {
        let index = CylinderIndex::new(alphabet, word.len())?;
        let hit = index.index(word)?;
        let mut values = vec![0.0; index.count()];
        values[hit] = 1.0;
        Self::new(alphabet, word.len(), values)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn word(&self, index: usize) -> Vec<usize> {
        decode(self.alphabet, self.depth, index)
    }

    /// Value on any word of length at least the depth (prefix lookup).
    pub fn eval(&self, word: &[usize]) -> Result<f64> {
        let index = CylinderIndex::new(self.alphabet, self.depth)?.index(word)?;
        Ok(self.values[index])
    }

    /// The same function tabulated at a larger depth.
    pub fn lift(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidParameter(format!(
                "cannot lift a depth-{} table to depth {depth}",
                self.depth
            )));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let stride = checked_size(self.alphabet, depth - self.depth)?;
        let count = checked_size(self.alphabet, depth)?;
        let values = (0..count).map(|i| self.values[i / stride]).collect();
        Ok(Self {
            alphabet: self.alphabet,
            depth,
            values,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.alphabet, self.depth, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination at the larger of the two depths.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch(self.alphabet, other.alphabet));
        }
        let depth = self.depth.max(other.depth);
        let a = self.lift(depth)?;
        let b = other.lift(depth)?;
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect();
        Self::new(self.alphabet, depth, values)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sup |f(x) - f(y)|` over points whose first `t` symbols agree.
    pub fn oscillation_at_agreement(&self, t: usize) -> f64 {
        if t >= self.depth {
            return 0.0;
        }
        let group = self.alphabet.pow((self.depth - t) as u32);
        self.values
            .chunks(group)
            .map(|chunk| {
                let (lo, hi) = chunk
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Exact `sup |f(x)-f(y)| / theta^{t(x,y)}` for the tabulated function.
    pub fn holder_seminorm(&self, theta: f64) -> f64 {
        (0..self.depth)
            .map(|t| self.oscillation_at_agreement(t) / theta.powi(t as i32))
            .fold(0.0, f64::max)
    }

    /// Sums over the trailing coordinates down to depth `n`.
    pub fn prefix_sums(&self, n: usize) -> Result<Self> {
        if n > self.depth {
            return Err(Error::DepthTooLarge {
                requested: n,
                available: self.depth,
            });
        }
        let group = self.alphabet.pow((self.depth - n) as u32);
        let values = self.values.chunks(group).map(|c| c.iter().sum()).collect();
        Self::new(self.alphabet, n, values)
    }

    /// Sums over the leading coordinate (image under the shift).
    pub fn shift_sums(&self) -> Result<Self> {
        if self.depth == 0 {
            return Err(Error::InvalidParameter("shift of a depth-0 table".into()));
        }
        let rest = self.values.len() / self.alphabet;
        let values = (0..rest)
            .map(|j| (0..self.alphabet).map(|i| self.values[i * rest + j]).sum())
            .collect();
        Self::new(self.alphabet, self.depth - 1, values)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| (a - b).abs())?.max().max(0.0))
    }
}
