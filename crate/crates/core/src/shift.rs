//! Alphabets, words and cylinder indexing for finite truncations of the full
//! shift, together with enumeration of periodic points and first-return loops.
//!
//! A countable alphabet is modelled by the truncation `{0, .., N-1}`; every
//! table in the crate is indexed by words in lexicographic order, with the
//! first symbol most significant.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of entries of any enumerated table.
pub const DEFAULT_CAPACITY: usize = 10_000_000;

/// Environment variable overriding [`DEFAULT_CAPACITY`].
pub const CAPACITY_ENV: &str = "THERMO_CAPACITY";

/// Current table-size cap (read once from `THERMO_CAPACITY`).
pub fn capacity_limit() -> usize {
    static LIMIT: OnceLock<usize> = OnceLock::new();
    *LIMIT.get_or_init(|| {
        std::env::var(CAPACITY_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_CAPACITY)
    })
}

/// `base^exp` as a table size, failing when it exceeds the capacity limit.
pub fn checked_size(base: usize, exp: usize) -> Result<usize> {
    let limit = capacity_limit();
    let requested = (base as u128).checked_pow(exp as u32).unwrap_or(u128::MAX);
    if requested > limit as u128 {
        return Err(Error::Capacity { requested, limit });
    }
    Ok(requested as usize)
}

/// Finite truncation of a countable alphabet: symbols `0..size`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::AlphabetTooSmall(size));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut alphabet = Self::new(labels.len())?;
        alphabet.labels = Some(labels);
        Ok(alphabet)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, symbol: usize) -> Option<&str> {
        self.labels.as_ref()?.get(symbol).map(String::as_str)
    }

    pub fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol < self.size {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: self.size,
            })
        }
    }
}

/// A finite word over a truncated alphabet.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self(symbols)
    }

    /// Builds a word and checks every symbol against the alphabet.
    pub fn checked(alphabet: &Alphabet, symbols: Vec<usize>) -> Result<Self> {
        for &s in &symbols {
            alphabet.check_symbol(s)?;
        }
        Ok(Self(symbols))
    }

    /// Parses digit strings such as `"0110"` (alphabets of size at most 10).
    pub fn parse(digits: &str) -> Result<Self> {
        digits
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::InvalidParameter(format!("not a digit word: {digits}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let small = self.0.iter().all(|&s| s < 10);
        for (i, s) in self.0.iter().enumerate() {
            if small {
                write!(f, "{s}")?;
            } else {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{s}")?;
            }
        }
        Ok(())
    }
}

/// Bijection between depth-`k` words and `0..N^k`, lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CylinderIndex {
    alphabet: usize,
    depth: usize,
    count: usize,
}

impl CylinderIndex {
    pub fn new(alphabet: usize, depth: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::AlphabetTooSmall(alphabet));
        }
        let count = checked_size(alphabet, depth)?;
        Ok(Self {
            alphabet,
            depth,
            count,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Index of the depth-`k` prefix of `symbols`.
    pub fn index(&self, symbols: &[usize]) -> Result<usize> {
        if symbols.len() < self.depth {
            return Err(Error::WordTooShort {
                len: symbols.len(),
                required: self.depth,
            });
        }
        let mut idx = 0;
        for &s in &symbols[..self.depth] {
            if s >= self.alphabet {
                return Err(Error::SymbolOutOfRange {
                    symbol: s,
                    alphabet: self.alphabet,
                });
            }
            idx = idx * self.alphabet + s;
        }
        Ok(idx)
    }

    pub fn word(&self, index: usize) -> Word {
        Word(decode(self.alphabet, self.depth, index))
    }

    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.count).map(|i| self.word(i))
    }
}

/// Symbols of the word with the given lexicographic index.
pub(crate) fn decode(alphabet: usize, depth: usize, mut index: usize) -> Vec<usize> {
    let mut symbols = vec![0; depth];
    for slot in symbols.iter_mut().rev() {
        *slot = index % alphabet;
        index /= alphabet;
    }
    symbols
}

/// All words of length `n`, in lexicographic order.
pub fn enumerate_words(alphabet: &Alphabet, n: usize) -> Result<Vec<Word>> {
    let index = CylinderIndex::new(alphabet.size(), n)?;
    Ok(index.words().collect())
}

/// Length-`n` words starting with `a`; each is the repeating block of a
/// period-`n` point of the full shift with `x_0 = a`.
pub fn periodic_words(alphabet: &Alphabet, n: usize, a: usize) -> Result<Vec<Word>> {
    if n == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    alphabet.check_symbol(a)?;
    let free = CylinderIndex::new(alphabet.size(), n - 1)?;
    Ok((0..free.count())
        .map(|i| {
            let mut symbols = Vec::with_capacity(n);
            symbols.push(a);
            symbols.extend(decode(alphabet.size(), n - 1, i));
            Word(symbols)
        })
        .collect())
}

/// Length-`n` words starting with `a` with no further occurrence of `a`.
pub fn first_return_words(alphabet: &Alphabet, n: usize, a: usize) -> Result<Vec<Word>> {
    if n == 0 {
        return Err(Error::InvalidParameter("loop length must be at least 1".into()));
    }
    alphabet.check_symbol(a)?;
    let others: Vec<usize> = (0..alphabet.size()).filter(|&s| s != a).collect();
    let free = CylinderIndex::new(others.len().max(2), n - 1)?;
    let count = if others.len() == 1 { 1 } else { free.count() };
    Ok((0..count)
        .map(|i| {
            let mut symbols = Vec::with_capacity(n);
            symbols.push(a);
            if others.len() == 1 {
                symbols.extend(std::iter::repeat_n(others[0], n - 1));
            } else {
                symbols.extend(decode(others.len(), n - 1, i).into_iter().map(|d| others[d]));
            }
            Word(symbols)
        })
        .collect())
}

/// First index where the words differ, compared over their common length.
///
/// `None` is the `+∞` marker: the words agree on the whole compared range.
pub fn first_disagreement(x: &[usize], y: &[usize]) -> Option<usize> {
    x.iter().zip(y).position(|(a, b)| a != b)
}

/// Number of indices before the first disagreement where both words carry `a`.
pub fn marked_prefix_count(x: &[usize], y: &[usize], a: usize) -> usize {
    let t = first_disagreement(x, y).unwrap_or_else(|| x.len().min(y.len()));
    x[..t].iter().filter(|&&s| s == a).count()
}
