//! JSON documents for potentials and g-functions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gmeasure::GFunction;
use crate::potential::{Potential, Tail};
use crate::table::CylinderTable;

/// `{depth, alphabet_size, table, tail: {C, theta}}`; `tail` may be omitted
/// for locally constant inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub depth: usize,
    pub alphabet_size: usize,
    pub table: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<Tail>,
}

impl TableDoc {
    pub fn from_potential(phi: &Potential) -> Self {
        Self {
            depth: phi.depth(),
            alphabet_size: phi.alphabet(),
            table: phi.table().values().to_vec(),
            tail: Some(phi.tail()),
        }
    }

    pub fn from_g(g: &GFunction) -> Self {
        Self {
            depth: g.depth(),
            alphabet_size: g.alphabet(),
            table: g.table().values().to_vec(),
            tail: None,
        }
    }

    pub fn table(&self) -> Result<CylinderTable> {
        CylinderTable::new(self.alphabet_size, self.depth, self.table.clone())
    }

    pub fn potential(&self) -> Result<Potential> {
        Potential::new(self.table()?, self.tail.unwrap_or(Tail::EXACT))
    }

    pub fn g_function(&self) -> Result<GFunction> {
        GFunction::new(self.table()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Either a path to a [`TableDoc`] or the document inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Path(PathBuf),
    Inline(TableDoc),
}

impl Source {
    pub fn load(&self) -> Result<TableDoc> {
        match self {
            Source::Path(p) => TableDoc::read(p),
            Source::Inline(doc) => Ok(doc.clone()),
        }
    }

    /// Resolves a relative path against `base`.
    pub fn relative_to(self, base: &Path) -> Self {
        match self {
            Source::Path(p) if p.is_relative() => Source::Path(base.join(p)),
            other => other,
        }
    }
}
