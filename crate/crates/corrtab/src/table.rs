//! 2x2 contingency table data model: parsing, validation, empirical rates,
//! and the cross-table Pearson correlation of observed success rates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correction applied to degenerate cells (y = 0 or y = n) wherever an
/// empirical logit or rate would otherwise be infinite or stuck at 0/1.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// One 2x2 table: successes and totals for two arms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    y1: u64,
    n1: u64,
    y2: u64,
    n2: u64,
    label: Option<String>,
}

impl ContingencyTable {
    pub fn new(y1: u64, n1: u64, y2: u64, n2: u64, label: Option<String>) -> Result<Self> {
        Self::validated(y1, n1, y2, n2, label, 0)
    }

    fn validated(
        y1: u64,
        n1: u64,
        y2: u64,
        n2: u64,
        label: Option<String>,
        row: usize,
    ) -> Result<Self> {
        let fail = |reason: &str| Error::InvalidRow {
            row,
            reason: reason.to_string(),
        };
        if n1 == 0 {
            return Err(fail("n1 is zero"));
        }
        if n2 == 0 {
            return Err(fail("n2 is zero"));
        }
        if y1 > n1 {
            return Err(fail("y1 exceeds n1"));
        }
        if y2 > n2 {
            return Err(fail("y2 exceeds n2"));
        }
        Ok(Self {
            y1,
            n1,
            y2,
            n2,
            label,
        })
    }

    pub fn y1(&self) -> u64 {
        self.y1
    }

    pub fn n1(&self) -> u64 {
        self.n1
    }

    pub fn y2(&self) -> u64 {
        self.y2
    }

    pub fn n2(&self) -> u64 {
        self.n2
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// The same table with the two arms exchanged.
    pub fn swap_arms(&self) -> Self {
        Self {
            y1: self.y2,
            n1: self.n2,
            y2: self.y1,
            n2: self.n1,
            label: self.label.clone(),
        }
    }
}

/// Raw observed success rates (y1/n1, y2/n2).
pub fn empirical_rates(t: &ContingencyTable) -> (f64, f64) {
    (t.y1 as f64 / t.n1 as f64, t.y2 as f64 / t.n2 as f64)
}

/// Replaces a degenerate count by `epsilon` (y = 0) or `n - epsilon` (y = n);
/// interior counts pass through unchanged.
pub fn correct_counts(y: u64, n: u64, epsilon: f64) -> f64 {
    if y == 0 {
        epsilon
    } else if y == n {
        n as f64 - epsilon
    } else {
        y as f64
    }
}

/// An ordered collection of tables from one study series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSet {
    name: String,
    tables: Vec<ContingencyTable>,
}

impl TableSet {
    pub fn new(name: impl Into<String>, tables: Vec<ContingencyTable>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::EmptyTableSet);
        }
        for (i, t) in tables.iter().enumerate() {
            if let Some(label) = t.label() {
                if tables[..i].iter().any(|u| u.label() == Some(label)) {
                    return Err(Error::DuplicateLabel {
                        row: i + 1,
                        label: label.to_string(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            tables,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tables(&self) -> &[ContingencyTable] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ContingencyTable> {
        self.tables.iter()
    }

    pub fn swap_arms(&self) -> Self {
        Self {
            name: self.name.clone(),
            tables: self
                .tables
                .iter()
                .map(ContingencyTable::swap_arms)
                .collect(),
        }
    }

    /// Renders the set back to the `trial,y1,n1,y2,n2` text format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,y1,n1,y2,n2\n");
        for (i, t) in self.tables.iter().enumerate() {
            let label = t
                .label()
                .map(str::to_string)
                .unwrap_or_else(|| (i + 1).to_string());
            let _ = writeln!(out, "{},{},{},{},{}", label, t.y1, t.n1, t.y2, t.n2);
        }
        out
    }
}

/// Parses delimiter-separated text with header `trial,y1,n1,y2,n2` into a
/// table set. The trial column becomes the table label. Errors carry the
/// 1-based data row number.
pub fn parse_table_set(source: &str, name: impl Into<String>) -> Result<TableSet> {
    let mut lines = source.lines();
    let header = loop {
        match lines.next() {
            Some(line) if line.trim().is_empty() => continue,
            Some(line) => break line,
            None => return Err(Error::EmptyTableSet),
        }
    };
    let expected = ["trial", "y1", "n1", "y2", "n2"];
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields != expected {
        return Err(Error::InvalidRow {
            row: 0,
            reason: format!("bad header '{header}', expected 'trial,y1,n1,y2,n2'"),
        });
    }

    let mut tables = Vec::new();
    let mut row = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(Error::InvalidRow {
                row,
                reason: format!("malformed row: expected 5 fields, got {}", cols.len()),
            });
        }
        let mut counts = [0u64; 4];
        for (slot, (value, col)) in counts
            .iter_mut()
            .zip(cols[1..].iter().zip(["y1", "n1", "y2", "n2"]))
        {
            *slot = value.parse().map_err(|_| Error::InvalidRow {
                row,
                reason: format!("invalid count '{value}' for {col}"),
            })?;
        }
        let table = ContingencyTable::validated(
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            Some(cols[0].to_string()),
            row,
        )?;
        tables.push(table);
    }
    if tables.is_empty() {
        return Err(Error::EmptyTableSet);
    }
    TableSet::new(name, tables)
}

/// Sample Pearson correlation across tables between the two arms' observed
/// success rates.
///
/// Degenerate cells enter through the epsilon correction (0 -> eps,
/// n -> n - eps) before forming rates; this reproduces the reference value
/// on sparse data where raw 0/1 rates do not.
pub fn rate_correlation(set: &TableSet) -> Result<f64> {
    rate_correlation_with_epsilon(set, DEFAULT_EPSILON)
}

pub fn rate_correlation_with_epsilon(set: &TableSet, epsilon: f64) -> Result<f64> {
    let k = set.len();
    if k < 2 {
        return Err(Error::TooFewTables(k));
    }
    let rates: Vec<(f64, f64)> = set
        .iter()
        .map(|t| {
            (
                correct_counts(t.y1, t.n1, epsilon) / t.n1 as f64,
                correct_counts(t.y2, t.n2, epsilon) / t.n2 as f64,
            )
        })
        .collect();
    let mean1 = rates.iter().map(|r| r.0).sum::<f64>() / k as f64;
    let mean2 = rates.iter().map(|r| r.1).sum::<f64>() / k as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (r1, r2) in &rates {
        let dx = r1 - mean1;
        let dy = r2 - mean2;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::CorrelationUndefined);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
