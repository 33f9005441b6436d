//! Observed visible configurations and their empirical distribution.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Spins;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    rows: Vec<Spins>,
}

impl Dataset {
    pub fn new(rows: Vec<Spins>) -> Result<Self> {
        let n = rows.first().ok_or(Error::EmptyDataset)?.len();
        if n == 0 {
            return Err(Error::Parse("dataset rows are empty".into()));
        }
        if let Some((idx, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected {n}",
                idx + 1,
                row.len()
            )));
        }
        Ok(Dataset { n, rows })
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Spins] {
        &self.rows
    }

    /// Per-coordinate sample means `<x_i>_D`.
    pub fn means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in &self.rows {
            for (s, &v) in sums.iter_mut().zip(row.values()) {
                *s += v as f64;
            }
        }
        let m = self.rows.len() as f64;
        sums.into_iter().map(|s| s / m).collect()
    }

    /// Distinct rows with their empirical probabilities `Q(x)`, sorted by state.
    ///
    /// Duplicates are merged into a multiplicity weight, so averages over the
    /// result equal averages over the raw rows and do not depend on row order.
    pub fn empirical(&self) -> Vec<(Spins, f64)> {
        let mut counts: BTreeMap<&Spins, usize> = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row).or_default() += 1;
        }
        let m = self.rows.len() as f64;
        counts
            .into_iter()
            .map(|(row, c)| (row.clone(), c as f64 / m))
            .collect()
    }

    /// Reads headerless CSV; every entry must be `-1` or `1`.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (lineno, record) in rdr.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|field| {
                    field.parse::<i64>().map_err(|_| {
                        Error::Parse(format!("line {}: bad entry {field:?}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<i64>>>()?;
            rows.push(Spins::from_i64(&values)?);
        }
        Dataset::new(rows)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for row in &self.rows {
            wtr.write_record(row.values().iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}
