use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;

/// Column-oriented numeric table; `None` is written as an empty field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    /// Optional leading text column, one label per row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_labels: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(Some).collect());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// `(first column, named column)` pairs with both entries present.
    pub fn series(&self, name: &str) -> Vec<(f64, f64)> {
        let Some(j) = self.column_index(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| Some((r[0]?, r[j]?)))
            .collect()
    }

    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        match self.column_index(name) {
            Some(j) => self.rows.iter().map(|r| r[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let j = self.column_index(name)?;
        self.rows.last()?[j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FinalState {
    Grid { period: f64, values: Vec<f64> },
    Particles { dim: usize, positions: Vec<f64> },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    /// RNG stream index under the master seed.
    pub stream: u64,
    /// Time series: first column `t`, one column per metric.
    pub table: Table,
    pub final_state: FinalState,
    pub diagnostics: serde_json::Value,
    /// Reason when the solver aborted; the table holds the rows up to the abort.
    pub error: Option<String>,
}

/// All replicates of one algorithm, scheme or bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub replicates: Vec<ReplicateRecord>,
    pub wall_clock_s: f64,
}

impl RunRecord {
    /// Per-time mean and sample standard deviation over replicates that finished.
    pub fn aggregate(&self) -> Table {
        let ok: Vec<&Table> = self.replicates.iter().filter(|r| r.error.is_none()).map(|r| &r.table).collect();
        let Some(first) = ok.first() else {
            return Table::default();
        };
        let mut columns = vec![first.columns[0].clone()];
        for c in &first.columns[1..] {
            columns.push(format!("{c}_mean"));
            columns.push(format!("{c}_sd"));
        }
        let n_rows = ok.iter().map(|t| t.rows.len()).min().unwrap_or(0);
        let mut out = Table { columns, ..Table::default() };
        for i in 0..n_rows {
            let mut row = vec![first.rows[i][0]];
            for j in 1..first.columns.len() {
                let vals: Option<Vec<f64>> = ok.iter().map(|t| t.rows[i][j]).collect();
                match vals {
                    Some(v) => {
                        row.push(Some(crate::stats::mean(&v)));
                        row.push(Some(crate::stats::sample_sd(&v)));
                    }
                    None => row.extend([None, None]),
                }
            }
            out.rows.push(row);
        }
        out
    }

    pub fn errors(&self) -> impl Iterator<Item = (usize, &str)> {
        self.replicates.iter().filter_map(|r| r.error.as_deref().map(|e| (r.replicate, e)))
    }
}

/// Everything one `run` produced, ready to emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub version: String,
    pub records: Vec<RunRecord>,
    /// Derived tables such as the bandwidth ladder summary, keyed by file stem.
    pub tables: BTreeMap<String, Table>,
    /// Scalar results: fitted slopes, final means, bound parameters.
    pub summary: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
    /// Experiment-level failure before any record was produced.
    pub error: Option<String>,
    pub wall_clock_s: f64,
}

impl ExperimentRecord {
    pub fn has_solver_errors(&self) -> bool {
        self.error.is_some() || self.records.iter().any(|r| r.errors().next().is_some())
    }

    pub fn record(&self, label: &str) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.label == label)
    }
}
