//! Writes an experiment to disk: CSV tables, SVG plots and a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::ExperimentKind;
use super::plot::Plot;
use super::record::{ExperimentRecord, FinalState, RunRecord, Table};
use crate::error::{Error, Result};

/// `{:.16e}`: 17 significant digits, round-trips every finite `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// RFC-4180 text (CRLF line ends, header row) for a table.
pub fn table_to_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::input(format!("csv encoding failed: {e}"));
    let head: Vec<&str> = table.label_column.iter().chain(&table.columns).map(String::as_str).collect();
    w.write_record(&head).map_err(csv_err)?;
    for (i, row) in table.rows.iter().enumerate() {
        let label = table.label_column.as_ref().map(|_| table.row_labels.get(i).cloned().unwrap_or_default());
        let fields = label.into_iter().chain(row.iter().map(|v| v.map(format_number).unwrap_or_default()));
        w.write_record(fields).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::input(format!("csv encoding failed: {e}")))
}

/// Parses a table written by [`table_to_csv`].
pub fn read_csv_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let columns = r
        .headers()
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|e| Error::Parse {
                        what: path.display().to_string(),
                        line: i + 2,
                        column: 0,
                        message: e.to_string(),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table {
        columns,
        rows,
        ..Table::default()
    })
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        self.put(name, &table_to_csv(table)?)
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

fn final_state_table(state: &FinalState) -> Option<Table> {
    match state {
        FinalState::Grid { period, values } => {
            let h = period / values.len() as f64;
            let mut t = Table::new(&["x", "rho"]);
            for (i, v) in values.iter().enumerate() {
                t.push_values(&[i as f64 * h, *v]);
            }
            Some(t)
        }
        FinalState::Particles { dim, positions } => {
            let cols: Vec<String> = (0..*dim).map(|k| format!("x{k}")).collect();
            let mut t = Table {
                columns: cols,
                ..Table::default()
            };
            for p in positions.chunks_exact(*dim) {
                t.push_values(p);
            }
            Some(t)
        }
        FinalState::None => None,
    }
}

fn metric_names(records: &[RunRecord]) -> Vec<String> {
    records
        .iter()
        .flat_map(|r| r.replicates.first())
        .flat_map(|r| r.table.columns.iter().skip(1).cloned())
        .fold(Vec::new(), |mut acc, c| {
            if !acc.contains(&c) {
                acc.push(c);
            }
            acc
        })
}

fn plots(rec: &ExperimentRecord) -> Vec<(String, Plot)> {
    let mut out = Vec::new();
    match rec.config.kind {
        ExperimentKind::Decay => {
            for r in &rec.records {
                let Some(rep) = r.replicates.first() else { continue };
                let cols: &[&str] = if rep.table.column_index("bound_b1").is_some() && r.label == "kl_decay" {
                    &["kl", "bound_b1", "bound_b2"]
                } else if r.label == "chi2_decay" {
                    &["chi2", "bound_chi2"]
                } else {
                    &["kl", "chi2"]
                };
                out.push((
                    format!("{}.svg", r.label),
                    Plot {
                        title: r.label.clone(),
                        x_label: "t".into(),
                        y_label: "divergence".into(),
                        log_x: false,
                        log_y: true,
                        lines: cols.iter().map(|c| (c.to_string(), rep.table.series(c))).collect(),
                    },
                ));
            }
        }
        ExperimentKind::EpsScaling => {
            out.push((
                "eps_trajectories.svg".into(),
                Plot {
                    title: "KL along the kernelized flow".into(),
                    x_label: "t".into(),
                    y_label: "KL".into(),
                    log_x: false,
                    log_y: true,
                    lines: rec
                        .records
                        .iter()
                        .filter_map(|r| Some((r.label.clone(), r.replicates.first()?.table.series("kl"))))
                        .collect(),
                },
            ));
            if let Some(t) = rec.tables.get("eps_scaling") {
                out.push((
                    "eps_scaling.svg".into(),
                    Plot {
                        title: "final divergence versus bandwidth".into(),
                        x_label: "epsilon".into(),
                        y_label: "value at T".into(),
                        log_x: true,
                        log_y: true,
                        lines: ["kl_final", "w2_final"].iter().map(|c| (c.to_string(), t.series(c))).collect(),
                    },
                ));
            }
        }
        ExperimentKind::Particles | ExperimentKind::Bayes => {
            let log_y = rec.config.kind == ExperimentKind::Particles;
            for m in metric_names(&rec.records) {
                let lines = rec
                    .records
                    .iter()
                    .map(|r| (r.label.clone(), r.aggregate().series(&format!("{m}_mean"))))
                    .collect();
                out.push((
                    format!("{m}.svg"),
                    Plot {
                        title: format!("{m}, mean over replicates"),
                        x_label: "t".into(),
                        y_label: m.clone(),
                        log_x: false,
                        log_y,
                        lines,
                    },
                ));
            }
        }
    }
    out
}

fn manifest(rec: &ExperimentRecord, files: &[String]) -> serde_json::Value {
    let errors: Vec<_> = rec
        .records
        .iter()
        .flat_map(|r| {
            r.errors()
                .map(move |(rep, why)| json!({"label": r.label, "replicate": rep, "reason": why}))
        })
        .collect();
    let seeds: Vec<_> = (0..rec.config.replicates)
        .map(|k| json!({"replicate": k, "seed": rec.master_seed, "stream": k}))
        .collect();
    let records: Vec<_> = rec
        .records
        .iter()
        .map(|r| {
            json!({
                "label": r.label,
                "wall_clock_s": r.wall_clock_s,
                "replicates": r.replicates.iter().map(|p| json!({
                    "replicate": p.replicate,
                    "stream": p.stream,
                    "diagnostics": p.diagnostics,
                    "error": p.error,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "preset": rec.config.preset.name(),
        "anchor": rec.config.preset.anchor(),
        "kind": rec.config.kind,
        "version": rec.version,
        "master_seed": rec.master_seed,
        "seeds": seeds,
        "config": rec.config,
        "summary": rec.summary,
        "notes": rec.notes,
        "records": records,
        "experiment_error": rec.error,
        "solver_errors": errors,
        "wall_clock_s": rec.wall_clock_s,
        "files": files,
    })
}

/// CSV file names for each record; grid experiments have one unsuffixed file.
fn record_files(rec: &ExperimentRecord, r: &RunRecord) -> Vec<(String, Table)> {
    let mut out = Vec::new();
    let single = matches!(rec.config.kind, ExperimentKind::Decay | ExperimentKind::EpsScaling);
    for p in &r.replicates {
        let stem = if single { r.label.clone() } else { format!("{}_rep{}", r.label, p.replicate) };
        out.push((format!("{stem}.csv"), p.table.clone()));
        if let Some(t) = final_state_table(&p.final_state) {
            out.push((format!("{stem}_final.csv"), t));
        }
    }
    if !single && !r.replicates.is_empty() {
        out.push((format!("{}_aggregate.csv", r.label), r.aggregate()));
    }
    out
}

/// Writes every artifact of `rec` into `dir` and returns the written paths.
/// On failure, files written so far are removed.
pub fn emit(rec: &ExperimentRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer {
        dir: dir.to_path_buf(),
        written: Vec::new(),
    };
    let result = (|| {
        let mut names = Vec::new();
        for r in &rec.records {
            for (name, t) in record_files(rec, r) {
                w.csv(&name, &t)?;
                names.push(name);
            }
        }
        for (stem, t) in &rec.tables {
            let name = format!("{stem}.csv");
            w.csv(&name, t)?;
            names.push(name);
        }
        for (name, p) in plots(rec) {
            w.put(&name, p.to_svg().as_bytes())?;
            names.push(name);
        }
        names.push("manifest.json".into());
        let m = serde_json::to_string_pretty(&manifest(rec, &names)).expect("manifest serializes");
        w.put("manifest.json", m.as_bytes())
    })();
    match result {
        Ok(()) => Ok(w.written),
        Err(e) => {
            w.cleanup();
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_has_header_and_crlf() {
        let mut t = Table::new(&["t", "kl"]);
        t.push(vec![Some(0.0), None]);
        t.push_values(&[0.5, 0.25]);
        let text = String::from_utf8(table_to_csv(&t).unwrap()).unwrap();
        assert_eq!(
            text,
            "t,kl\r\n0.0000000000000000e0,\r\n5.0000000000000000e-1,2.5000000000000000e-1\r\n"
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, text).unwrap();
        assert_eq!(read_csv_table(&p).unwrap(), t);
    }
}
