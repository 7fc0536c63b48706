//! Plot-ready exports: converts metrics CSVs into tidy long-format rows
//! (`run,x,series,y`) and, for multiple runs, per-x mean/min/max bands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub run: String,
    pub x: f64,
    pub series: String,
    pub y: f64,
}

/// Parse one metrics CSV into long-format rows. The `timesteps` column is
/// the x axis; every other numeric column becomes a series. Malformed rows
/// are skipped with a line-numbered warning.
pub fn read_metrics_long(path: &Path) -> Result<Vec<LongRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let run = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split(',').collect();
    let Some(x_idx) = cols.iter().position(|&c| c == "timesteps") else {
        return Err(Error::Format(format!("{}: no 'timesteps' column", path.display())));
    };
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            log::warn!("{}:{}: malformed row skipped ({} fields, wanted {})",
                path.display(), lineno + 1, fields.len(), cols.len());
            continue;
        }
        let Ok(x) = fields[x_idx].parse::<f64>() else {
            log::warn!("{}:{}: malformed row skipped (bad x value)", path.display(), lineno + 1);
            continue;
        };
        for (i, &col) in cols.iter().enumerate() {
            if i == x_idx || col == "iteration" {
                continue;
            }
            if fields[i].is_empty() {
                continue;
            }
            match fields[i].parse::<f64>() {
                Ok(y) => rows.push(LongRow { run: run.clone(), x, series: col.to_string(), y }),
                Err(_) => {
                    log::warn!("{}:{}: unparseable value in column {col} skipped", path.display(), lineno + 1)
                }
            }
        }
    }
    Ok(rows)
}

pub fn long_csv(rows: &[LongRow]) -> String {
    let mut s = String::from("run,x,series,y\n");
    for r in rows {
        s.push_str(&format!("{},{:?},{},{:?}\n", r.run, r.x, r.series, r.y));
    }
    s
}

/// Per-(x, series) mean and min/max band over the runs that have the point.
pub fn aggregate_bands(rows: &[LongRow]) -> String {
    let mut groups: BTreeMap<(String, u64), (f64, f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.series.clone(), r.x.to_bits());
        let e = groups.entry(key).or_insert((0.0, f64::INFINITY, f64::NEG_INFINITY, 0));
        e.0 += r.y;
        e.1 = e.1.min(r.y);
        e.2 = e.2.max(r.y);
        e.3 += 1;
    }
    let mut s = String::from("x,series,mean,min,max\n");
    for ((series, xb), (sum, lo, hi, n)) in groups {
        let x = f64::from_bits(xb);
        s.push_str(&format!("{:?},{},{:?},{:?},{:?}\n", x, series, sum / n as f64, lo, hi));
    }
    s
}

#[derive(Debug, Clone)]
pub struct PlotDataPaths {
    pub long_path: PathBuf,
    pub bands_path: Option<PathBuf>,
}

/// Read all inputs and write `plot_long.csv` (and `plot_bands.csv` when
/// more than one input was merged) into `out_dir`.
pub fn emit_plot_data(inputs: &[PathBuf], out_dir: &Path) -> Result<PlotDataPaths> {
    let mut all = Vec::new();
    for p in inputs {
        all.extend(read_metrics_long(p)?);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let long_path = out_dir.join("plot_long.csv");
    std::fs::write(&long_path, long_csv(&all)).map_err(|e| Error::io(&long_path, e))?;
    let bands_path = if inputs.len() > 1 {
        let p = out_dir.join("plot_bands.csv");
        std::fs::write(&p, aggregate_bands(&all)).map_err(|e| Error::io(&p, e))?;
        Some(p)
    } else {
        None
    };
    Ok(PlotDataPaths { long_path, bands_path })
}
