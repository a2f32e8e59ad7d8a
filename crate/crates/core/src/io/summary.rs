//! Time series written once per run: summary, exposure and obstacle tracks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::frames::format_num;
use crate::sim::SimState;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const EXPOSURE_FILE: &str = "exposure.csv";

pub fn obstacle_file_name(id: &str) -> String {
    format!("obstacle_{id}.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstacleSample {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub t: f64,
    pub exposed_percent: f64,
    pub alive_count: usize,
    /// Mean density over the particles still in the domain.
    pub mean_density: f64,
    pub obstacles: Vec<ObstacleSample>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SummarySeries {
    pub obstacle_ids: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

impl SummarySeries {
    pub fn new(obstacle_ids: Vec<String>) -> Self {
        SummarySeries {
            obstacle_ids,
            rows: Vec::new(),
        }
    }

    pub fn record(&mut self, state: &SimState, exposed_percent: f64) {
        self.rows.push(SummaryRow {
            t: state.t,
            exposed_percent,
            alive_count: state.alive_count(),
            mean_density: state.mean_density(),
            obstacles: state
                .obstacles
                .iter()
                .map(|o| ObstacleSample {
                    x: o.center.x,
                    y: o.center.y,
                    vx: o.velocity.x,
                    vy: o.velocity.y,
                })
                .collect(),
        });
    }

    pub fn exposure(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, r.exposed_percent)).collect()
    }

    /// `(t, sample)` track of the obstacle with the given id.
    pub fn obstacle_track(&self, id: &str) -> Option<Vec<(f64, ObstacleSample)>> {
        let k = self.obstacle_ids.iter().position(|o| o == id)?;
        Some(self.rows.iter().map(|r| (r.t, r.obstacles[k])).collect())
    }

    pub fn last(&self) -> Option<&SummaryRow> {
        self.rows.last()
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let data = |e: csv::Error| Error::Data(format!("writing {}: {e}", path.display()));
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(data)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>()).map_err(data)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    w.into_inner()
        .map_err(|e| Error::Data(e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// Writes `summary.csv`, `exposure.csv` and one `obstacle_<id>.csv` per
/// obstacle into `dir`.
pub fn write_summary(dir: &Path, series: &SummarySeries) -> Result<()> {
    let mut header: Vec<String> = ["t", "exposed_percent", "alive_count", "mean_density"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for id in &series.obstacle_ids {
        for c in ["x", "y", "vx", "vy"] {
            header.push(format!("{id}_{c}"));
        }
    }
    write_rows(
        &dir.join(SUMMARY_FILE),
        &header,
        series.rows.iter().map(|r| {
            let mut v = vec![
                format_num(r.t),
                format_num(r.exposed_percent),
                r.alive_count.to_string(),
                format_num(r.mean_density),
            ];
            for o in &r.obstacles {
                v.extend([o.x, o.y, o.vx, o.vy].map(format_num));
            }
            v
        }),
    )?;
    write_rows(
        &dir.join(EXPOSURE_FILE),
        &["t".into(), "exposed_percent".into()],
        series
            .rows
            .iter()
            .map(|r| [format_num(r.t), format_num(r.exposed_percent)]),
    )?;
    for (k, id) in series.obstacle_ids.iter().enumerate() {
        write_rows(
            &dir.join(obstacle_file_name(id)),
            &["t", "x", "y", "vx", "vy"].map(String::from),
            series.rows.iter().map(|r| {
                let o = r.obstacles[k];
                [r.t, o.x, o.y, o.vx, o.vy].map(format_num)
            }),
        )?;
    }
    Ok(())
}

/// Numeric columns of a CSV file with its header.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(file);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("line {}: {e}", n + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// `(t, exposed_percent)` pairs from an exposure or summary file.
pub fn read_exposure(path: &Path) -> Result<Vec<(f64, f64)>> {
    let (header, rows) = read_table(path)?;
    let col = header
        .iter()
        .position(|h| h == "exposed_percent")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "no exposed_percent column".into(),
        })?;
    Ok(rows.iter().map(|r| (r[0], r[col])).collect())
}

/// `(t, x, y, vx, vy)` rows of an obstacle track file.
pub fn read_obstacle_track(path: &Path) -> Result<Vec<[f64; 5]>> {
    let (_, rows) = read_table(path)?;
    rows.iter()
        .map(|r| {
            <[f64; 5]>::try_from(r.as_slice()).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("expected 5 columns, found {}", r.len()),
            })
        })
        .collect()
}
