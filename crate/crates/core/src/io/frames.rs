//! Per-particle frame files and eikonal field dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::contagion::{classify, Fractions, Label};
use crate::eikonal::NavigationSnapshot;
use crate::error::{Error, Result};
use crate::pedestrians::ParticleState;

pub const FRAME_HEADER: [&str; 13] = [
    "t", "id", "pop", "alive", "x", "y", "ux", "uy", "rho", "alpha_S", "alpha_E", "alpha_I", "label",
];

pub const EIKONAL_HEADER: [&str; 9] = ["t", "node", "ghost", "goal", "x", "y", "phi", "descent_x", "descent_y"];

/// Twelve significant digits in scientific notation.
pub fn format_num(x: f64) -> String {
    format!("{x:.11e}")
}

/// The value `format_num` writes, read back.
pub fn quantize(x: f64) -> f64 {
    format_num(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub id: usize,
    pub pop: usize,
    pub alive: bool,
    pub x: f64,
    pub y: f64,
    pub ux: f64,
    pub uy: f64,
    pub rho: f64,
    pub alpha: Fractions,
    pub label: Label,
}

/// One snapshot of every seeded particle, exited ones flagged dead.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub rows: Vec<FrameRow>,
}

impl Frame {
    /// Numeric fields are quantized to the written precision so that
    /// writing and re-reading reproduces the frame exactly.
    pub fn from_particles(t: f64, particles: &[ParticleState], threshold: f64) -> Self {
        let rows = particles
            .iter()
            .enumerate()
            .map(|(id, p)| FrameRow {
                id,
                pop: p.pop,
                alive: p.alive,
                x: quantize(p.x.x),
                y: quantize(p.x.y),
                ux: quantize(p.u.x),
                uy: quantize(p.u.y),
                rho: quantize(p.rho),
                alpha: Fractions::new(quantize(p.alpha.s), quantize(p.alpha.e), quantize(p.alpha.i)),
                label: classify(p.alpha, threshold),
            })
            .collect();
        Frame { t: quantize(t), rows }
    }
}

pub fn frame_file_name(index: u64) -> String {
    format!("frame_{index:06}.csv")
}

pub fn eikonal_file_name(index: u64) -> String {
    format!("eikonal_{index:06}.csv")
}

pub fn write_frame_to<W: Write>(out: W, frame: &Frame) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let data = |e: csv::Error| Error::Data(format!("writing frame: {e}"));
    w.write_record(FRAME_HEADER).map_err(data)?;
    let t = format_num(frame.t);
    for r in &frame.rows {
        w.write_record([
            t.as_str(),
            &r.id.to_string(),
            &r.pop.to_string(),
            if r.alive { "1" } else { "0" },
            &format_num(r.x),
            &format_num(r.y),
            &format_num(r.ux),
            &format_num(r.uy),
            &format_num(r.rho),
            &format_num(r.alpha.s),
            &format_num(r.alpha.e),
            &format_num(r.alpha.i),
            r.label.as_str(),
        ])
        .map_err(data)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing frame: {e}")))
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_frame_to(BufWriter::new(file), frame)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: u64) -> Result<T> {
    let raw = rec.get(k).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Data(format!("line {line}: bad {} value '{raw}'", FRAME_HEADER[k])))
}

pub fn parse_frame(text: &str) -> Result<Frame> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Data(format!("frame header: {e}")))?;
    if header.iter().ne(FRAME_HEADER) {
        return Err(Error::Data(format!("unexpected frame header: {header:?}")));
    }
    let mut t = None;
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let line = n as u64 + 2;
        let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        let rt: f64 = field(&rec, 0, line)?;
        match t {
            None => t = Some(rt),
            Some(t0) if t0.to_bits() != rt.to_bits() => {
                return Err(Error::Data(format!("line {line}: time {rt} differs from {t0}")));
            }
            _ => {}
        }
        let alive = match rec.get(3) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(Error::Data(format!("line {line}: bad alive flag {other:?}"))),
        };
        let label = rec
            .get(12)
            .and_then(Label::parse)
            .ok_or_else(|| Error::Data(format!("line {line}: bad label")))?;
        rows.push(FrameRow {
            id: field(&rec, 1, line)?,
            pop: field(&rec, 2, line)?,
            alive,
            x: field(&rec, 4, line)?,
            y: field(&rec, 5, line)?,
            ux: field(&rec, 6, line)?,
            uy: field(&rec, 7, line)?,
            rho: field(&rec, 8, line)?,
            alpha: Fractions::new(field(&rec, 9, line)?, field(&rec, 10, line)?, field(&rec, 11, line)?),
            label,
        });
    }
    let t = t.ok_or_else(|| Error::Data("frame has no rows".into()))?;
    Ok(Frame { t, rows })
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_frame(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Φ and descent of every goal on the solve cloud, one row per node and goal.
pub fn write_eikonal_dump(path: &Path, t: f64, nav: &NavigationSnapshot) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let data = |e: csv::Error| Error::Data(format!("writing eikonal dump: {e}"));
    w.write_record(EIKONAL_HEADER).map_err(data)?;
    let t = format_num(t);
    for field in &nav.fields {
        for (k, p) in nav.cloud.points.iter().enumerate() {
            w.write_record([
                t.as_str(),
                &k.to_string(),
                if nav.cloud.ghost[k] { "1" } else { "0" },
                field.goal_id.as_str(),
                &format_num(p.x),
                &format_num(p.y),
                &format_num(field.phi[k]),
                &format_num(field.descent[k].x),
                &format_num(field.descent[k].y),
            ])
            .map_err(data)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(id: usize, v: [f64; 8]) -> FrameRow {
        FrameRow {
            id,
            pop: id % 2,
            alive: id % 3 != 0,
            x: quantize(v[0]),
            y: quantize(v[1]),
            ux: quantize(v[2]),
            uy: quantize(v[3]),
            rho: quantize(v[4]),
            alpha: Fractions::new(quantize(v[5]), quantize(v[6]), quantize(v[7])),
            label: Label::Exposed,
        }
    }

    fn write_string(f: &Frame) -> String {
        let mut buf = Vec::new();
        write_frame_to(&mut buf, f).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn header_names_all_columns() {
        let f = Frame {
            t: 0.5,
            rows: vec![row(0, [1.0; 8])],
        };
        let text = write_string(&f);
        assert_eq!(
            text.lines().next().unwrap(),
            "t,id,pop,alive,x,y,ux,uy,rho,alpha_S,alpha_E,alpha_I,label"
        );
    }

    #[test]
    fn bad_label_is_rejected() {
        let f = Frame {
            t: 0.5,
            rows: vec![row(0, [1.0; 8])],
        };
        let text = write_string(&f).replace("exposed", "zombie");
        assert!(parse_frame(&text).is_err());
    }

    proptest! {
        #[test]
        fn frames_round_trip_exactly(
            t in 0.0f64..100.0,
            vals in prop::collection::vec(prop::array::uniform8(-1e6f64..1e6), 1..20),
        ) {
            let f = Frame {
                t: quantize(t),
                rows: vals.iter().enumerate().map(|(i, v)| row(i, *v)).collect(),
            };
            let back = parse_frame(&write_string(&f)).unwrap();
            prop_assert_eq!(back.t.to_bits(), f.t.to_bits());
            for (a, b) in back.rows.iter().zip(&f.rows) {
                prop_assert_eq!(a, b);
                prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
                prop_assert_eq!(a.alpha.i.to_bits(), b.alpha.i.to_bits());
            }
        }

        #[test]
        fn quantize_is_idempotent(x in prop::num::f64::NORMAL) {
            let q = quantize(x);
            prop_assert_eq!(quantize(q).to_bits(), q.to_bits());
        }
    }
}
