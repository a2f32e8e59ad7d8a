//! Pointwise comparison of the exposure series of two runs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::run::{read_metadata, RunMetadata};
use crate::io::summary::{read_exposure, EXPOSURE_FILE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    /// `a / b`; one when both vanish, infinite when only `b` does.
    pub ratio: f64,
}

/// Which run is at least as exposed at every output time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Equal,
    A,
    B,
    Mixed,
}

impl Dominance {
    pub fn as_str(self) -> &'static str {
        match self {
            Dominance::Equal => "equal",
            Dominance::A => "a",
            Dominance::B => "b",
            Dominance::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub dominance: Dominance,
}

pub fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// Pointwise table of two series on the same time grid.
pub fn compare_series(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Comparison> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "time grids differ: {} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    let mut rows = Vec::with_capacity(a.len());
    let (mut a_above, mut b_above) = (false, false);
    for (&(ta, va), &(tb, vb)) in a.iter().zip(b) {
        if ta != tb {
            return Err(Error::Data(format!("time grids differ: t = {ta} vs t = {tb}")));
        }
        a_above |= va > vb;
        b_above |= vb > va;
        rows.push(ComparisonRow {
            t: ta,
            a: va,
            b: vb,
            ratio: ratio(va, vb),
        });
    }
    let dominance = match (a_above, b_above) {
        (false, false) => Dominance::Equal,
        (true, false) => Dominance::A,
        (false, true) => Dominance::B,
        (true, true) => Dominance::Mixed,
    };
    Ok(Comparison { rows, dominance })
}

fn same_grid(a: &RunMetadata, b: &RunMetadata) -> Result<()> {
    let (pa, pb) = (&a.params, &b.params);
    if pa.dt != pb.dt || pa.t_end != pb.t_end || a.run.summary_interval != b.run.summary_interval {
        return Err(Error::Data(format!(
            "runs do not share dt, t_end and summary interval: ({}, {}, {}) vs ({}, {}, {})",
            pa.dt, pa.t_end, a.run.summary_interval, pb.dt, pb.t_end, b.run.summary_interval
        )));
    }
    Ok(())
}

/// Compare the exposure series of two run directories.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<Comparison> {
    same_grid(&read_metadata(dir_a)?, &read_metadata(dir_b)?)?;
    compare_series(
        &read_exposure(&dir_a.join(EXPOSURE_FILE))?,
        &read_exposure(&dir_b.join(EXPOSURE_FILE))?,
    )
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mut s = String::from("t,exposed_a,exposed_b,ratio\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.3},{:.6},{:.6},{:.6}", r.t, r.a, r.b, r.ratio);
        }
        let _ = writeln!(s, "# dominant: {}", self.dominance.as_str());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_have_unit_ratio() {
        let a = vec![(0.0, 0.0), (0.1, 2.0), (0.2, 5.0)];
        let c = compare_series(&a, &a).unwrap();
        assert!(c.rows.iter().all(|r| r.ratio == 1.0));
        assert_eq!(c.dominance, Dominance::Equal);
    }

    #[test]
    fn dominance_flags() {
        let a = vec![(0.0, 0.0), (0.1, 1.0)];
        let b = vec![(0.0, 0.0), (0.1, 3.0)];
        let c = compare_series(&a, &b).unwrap();
        assert_eq!(c.dominance, Dominance::B);
        assert!((c.rows[1].ratio - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(compare_series(&b, &a).unwrap().dominance, Dominance::A);
        let m = vec![(0.0, 1.0), (0.1, 0.0)];
        assert_eq!(compare_series(&a, &m).unwrap().dominance, Dominance::Mixed);
    }

    #[test]
    fn mismatched_grids_are_errors() {
        let a = vec![(0.0, 0.0), (0.1, 1.0)];
        assert!(compare_series(&a, &a[..1]).is_err());
        let b = vec![(0.0, 0.0), (0.2, 1.0)];
        assert!(compare_series(&a, &b).is_err());
    }
}
