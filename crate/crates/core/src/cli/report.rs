//! CSV tables for convergence reports and trajectories.
//!
//! Report columns: `n,h,delta,err_max,err_mean,mc_tries`. Reals are written with
//! 17 significant digits so a parsed table reproduces the rows exactly.

use std::io::{Read, Write};

use crate::error::Result;
use crate::euler::Trajectory;
use crate::experiments::{ConvergenceReport, ReportRow};

pub const REPORT_HEADER: [&str; 6] = ["n", "h", "delta", "err_max", "err_mean", "mc_tries"];

/// Formats a double with 17 significant digits.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_reports<W: Write>(out: W, reports: &[ConvergenceReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for row in reports.iter().flat_map(|r| &r.rows) {
        w.write_record([
            row.n.to_string(),
            full(row.h),
            full(row.delta),
            full(row.err_max),
            full(row.err_mean),
            row.mc_tries.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(crate::error::Error::Usage(format!(
            "unexpected CSV header {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            REPORT_HEADER
        )));
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// `delta,kind,slope,intercept,n_first,n_last,clamped_rows`, one line per report.
pub fn write_slopes<W: Write>(out: W, reports: &[ConvergenceReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "kind", "slope", "intercept", "n_first", "n_last", "clamped_rows"])?;
    for r in reports {
        let first = r.n_range_used.first().copied().unwrap_or(0);
        let last = r.n_range_used.last().copied().unwrap_or(0);
        let clamped: Vec<String> = r.clamped.iter().map(|i| r.rows[*i].n.to_string()).collect();
        w.write_record([
            full(r.noise.delta),
            r.noise.kind.to_string(),
            full(r.slope),
            full(r.intercept),
            first.to_string(),
            last.to_string(),
            clamped.join(" "),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `t,y_0,...,y_{d-1}` for every node.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..traj.dim()).map(|i| format!("y_{i}")));
    w.write_record(&header)?;
    for (k, y) in traj.states().enumerate() {
        let mut rec = vec![full(traj.knot(k))];
        rec.extend(y.iter().map(|v| full(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
