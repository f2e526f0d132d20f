//! CSV and JSON artifacts. Every file opens with `#` comment lines carrying
//! the tool version and the config hash. Numbers use Rust's shortest
//! round-trip formatting, so parsing a cell recovers the exact f64.

use std::io::{self, Write};

use crate::fluid::{fluid_state, FluidParams};
use crate::harness::ConvergenceReport;
use crate::measure::{AtomicMeasure, Measure, TestFunction};
use crate::sim::{SimState, Trace};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub tool_version: String,
    pub config_hash: String,
}

impl Header {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Header {
            tool_version: crate::harness::TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
        }
    }

    fn write(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "# {}", self.tool_version)?;
        writeln!(w, "# config_hash {}", self.config_hash)
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn table<W: Write>(mut w: W, header: &Header, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), ExportError> {
    header.write(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(columns)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `jobs.csv`. Departure and sojourn are blank for jobs still in the system
/// at the horizon; wait is blank for jobs still behind the gate.
pub fn write_jobs<W: Write>(w: W, header: &Header, trace: &Trace) -> Result<(), ExportError> {
    let rows = trace.jobs.iter().map(|j| {
        let departed = !trace.is_in_flight(j);
        let start = j.batch.map(|k| trace.batches[k].start);
        vec![
            j.id.to_string(),
            num(j.arrival),
            num(j.service),
            j.batch.map(|k| k.to_string()).unwrap_or_default(),
            opt(j.departure.filter(|_| departed)),
            opt(j.sojourn().filter(|_| departed)),
            opt(start.map(|s| s - j.arrival)),
        ]
    });
    table(w, header, &["id", "arrival", "service", "batch", "departure", "sojourn", "wait"], rows)
}

/// `batches.csv`; next_beta is blank when the next gate opening is not
/// determined by the horizon.
pub fn write_batches<W: Write>(w: W, header: &Header, trace: &Trace) -> Result<(), ExportError> {
    let rows = trace.batches.iter().map(|b| {
        vec![
            b.index.to_string(),
            num(b.start),
            num(b.work),
            num(b.completion),
            opt(b.next_start),
            b.size().to_string(),
        ]
    });
    table(w, header, &["k", "beta", "work", "completion", "next_beta", "size"], rows)
}

pub fn write_snapshots<W: Write>(w: W, header: &Header, states: &[SimState]) -> Result<(), ExportError> {
    let rows = states.iter().map(|s| {
        vec![
            num(s.t),
            num(s.workload),
            num(s.queue_length),
            num(s.sigma.total_mass()),
            num(s.sigma.first_moment()),
            num(s.mu.total_mass()),
            num(s.mu.first_moment()),
            s.batch_index.to_string(),
            num(s.shift),
        ]
    });
    table(
        w,
        header,
        &["t", "W", "Z", "sigma_mass", "sigma_work", "mu_mass", "mu_work", "batch_index", "shift"],
        rows,
    )
}

/// `fluid.csv` with one `sigma_<tag>` column per extra test function.
pub fn write_fluid<W: Write>(
    w: W,
    header: &Header,
    params: &FluidParams,
    grid: &[f64],
    functionals: &[TestFunction],
) -> Result<(), ExportError> {
    let mut columns: Vec<String> = ["t", "sigma_mass", "sigma_work", "mu_mass", "mu_work", "queue_length", "residue", "w"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    columns.extend(functionals.iter().map(|f| format!("sigma_{}", f.tag())));
    let rows = grid.iter().map(|&t| {
        let s = fluid_state(params, t);
        let mut row = vec![
            num(t),
            num(s.sigma.total_mass()),
            num(s.sigma.first_moment()),
            num(s.mu.total_mass()),
            num(s.mu.first_moment()),
            num(s.sigma.total_mass() + s.mu.total_mass()),
            num(s.residue),
            num(params.w()),
        ];
        row.extend(functionals.iter().map(|f| num(s.sigma.integrate(f))));
        row
    });
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    table(w, header, &columns, rows)
}

/// (location, weight) rows in ascending location order.
pub fn write_atomic<W: Write>(w: W, header: &Header, m: &AtomicMeasure) -> Result<(), ExportError> {
    table(w, header, &["location", "weight"], m.atoms().map(|(x, a)| vec![num(x), num(a)]))
}

pub fn write_convergence<W: Write>(w: W, header: &Header, report: &ConvergenceReport) -> Result<(), ExportError> {
    let rows = report.table.iter().map(|row| {
        vec![
            num(row.r),
            num(row.t),
            row.path.to_string(),
            row.f.clone(),
            num(row.mean_abs_err),
            num(row.max_abs_err),
        ]
    });
    table(w, header, &["r", "t", "path", "f_tag", "mean_abs_err", "max_abs_err"], rows)
}

/// `report.json`. JSON has no comments, so the header travels in the
/// report's own `tool_version` and `config_hash` fields.
pub fn write_report<W: Write>(mut w: W, report: &ConvergenceReport) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Arrival;

    fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<(), ExportError>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn dd1() -> Trace {
        let arrivals = [1.0, 2.0].iter().map(|&time| Arrival { time, service: 1.0 }).collect();
        Trace::from_primitives(&[1.0], arrivals, 2.5).unwrap()
    }

    #[test]
    fn batches_csv_matches_hand_trace() {
        let h = Header::new("abc");
        let out = text(|b| write_batches(b, &h, &dd1()));
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("# gps "));
        assert_eq!(lines[1], "# config_hash abc");
        assert_eq!(lines[2], "k,beta,work,completion,next_beta,size");
        assert_eq!(&lines[3..], ["0,0,1,1,1,1", "1,1,1,2,2,1", "2,2,1,3,,1"]);
    }

    #[test]
    fn jobs_csv_blanks_in_flight() {
        let out = text(|b| write_jobs(b, &Header::new("h"), &dd1()));
        let lines: Vec<&str> = out.lines().skip(2).collect();
        assert_eq!(lines[0], "id,arrival,service,batch,departure,sojourn,wait");
        assert_eq!(lines[1], "0,0,1,0,1,1,0");
        assert_eq!(lines[3], "2,2,1,2,,,0");
    }

    #[test]
    fn empty_jobs_csv_is_header_only() {
        let tr = Trace::from_primitives(&[], Vec::new(), 1.0).unwrap();
        let out = text(|b| write_jobs(b, &Header::new("h"), &tr));
        assert_eq!(out.lines().count(), 3);
    }

    #[test]
    fn numbers_round_trip() {
        let x = 0.1 + 0.2;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
        let m = AtomicMeasure::new([(std::f64::consts::PI, 1.0 / 3.0)]).unwrap();
        let out = text(|b| write_atomic(b, &Header::new("h"), &m));
        let row = out.lines().nth(3).unwrap();
        let (a, b) = row.split_once(',').unwrap();
        assert_eq!(a.parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(b.parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
