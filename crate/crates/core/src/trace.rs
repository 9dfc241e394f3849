//! CSV tables: optimization traces, figure samples and sharpness
//! breakpoints.
//!
//! Floats are written with 17 significant digits, so a written trace parses
//! back to bit-identical values.

use std::io::{Read, Write};

use crate::driver::IterateRecord;
use crate::error::{Error, Result};
use crate::scaling::Branch;
use crate::sharpness::{FigureRow, SharpnessSequence};

pub const TRACE_HEADER: [&str; 12] = [
    "k", "branch", "norm_g", "phi", "hatphi", "wL", "wQ", "deltaL", "deltaQ", "norm_s", "dq", "f",
];

pub const FIGURE_HEADER: [&str; 4] = ["x", "f", "df", "d2f"];

pub const BREAKPOINT_HEADER: [&str; 8] = ["k", "x", "f", "g", "H", "s", "dq", "phi"];

/// One row of a trace table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub branch: Branch,
    pub norm_g: f64,
    pub phi: f64,
    pub hatphi: f64,
    pub w_l: f64,
    pub w_q: f64,
    pub delta_l: f64,
    pub delta_q: f64,
    pub norm_s: f64,
    pub dq: f64,
    pub f: Option<f64>,
}

impl From<&IterateRecord> for TraceRow {
    fn from(r: &IterateRecord) -> Self {
        TraceRow {
            k: r.k,
            branch: r.branch,
            norm_g: r.g_norm,
            phi: r.phi,
            hatphi: r.hatphi,
            w_l: r.w_l,
            w_q: r.w_q,
            delta_l: r.delta_l,
            delta_q: r.delta_q,
            norm_s: r.step_norm,
            dq: r.model_decrease,
            f: r.f,
        }
    }
}

/// A float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        let mut rec = vec![r.k.to_string(), r.branch.as_str().to_string()];
        for v in [
            r.norm_g, r.phi, r.hatphi, r.w_l, r.w_q, r.delta_l, r.delta_q, r.norm_s, r.dq,
        ] {
            rec.push(fmt_float(v));
        }
        rec.push(r.f.map(fmt_float).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the trace of a run; rows follow the record order.
pub fn write_records<W: Write>(out: W, records: &[IterateRecord]) -> Result<()> {
    let rows: Vec<TraceRow> = records.iter().map(TraceRow::from).collect();
    write_trace(out, &rows)
}

fn parse_float(field: &str, line: usize, column: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::MalformedCsv(format!("line {line}: bad {column} value `{field}`")))
}

/// Parses a trace table, checking the header, the column count and that
/// `k` counts up from zero.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::MalformedCsv(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != TRACE_HEADER.len() {
            return Err(Error::MalformedCsv(format!("line {line}: {} columns", rec.len())));
        }
        let k: usize = rec[0]
            .parse()
            .map_err(|_| Error::MalformedCsv(format!("line {line}: bad k `{}`", &rec[0])))?;
        if k != i {
            return Err(Error::MalformedCsv(format!("line {line}: expected k = {i}, found {k}")));
        }
        let branch = match &rec[1] {
            "L" => Branch::Linear,
            "Q" => Branch::Quadratic,
            other => return Err(Error::MalformedCsv(format!("line {line}: bad branch `{other}`"))),
        };
        let mut v = [0.0; 9];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = parse_float(&rec[j + 2], line, TRACE_HEADER[j + 2])?;
        }
        let f = match &rec[11] {
            "" => None,
            s => Some(parse_float(s, line, "f")?),
        };
        rows.push(TraceRow {
            k,
            branch,
            norm_g: v[0],
            phi: v[1],
            hatphi: v[2],
            w_l: v[3],
            w_q: v[4],
            delta_l: v[5],
            delta_q: v[6],
            norm_s: v[7],
            dq: v[8],
            f,
        });
    }
    Ok(rows)
}

pub fn write_figure<W: Write>(out: W, rows: &[FigureRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(FIGURE_HEADER)?;
    for r in rows {
        w.write_record([r.x, r.f, r.df, r.d2f].map(fmt_float))?;
    }
    w.flush()?;
    Ok(())
}

/// The breakpoint data `(k, x_k, f_k, g_k, H_k, s_k, Δq_k, φ_k)` of a
/// sequence, `f` shifted like the figure table.
pub fn write_breakpoints<W: Write>(out: W, seq: &SharpnessSequence, f0_shift: Option<f64>) -> Result<()> {
    let offset = f0_shift.map_or(0.0, |c| c - seq.f0());
    let mut w = writer(out);
    w.write_record(BREAKPOINT_HEADER)?;
    for k in 0..seq.phi.len() {
        let mut rec = vec![k.to_string()];
        for v in [seq.x[k], seq.f[k] + offset, seq.g[k], seq.h[k], seq.s[k], seq.dq[k], seq.phi[k]] {
            rec.push(fmt_float(v));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
