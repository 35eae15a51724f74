//! CSV and JSON emission.
//!
//! Every real number is written with 17 significant digits in scientific
//! notation, which round-trips `f64` exactly and makes reruns byte-identical.
//! Missing values are empty fields. Column layouts are versioned by
//! [`SCHEMA_VERSION`]; new columns are only ever appended.

use std::io::{self, BufRead, Write};

use serde::Serialize;

use crate::digraph::DirectedGraph;
use crate::error::{Error, Result};
use crate::montecarlo::{ExperimentSummary, TrialTrace};
use crate::randgen::{FamilyKind, ProbabilitySequence};

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: &str = "trial,t,i,x,y,z,err,min_y,lambda_prod,f";
pub const TIMELINE_HEADER: &str = "trial,q,k_q,l_q,lambda_q";
pub const GRAPH_HEADER: &str = "t,from,to";

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn io_err(e: io::Error) -> Error {
    Error::Config(format!("write failed: {e}"))
}

pub fn write_trace<W: Write>(mut w: W, traces: &[TrialTrace]) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}").map_err(io_err)?;
    for trace in traces {
        for r in &trace.records {
            for i in 0..r.x.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    trace.trial,
                    r.t,
                    i,
                    num(r.x[i]),
                    num(r.y[i]),
                    num(r.z[i]),
                    num(r.node_errors[i]),
                    num(r.min_y),
                    num(r.lambda),
                    opt(r.f)
                )
                .map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// One row per closed mixing window; `k_q` is the renewal that closes it.
pub fn write_timeline<W: Write>(mut w: W, traces: &[TrialTrace]) -> Result<()> {
    writeln!(w, "{TIMELINE_HEADER}").map_err(io_err)?;
    for trace in traces {
        for win in &trace.timeline.windows {
            writeln!(w, "{},{},{},{},{}", trace.trial, win.q, win.end, win.length, num(win.lambda)).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn summary_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("mean_ln_err_i{i}")));
    cols.extend(
        [
            "mean_ln_err_max",
            "rate_bound",
            "margin",
            "violations",
            "se_ln_err_max",
            "mean_lambda",
            "se_lambda",
            "lambda_bound",
            "mean_ln_inv_y_max",
            "rate_ok",
        ]
        .map(String::from),
    );
    cols.join(",")
}

pub fn write_summary<W: Write>(mut w: W, s: &ExperimentSummary) -> Result<()> {
    writeln!(w, "{}", summary_header(s.n)).map_err(io_err)?;
    for r in &s.rows {
        let mut cols = vec![r.t.to_string()];
        cols.extend(r.mean_ln_err.iter().map(|&v| num(v)));
        cols.push(num(r.mean_ln_err_max));
        cols.push(opt(r.rate_bound));
        cols.push(opt(r.margin));
        cols.push(r.violations.to_string());
        cols.push(num(r.se_ln_err_max));
        cols.push(num(r.mean_lambda));
        cols.push(num(r.se_lambda));
        cols.push(opt(r.lambda_bound));
        cols.push(num(r.mean_ln_inv_y_max));
        cols.push(r.rate_ok.map(|b| b.to_string()).unwrap_or_default());
        writeln!(w, "{}", cols.join(",")).map_err(io_err)?;
    }
    Ok(())
}

/// Long format: `t,series,node,value`, with an empty node for network-wide series.
pub fn write_plot_data<W: Write>(mut w: W, s: &ExperimentSummary) -> Result<()> {
    writeln!(w, "t,series,node,value").map_err(io_err)?;
    for r in &s.rows {
        let mut row = |series: &str, node: Option<usize>, v: f64| {
            let node = node.map(|i| i.to_string()).unwrap_or_default();
            writeln!(w, "{},{series},{node},{}", r.t, num(v)).map_err(io_err)
        };
        for (i, &v) in r.mean_ln_err.iter().enumerate() {
            row("mean_ln_err", Some(i), v)?;
        }
        row("mean_ln_err_max", None, r.mean_ln_err_max)?;
        for (i, &v) in r.mean_ln_inv_y.iter().enumerate() {
            row("mean_ln_inv_y", Some(i), v)?;
        }
        row("mean_lambda", None, r.mean_lambda)?;
        if let Some(b) = r.rate_bound {
            row("rate_bound", None, b)?;
        }
        if let Some(b) = r.lambda_bound {
            row("lambda_bound", None, b)?;
        }
    }
    Ok(())
}

/// Sampled communication graphs of one trial, one edge per row, self-loops omitted.
pub fn write_graphs<W: Write>(mut w: W, graphs: &[DirectedGraph]) -> Result<()> {
    writeln!(w, "{GRAPH_HEADER}").map_err(io_err)?;
    for (t, g) in graphs.iter().enumerate() {
        for (from, to) in g.edges().filter(|(a, b)| a != b) {
            writeln!(w, "{t},{from},{to}").map_err(io_err)?;
        }
    }
    Ok(())
}

/// Inverse of [`write_graphs`]; `rounds` graphs are returned even if the
/// last ones carry no edges.
pub fn read_graphs<R: BufRead>(r: R, n: usize, rounds: usize) -> Result<Vec<DirectedGraph>> {
    let mut graphs = vec![DirectedGraph::self_loops(n)?; rounds];
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Config(format!("read failed: {e}")))?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != GRAPH_HEADER {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected header `{GRAPH_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<usize> = line
            .split(',')
            .map(|f| f.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        let [t, from, to] = fields[..] else {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected three fields".into(),
            });
        };
        let g = graphs.get_mut(t).ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("round {t} beyond horizon {rounds}"),
        })?;
        g.add_edge(from, to).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
    }
    Ok(graphs)
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyEcho {
    pub kind: FamilyKind,
    #[serde(rename = "B")]
    pub block: usize,
    pub epsilon: f64,
    pub dwell: usize,
    pub phases: Vec<Vec<Vec<f64>>>,
}

impl From<&ProbabilitySequence> for FamilyEcho {
    fn from(ps: &ProbabilitySequence) -> Self {
        Self {
            kind: ps.kind(),
            block: ps.block(),
            epsilon: ps.epsilon(),
            dwell: ps.dwell(),
            phases: ps.phases().iter().map(|p| p.rows()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryDocument<'a> {
    pub schema_version: u32,
    pub family: FamilyEcho,
    pub summary: &'a ExperimentSummary,
}

pub fn write_summary_json<W: Write>(w: W, family: &ProbabilitySequence, s: &ExperimentSummary) -> Result<()> {
    let doc = SummaryDocument {
        schema_version: SCHEMA_VERSION,
        family: family.into(),
        summary: s,
    };
    serde_json::to_writer_pretty(w, &doc).map_err(|e| Error::Config(format!("json: {e}")))
}
