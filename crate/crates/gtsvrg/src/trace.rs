//! Run traces: one row per recorded step plus a summary, and the CSV
//! encodings shared by all methods.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Which update rule produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    GtSvrg,
    Gt,
    Dsgd,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::GtSvrg => "gtsvrg",
            Method::Gt => "gt",
            Method::Dsgd => "dsgd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gtsvrg" => Ok(Method::GtSvrg),
            "gt" => Ok(Method::Gt),
            "dsgd" => Ok(Method::Dsgd),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// One recorded step. Residuals are squared Frobenius quantities; the
/// optimality gap carries the node-count scaling used by the rate algebra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub k: usize,
    pub consensus_sq: f64,
    pub opt_gap_sq_scaled: f64,
    pub tracking_sq: f64,
    pub mean_dist_to_opt: f64,
    pub grad_evals: u64,
}

impl TraceRow {
    pub fn residual(&self) -> [f64; 3] {
        [self.consensus_sq, self.opt_gap_sq_scaled, self.tracking_sq]
    }

    pub fn max_residual(&self) -> f64 {
        self.consensus_sq
            .max(self.opt_gap_sq_scaled)
            .max(self.tracking_sq)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceMeta {
    pub method: Method,
    pub alpha: f64,
    pub inner_len: usize,
    pub outer_len: usize,
    pub seed: u64,
    pub record_every: usize,
    /// Weights of the scaled max-norm used for outer contraction ratios.
    pub scaled_norm_weights: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub final_consensus_sq: f64,
    pub final_opt_gap_sq_scaled: f64,
    pub final_tracking_sq: f64,
    pub final_mean_dist_to_opt: f64,
    pub grad_evals: u64,
    pub outer_loops_run: usize,
    /// Scaled-norm ratio of consecutive outer-loop boundaries.
    pub outer_ratios: Vec<f64>,
    /// Geometric mean of the ratios after the first outer loop.
    pub geometric_mean_ratio: Option<f64>,
    pub target_mean_dist: Option<f64>,
    pub target_reached: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
    pub summary: RunSummary,
}

/// 17 significant digits: enough to reproduce every f64 bit for bit.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

pub const CSV_HEADER: &str =
    "t,k,consensus_sq,opt_gap_sq_scaled,tracking_sq,mean_dist_to_opt,grad_evals";

fn write_row<W: Write>(w: &mut W, row: &TraceRow) -> io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        row.t,
        row.k,
        format_sig17(row.consensus_sq),
        format_sig17(row.opt_gap_sq_scaled),
        format_sig17(row.tracking_sq),
        format_sig17(row.mean_dist_to_opt),
        row.grad_evals
    )
}

impl Trace {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            write_row(w, row)?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Rows at outer-loop boundaries: the init row plus every row with
    /// k equal to the inner-loop length.
    pub fn boundary_rows(&self) -> Vec<&TraceRow> {
        self.rows
            .iter()
            .filter(|r| (r.t == 0 && r.k == 0) || r.k == self.meta.inner_len)
            .collect()
    }

    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace always has the init row")
    }
}

/// Merged comparison CSV: same schema with a leading `method` column.
pub fn comparison_csv(traces: &[(Method, &Trace)]) -> String {
    let mut out = format!("method,{CSV_HEADER}\n");
    for (method, trace) in traces {
        for row in &trace.rows {
            let mut buf = Vec::new();
            write_row(&mut buf, row).expect("write to Vec");
            out.push_str(method.name());
            out.push(',');
            out.push_str(&String::from_utf8(buf).expect("ascii csv"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig17_round_trips_f64() {
        for v in [
            0.1,
            1.0 / 3.0,
            2.8434685746501163e-6,
            f64::MIN_POSITIVE,
            123456789.123456789,
        ] {
            let s = format_sig17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("gtsvrg".parse::<Method>().unwrap(), Method::GtSvrg);
        assert!("sgd".parse::<Method>().is_err());
    }
}
