//! Schema-versioned CSV files. Every file starts with a `# schema: <name> v<N>`
//! line followed by the column header; readers reject any other schema line or
//! header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{AacError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
}

impl Schema {
    pub fn tag(&self) -> String {
        format!("# schema: {} v{}", self.name, self.version)
    }
}

pub const TRAIN_LOG: Schema = Schema {
    name: "train-log",
    version: 1,
    columns: &[
        "epoch",
        "mean_return",
        "median_final_goal_error",
        "success_rate",
        "alpha",
        "critic_loss",
        "policy_loss",
        "alpha_loss",
        "updates",
    ],
};

pub const EVAL_METRICS: Schema = Schema {
    name: "eval-metrics",
    version: 1,
    columns: &[
        "episodes",
        "success_rate",
        "median_final_goal_error",
        "median_tail_goal_error",
        "mean_return",
        "empty",
    ],
};

pub const MATRIX: Schema = Schema {
    name: "matrix",
    version: 1,
    columns: &[
        "row",
        "algorithm",
        "strategy",
        "seed",
        "status",
        "success_rate",
        "median_final_goal_error",
        "median_tail_goal_error",
        "mean_return",
    ],
};

pub const STABILITY_GRID: Schema = Schema {
    name: "stability-grid",
    version: 1,
    columns: &[
        "kp_eff",
        "kd_eff",
        "ki",
        "classification",
        "routh_c1",
        "routh_c2",
        "max_root_real_part",
        "roots_agree",
    ],
};

pub const TRACE: Schema = Schema {
    name: "error-trace",
    version: 1,
    columns: &["t", "integral", "error", "rate"],
};

pub const CONTRACTION: Schema = Schema {
    name: "contraction",
    version: 1,
    columns: &["iteration", "error_norm"],
};

pub const CONTRACTION_SUMMARY: Schema = Schema {
    name: "contraction-summary",
    version: 1,
    columns: &["spectral_radius", "spectral_norm", "iterations", "strictly_decreasing"],
};

fn schema_error(msg: impl Into<String>) -> AacError {
    AacError::Schema(msg.into())
}

pub fn write_rows<W: Write>(w: W, schema: &Schema, rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", schema.tag())?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(schema.columns).map_err(|e| schema_error(e.to_string()))?;
    for row in rows {
        if row.len() != schema.columns.len() {
            return Err(schema_error(format!(
                "{} row has {} fields, expected {}",
                schema.name,
                row.len(),
                schema.columns.len()
            )));
        }
        csv.write_record(row).map_err(|e| schema_error(e.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_file(path: &Path, schema: &Schema, rows: &[Vec<String>]) -> Result<()> {
    write_rows(File::create(path)?, schema, rows)
}

/// Parse rows, checking the schema line and column header exactly.
pub fn read_rows<R: Read>(r: R, schema: &Schema) -> Result<Vec<Vec<String>>> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let first = first.trim_end();
    if first != schema.tag() {
        return Err(schema_error(format!("expected `{}`, found `{first}`", schema.tag())));
    }
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers().map_err(|e| schema_error(e.to_string()))?;
    if header.iter().ne(schema.columns.iter().copied()) {
        return Err(schema_error(format!(
            "{} header mismatch: {:?}",
            schema.name,
            header.iter().collect::<Vec<_>>()
        )));
    }
    csv.records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| schema_error(e.to_string()))
        })
        .collect()
}

pub fn read_file(path: &Path, schema: &Schema) -> Result<Vec<Vec<String>>> {
    read_rows(File::open(path)?, schema)
}

/// Shortest round-trip decimal form, so reruns produce identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![vec!["0".into(), "1.5".into(), "NaN".into(), "-2".into()]];
        let mut buf = Vec::new();
        write_rows(&mut buf, &TRACE, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema: error-trace v1\nt,integral,error,rate\n"));
        assert_eq!(read_rows(buf.as_slice(), &TRACE).unwrap(), rows);
    }

    #[test]
    fn schema_drift_rejected() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &TRACE, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bumped = text.replace("v1", "v2");
        assert!(read_rows(bumped.as_bytes(), &TRACE).is_err());
        let renamed = text.replace("rate", "velocity");
        assert!(read_rows(renamed.as_bytes(), &TRACE).is_err());
        assert!(read_rows(text.as_bytes(), &CONTRACTION).is_err());
        assert!(read_rows(text.as_bytes(), &TRACE).unwrap().is_empty());
    }

    #[test]
    fn row_width_checked() {
        let mut buf = Vec::new();
        assert!(write_rows(&mut buf, &TRACE, &[vec!["1".into()]]).is_err());
    }

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e21] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
