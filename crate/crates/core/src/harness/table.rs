//! CSV and Markdown renderings of result rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::Method;
use crate::harness::run::ResultRow;

pub const CSV_HEADER: [&str; 11] = [
    "family",
    "params",
    "n",
    "m",
    "method",
    "mise_mean_x100",
    "mise_sd_x100",
    "mix_mean",
    "mix_sd",
    "reps",
    "failures",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::parse(
                s,
                "unknown table format (expected csv|markdown)",
            )),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
        })
    }
}

/// One table line as emitted: MISE columns are ×100 and every number is
/// rounded to six decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub family: String,
    pub params: String,
    pub n: usize,
    pub m: usize,
    pub method: Method,
    pub mise_mean_x100: Option<f64>,
    pub mise_sd_x100: Option<f64>,
    pub mix_mean: Option<f64>,
    pub mix_sd: Option<f64>,
    pub reps: usize,
    pub failures: usize,
}

fn round6(v: f64) -> f64 {
    format_number(v).parse().unwrap_or(v)
}

impl From<&ResultRow> for TableRecord {
    fn from(r: &ResultRow) -> Self {
        TableRecord {
            family: r.family.clone(),
            params: r.params.clone(),
            n: r.n,
            m: r.m,
            method: r.method,
            mise_mean_x100: r.mise_mean.map(|v| round6(100.0 * v)),
            mise_sd_x100: r.mise_sd.map(|v| round6(100.0 * v)),
            mix_mean: r.mix_mean.map(round6),
            mix_sd: r.mix_sd.map(round6),
            reps: r.reps,
            failures: r.failures,
        }
    }
}

/// Fixed six decimals with trailing zeros removed: `0.560000` → `0.56`.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        &s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

impl TableRecord {
    fn fields(&self) -> [String; 11] {
        [
            self.family.clone(),
            self.params.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.method.name().to_string(),
            opt(self.mise_mean_x100),
            opt(self.mise_sd_x100),
            opt(self.mix_mean),
            opt(self.mix_sd),
            self.reps.to_string(),
            self.failures.to_string(),
        ]
    }
}

pub fn render_records(records: &[TableRecord], format: TableFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::domain("no rows to emit"));
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(CSV_HEADER).map_err(io)?;
            for r in records {
                w.write_record(r.fields()).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&format!("| {} |\n", CSV_HEADER.join(" | ")));
            out.push('|');
            for h in CSV_HEADER {
                let align = if matches!(h, "family" | "params" | "method") {
                    "---"
                } else {
                    "--:"
                };
                out.push_str(&format!(" {align} |"));
            }
            out.push('\n');
            for r in records {
                out.push_str(&format!("| {} |\n", r.fields().join(" | ")));
            }
            Ok(out)
        }
    }
}

/// Renders aggregated rows; MISE columns are scaled by 100.
pub fn emit_table(rows: &[ResultRow], format: TableFormat) -> Result<String> {
    let records: Vec<TableRecord> = rows.iter().map(TableRecord::from).collect();
    render_records(&records, format)
}

/// Reads a table written by [`emit_table`] in CSV form.
pub fn parse_table(text: &str) -> Result<Vec<TableRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Input {
            line: 1,
            reason: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<TableRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Input {
            line: i + 2,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::domain("table has no rows"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            family: "burr".into(),
            params: "c=0.5,l=0.5".into(),
            n: 256,
            m: 16,
            method: Method::MlMix,
            mise_mean: Some(0.0056),
            mise_sd: Some(0.00123456789),
            mix_mean: Some(0.939),
            mix_sd: Some(0.019),
            reps: 100,
            failures: 2,
        }
    }

    #[test]
    fn header_is_exact() {
        let text = emit_table(&[row()], TableFormat::Csv).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "family,params,n,m,method,mise_mean_x100,mise_sd_x100,mix_mean,mix_sd,reps,failures"
        );
    }

    #[test]
    fn scaled_mise() {
        let text = emit_table(&[row()], TableFormat::Csv).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "burr,\"c=0.5,l=0.5\",256,16,ml_mix,0.56,0.123457,0.939,0.019,100,2"
        );
    }

    #[test]
    fn csv_roundtrip() {
        let r = row();
        let text = emit_table(std::slice::from_ref(&r), TableFormat::Csv).unwrap();
        let parsed = parse_table(&text).unwrap();
        assert_eq!(parsed, vec![TableRecord::from(&r)]);
    }

    #[test]
    fn missing_values_roundtrip() {
        let mut r = row();
        r.method = Method::Parametric;
        r.mix_mean = None;
        r.mix_sd = None;
        r.mise_mean = None;
        let text = emit_table(std::slice::from_ref(&r), TableFormat::Csv).unwrap();
        assert_eq!(parse_table(&text).unwrap()[0], TableRecord::from(&r));
    }

    #[test]
    fn markdown_mirrors_csv() {
        let md = emit_table(&[row()], TableFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("| family | params | n | m | method |"));
        assert_eq!(
            lines[2],
            "| burr | c=0.5,l=0.5 | 256 | 16 | ml_mix | 0.56 | 0.123457 | 0.939 | 0.019 | 100 | 2 |"
        );
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(matches!(
            emit_table(&[], TableFormat::Csv),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_table("a,b\n1,2\n").is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.56), "0.56");
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(1e-9), "0");
        assert_eq!(format_number(-1e-9), "0");
        assert_eq!(format_number(12.3456789), "12.345679");
    }
}
