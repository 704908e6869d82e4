//! Rectangular output tables with a `#`-prefixed metadata block.
//!
//! Numbers are written with Rust's shortest round-trip formatting so a CSV
//! re-parses to bit-identical values.

use std::io::{BufRead, Write};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Full-precision rendering used in CSV.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    /// Rendering for aligned tables, trimmed to 10 decimals.
    pub fn render_short(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => {
                let s = format!("{v:.10}");
                let s = s.trim_end_matches('0').trim_end_matches('.');
                if s == "-0" { "0".into() } else { s.into() }
            }
            other => other.render(),
        }
    }

    fn parse(s: &str) -> Cell {
        if s.is_empty() {
            return Cell::Empty;
        }
        match s.parse::<f64>() {
            Ok(v) => Cell::Num(v),
            Err(_) => Cell::Text(s.to_string()),
        }
    }
}

/// Shortest round-trip decimal; infinities as `+inf` / `-inf`.
pub fn format_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSeries {
    /// Metadata lines, without the leading `# `.
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl SweepSeries {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        SweepSeries {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "ragged row");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    fn write_metadata<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for line in &self.metadata {
            if line.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "# {line}")?;
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        self.write_metadata(&mut w)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Space-aligned table for terminal output.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        self.write_metadata(&mut w)?;
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::render_short).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|i| {
                cells
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain([self.header[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |w: &mut W, items: &[String]| -> std::io::Result<()> {
            let padded: Vec<String> = items
                .iter()
                .zip(&widths)
                .map(|(s, &n)| format!("{s}{}", " ".repeat(n - s.chars().count())))
                .collect();
            writeln!(w, "{}", padded.join("  ").trim_end())
        };
        line(&mut w, &self.header)?;
        for r in &cells {
            line(&mut w, r)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, CliError> {
        let mut metadata = Vec::new();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            if let Some(m) = line.strip_prefix('#') {
                metadata.push(m.strip_prefix(' ').unwrap_or(m).to_string());
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header = rdr.headers()?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|rec| rec.map(|r| r.iter().map(Cell::parse).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SweepSeries {
            metadata,
            header,
            rows,
        })
    }
}
