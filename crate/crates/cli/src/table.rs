//! Numeric CSV input and output.

use std::path::Path;

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Reads a comma-separated numeric file. A first row that does not parse
    /// as numbers is taken as the header; otherwise columns are named `x_1..`.
    pub fn read(path: &Path) -> Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut header = None;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
            let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) if i == 0 => header = Some(record.iter().map(str::to_string).collect::<Vec<_>>()),
                Err(e) => return Err(format!("{}: row {}: {e}", path.display(), i + 1)),
            }
        }
        let width = header
            .as_ref()
            .map(Vec::len)
            .or_else(|| rows.first().map(Vec::len))
            .ok_or_else(|| format!("{} is empty", path.display()))?;
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(format!("{}: row {} has {} columns, expected {width}", path.display(), bad + 1, rows[bad].len()));
        }
        let header = header.unwrap_or_else(|| (1..=width).map(|j| format!("x_{j}")).collect());
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// LF line endings, mandatory header, shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
