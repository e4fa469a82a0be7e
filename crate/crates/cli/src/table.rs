//! Numeric tables with missing cells, read from and written to CSV.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use hyperco::{Error, Result};

/// Parsing options for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Cell contents (after trimming) read as missing values.
    pub missing_tokens: Vec<String>,
    /// Whether the first record holds column names. Without one, columns
    /// are named `c1, c2, …`.
    pub header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            missing_tokens: vec![String::new(), "NA".into(), "NaN".into()],
            header: true,
        }
    }
}

/// Rectangular table of optional reals with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if let Some(k) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(Error::Schema {
                row: k + 1,
                message: format!("expected {} cells, found {}", columns.len(), rows[k].len()),
            });
        }
        if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table cells must be finite".into()));
        }
        Ok(Self { columns, rows })
    }

    /// Builds a table from complete columns of equal length.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::InvalidInput("columns differ in length".into()));
        }
        let rows = (0..n).map(|i| columns.iter().map(|c| Some(c.1[i])).collect()).collect();
        Self::new(columns.into_iter().map(|c| c.0).collect(), rows)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row][col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of columns `a` and `b` on the rows where both are present.
    pub fn complete_pair(&self, a: usize, b: usize) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().filter_map(|r| Some((r[a]?, r[b]?))).unzip()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Option::is_none)
    }
}

/// Reads a table from a file.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Table> {
    read_csv(File::open(path)?, opts)
}

/// Reads a table from any reader. Row numbers in errors count records from
/// 1, including the header.
pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut row_no = 0;
    if opts.header {
        match records.next() {
            Some(rec) => {
                row_no += 1;
                columns = Some(rec?.iter().map(|s| s.trim().to_string()).collect());
            }
            None => {
                return Err(Error::Schema {
                    row: 0,
                    message: "empty input, header row required".into(),
                })
            }
        }
    }
    for rec in records {
        let rec = rec?;
        row_no += 1;
        let width = columns
            .get_or_insert_with(|| (1..=rec.len()).map(|k| format!("c{k}")).collect())
            .len();
        if rec.len() != width {
            return Err(Error::Schema {
                row: row_no,
                message: format!("expected {width} cells, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (col, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if opts.missing_tokens.iter().any(|t| t == cell) {
                row.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(Some(v)),
                _ => {
                    return Err(Error::Parse {
                        row: row_no,
                        column: col + 1,
                        message: format!("'{cell}' is not a finite number"),
                    })
                }
            }
        }
        rows.push(row);
    }
    let columns = columns.unwrap_or_default();
    if columns.is_empty() {
        return Err(Error::Schema {
            row: 0,
            message: "no columns".into(),
        });
    }
    Table::new(columns, rows)
}

/// Writes `t` as CSV with a header row. Missing cells become `NA`; numbers
/// use the shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(t: &Table, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&t.columns)?;
    for r in &t.rows {
        w.write_record(r.iter().map(|c| c.map_or_else(|| "NA".to_string(), |v| v.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Table> {
        read_csv(s.as_bytes(), &CsvOptions::default())
    }

    #[test]
    fn small_table() {
        let t = read("a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(t.columns(), &["a", "b"]);
        assert_eq!(t.n_rows(), 2);
        assert!(!t.has_missing());
        assert_eq!(t.cell(1, 0), Some(3.0));
    }

    #[test]
    fn missing_tokens() {
        let t = read("a,b\n1,NA\n,4\nNaN,5\n").unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.cell(0, 1), None);
        assert_eq!(t.cell(1, 0), None);
        assert_eq!(t.complete_pair(0, 1), (vec![], vec![]));
    }

    #[test]
    fn ragged_and_bad_cells() {
        match read("a,b\n1,2\n3\n") {
            Err(Error::Schema { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        match read("a,b\n1,2\n3,x\n") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        assert!(read("a\ninf\n").is_err());
    }

    #[test]
    fn headerless_and_delimiter() {
        let opts = CsvOptions {
            delimiter: b';',
            header: false,
            ..CsvOptions::default()
        };
        let t = read_csv("1;2\n3;4\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.columns(), &["c1", "c2"]);
        assert_eq!(t.n_rows(), 2);
    }
}
