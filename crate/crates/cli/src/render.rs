//! Plain-text, markdown and CSV table rendering.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::CliError;

/// A rectangular table of preformatted cells.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in w.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        w
    }

    /// Pipe table with centred columns.
    pub fn to_pipe(&self) -> String {
        let widths = self.widths();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (cell, &w) in cells.iter().zip(&widths) {
                let pad = w - cell.chars().count();
                let left = pad / 2;
                let _ = write!(s, "| {}{}{} ", " ".repeat(left), cell, " ".repeat(pad - left));
            }
            s.push_str("|\n");
            s
        };
        let mut out = line(&self.headers);
        for &w in &widths {
            let _ = write!(out, "|:{}:", "-".repeat(w));
        }
        out.push_str("|\n");
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

/// Serialises records to CSV with a header row.
pub fn to_csv<T: Serialize>(records: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report is serialisable");
    s.push('\n');
    s
}

pub fn fixed(x: f64, dp: usize) -> String {
    format!("{x:.dp$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipe_table_centres_cells() {
        let mut t = Table::new(["Method", "RNE"]);
        t.push(vec!["Traditional SM".into(), "9".into()]);
        t.push(vec!["0-95 method".into(), "19".into()]);
        assert_eq!(
            t.to_pipe(),
            "|     Method     | RNE |\n\
             |:--------------:|:---:|\n\
             | Traditional SM |  9  |\n\
             |  0-95 method   | 19  |\n"
        );
    }

    #[test]
    fn csv_has_header_and_plain_numbers() {
        #[derive(Serialize)]
        struct R {
            n: u64,
            x: f64,
        }
        let s = to_csv(&[R { n: 11012, x: 0.1 }]).unwrap();
        assert_eq!(s, "n,x\n11012,0.1\n");
    }
}
