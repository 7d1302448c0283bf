//! Column-oriented numeric table with an optional calendar-date column.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

/// Column name for the calendar date in CSV files.
pub const DATE_COLUMN: &str = "ORDERDATE";

/// The transaction-table column order used for CSV output. Columns not in
/// this list are appended alphabetically.
pub const CANONICAL_COLUMNS: &[&str] = &[
    "ORDERDATE",
    "MERCHANDISE_HIERARCHY",
    "SALES_CHANNEL",
    "TERRITORY",
    "LOYALTY_TIER",
    "PROMO_CODE",
    "PRICEEACH",
    "QUANTITYORDERED",
    "UNIT_COST",
    "SALES",
    "DISCOUNT",
    "NET_SALES",
    "SHIPPING_REVENUE",
    "COST_OF_GOODS_SOLD",
    "FULFILLMENT_COST",
    "MARKETING_COST",
    "RETURN_COST",
    "PROFIT",
    "PROFIT_MARGIN",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("column {0:?} not found")]
    MissingColumn(String),
    #[error("column {name:?} has length {got}, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: cannot parse date {value:?} (expected YYYY-MM-DD)")]
    BadDate { row: usize, value: String },
    #[error("dataset is empty")]
    Empty,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Column-oriented table: named numeric columns of equal length, optional
/// per-row calendar date, and optional categorical text columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    n_rows: usize,
    dates: Option<Vec<NaiveDate>>,
    numeric: BTreeMap<String, Vec<f64>>,
    text: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn numeric_columns(&self) -> impl Iterator<Item = &str> {
        self.numeric.keys().map(|s| s.as_str())
    }

    pub fn text_columns(&self) -> impl Iterator<Item = &str> {
        self.text.keys().map(|s| s.as_str())
    }

    pub fn column(&self, name: &str) -> Result<&[f64], DatasetError> {
        self.numeric
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.numeric.contains_key(name)
    }

    pub fn text_column(&self, name: &str) -> Result<&[String], DatasetError> {
        self.text
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    }

    fn check_len(&mut self, name: &str, len: usize) -> Result<(), DatasetError> {
        if self.numeric.is_empty() && self.text.is_empty() && self.dates.is_none() {
            self.n_rows = len;
        }
        if len != self.n_rows {
            return Err(DatasetError::LengthMismatch {
                name: name.to_string(),
                got: len,
                expected: self.n_rows,
            });
        }
        Ok(())
    }

    pub fn set_dates(&mut self, dates: Vec<NaiveDate>) -> Result<(), DatasetError> {
        self.check_len(DATE_COLUMN, dates.len())?;
        self.dates = Some(dates);
        Ok(())
    }

    pub fn insert_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<(), DatasetError> {
        self.check_len(name, values.len())?;
        self.numeric.insert(name.to_string(), values);
        Ok(())
    }

    pub fn insert_text(&mut self, name: &str, values: Vec<String>) -> Result<(), DatasetError> {
        self.check_len(name, values.len())?;
        self.text.insert(name.to_string(), values);
        Ok(())
    }

    pub fn value(&self, name: &str, row: usize) -> Result<f64, DatasetError> {
        Ok(self.column(name)?[row])
    }

    /// A copy containing only the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut out = Dataset::new();
        if let Some(dates) = &self.dates {
            out.set_dates(rows.iter().map(|&r| dates[r]).collect()).unwrap();
        }
        for (name, col) in &self.text {
            out.insert_text(name, rows.iter().map(|&r| col[r].clone()).collect())
                .unwrap();
        }
        for (name, col) in &self.numeric {
            out.insert_numeric(name, rows.iter().map(|&r| col[r]).collect())
                .unwrap();
        }
        out
    }

    /// Row indices whose date equals `date`, in row order.
    pub fn rows_on_date(&self, date: NaiveDate) -> Vec<usize> {
        match &self.dates {
            Some(ds) => ds
                .iter()
                .enumerate()
                .filter(|(_, d)| **d == date)
                .map(|(i, _)| i)
                .collect(),
            None => Vec::new(),
        }
    }

    fn header_order(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for &c in CANONICAL_COLUMNS {
            let present = (c == DATE_COLUMN && self.dates.is_some())
                || self.numeric.contains_key(c)
                || self.text.contains_key(c);
            if present {
                cols.push(c.to_string());
            }
        }
        for k in self.text.keys().chain(self.numeric.keys()) {
            if !cols.iter().any(|c| c == k) {
                cols.push(k.clone());
            }
        }
        cols
    }

    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(w);
        let cols = self.header_order();
        wtr.write_record(&cols)?;
        let mut record: Vec<String> = Vec::with_capacity(cols.len());
        for row in 0..self.n_rows {
            record.clear();
            for c in &cols {
                if c == DATE_COLUMN && self.dates.is_some() {
                    record.push(self.dates.as_ref().unwrap()[row].to_string());
                } else if let Some(v) = self.text.get(c) {
                    record.push(v[row].clone());
                } else {
                    let mut buf = ryu_format(self.numeric[c][row]);
                    if buf == "-0" {
                        buf = "0".to_string();
                    }
                    record.push(buf);
                }
            }
            wtr.write_record(record.iter())?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: &Path) -> Result<(), DatasetError> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }

    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (i, field) in rec.iter().enumerate() {
                raw[i].push(field.to_string());
            }
        }
        let n = raw.first().map(|c| c.len()).unwrap_or(0);

        let mut out = Dataset::new();
        for (i, name) in headers.iter().enumerate() {
            let col = std::mem::take(&mut raw[i]);
            if name == DATE_COLUMN {
                let mut dates = Vec::with_capacity(n);
                for (row, v) in col.iter().enumerate() {
                    let d = NaiveDate::parse_from_str(v, "%Y-%m-%d")
                        .map_err(|_| DatasetError::BadDate {
                            row,
                            value: v.clone(),
                        })?;
                    dates.push(d);
                }
                out.set_dates(dates)?;
                continue;
            }
            let parsed: Option<Vec<f64>> = col
                .iter()
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect();
            match parsed {
                Some(nums) if !col.is_empty() => out.insert_numeric(name, nums)?,
                _ => out.insert_text(name, col)?,
            }
        }
        Ok(out)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, DatasetError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }
}

fn ryu_format(x: f64) -> String {
    // csv's serializer uses ryu; mirror it for plain string records.
    let mut s = format!("{x}");
    if s.ends_with(".0") {
        s.truncate(s.len() - 2);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn insert_and_lookup() {
        let mut ds = Dataset::new();
        ds.insert_numeric("A", vec![1.0, 2.0]).unwrap();
        ds.insert_text("tag", vec!["x".into(), "y".into()]).unwrap();
        ds.set_dates(vec![d("2023-01-01"), d("2023-01-02")]).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.column("A").unwrap(), &[1.0, 2.0]);
        assert!(matches!(
            ds.column("B"),
            Err(DatasetError::MissingColumn(_))
        ));
        assert_eq!(ds.rows_on_date(d("2023-01-02")), vec![1]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut ds = Dataset::new();
        ds.insert_numeric("A", vec![1.0, 2.0]).unwrap();
        assert!(ds.insert_numeric("B", vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut ds = Dataset::new();
        ds.set_dates(vec![d("2023-03-01"), d("2023-03-02")]).unwrap();
        ds.insert_numeric("SALES", vec![12.5, 0.125]).unwrap();
        ds.insert_text("SALES_CHANNEL", vec!["Online".into(), "Retail".into()])
            .unwrap();
        let mut buf = Vec::new();
        ds.to_csv_writer(&mut buf).unwrap();
        let back = Dataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn csv_column_order_follows_contract() {
        let mut ds = Dataset::new();
        ds.insert_numeric("PROFIT", vec![1.0]).unwrap();
        ds.insert_numeric("SALES", vec![2.0]).unwrap();
        ds.set_dates(vec![d("2023-01-01")]).unwrap();
        let mut buf = Vec::new();
        ds.to_csv_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "ORDERDATE,SALES,PROFIT");
    }
}
