use std::path::Path;

use crate::LabError;

/// A rectangular table of text cells with a named header row.
///
/// Floats are stored in Rust's shortest round-trip form, so parsing a cell
/// back yields the exact value that was written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub fn cell(v: f64) -> String {
    format!("{v}")
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a column; existing rows get an empty cell.
    pub fn push_column(&mut self, name: impl Into<String>) -> Result<(), LabError> {
        let name = name.into();
        if self.header.contains(&name) {
            return Err(LabError::Csv(format!("duplicate column '{name}'")));
        }
        self.header.push(name);
        for r in &mut self.rows {
            r.push(String::new());
        }
        Ok(())
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<(), LabError> {
        if row.len() != self.header.len() {
            return Err(LabError::Csv(format!("row has {} cells, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_floats(&mut self, row: &[f64]) -> Result<(), LabError> {
        self.push(row.iter().map(|v| cell(*v)).collect())
    }

    fn column_index(&self, name: &str) -> Result<usize, LabError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::Csv(format!("no column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>, LabError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn float_column(&self, name: &str) -> Result<Vec<f64>, LabError> {
        self.column(name)?
            .into_iter()
            .map(|s| s.parse::<f64>().map_err(|e| LabError::Csv(format!("column '{name}': '{s}': {e}"))))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, LabError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| LabError::Csv(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self, LabError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let mut table = Self { header, rows: Vec::new() };
        for rec in r.records() {
            table.push(rec?.iter().map(String::from).collect())?;
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        std::fs::write(path, self.to_csv()?).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }
}
