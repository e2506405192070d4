use std::path::Path;

use crate::CliError;

/// A CSV file held column-wise.
pub struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::input(format!("reading {}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::input(format!("reading header of {}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (row, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| CliError::input(format!("CSV row {}: {e}", row + 2)))?;
            for (c, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| {
                    CliError::input(format!(
                        "CSV row {}, column '{}': '{field}' is not a number",
                        row + 2,
                        headers[c]
                    ))
                })?;
                if !value.is_finite() {
                    return Err(CliError::input(format!(
                        "CSV row {}, column '{}': value is not finite",
                        row + 2,
                        headers[c]
                    )));
                }
                columns[c].push(value);
            }
        }
        Ok(Self { headers, columns })
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|c| self.columns[c].as_slice())
            .ok_or_else(|| {
                CliError::input(format!(
                    "no column '{name}' (available: {})",
                    self.headers.join(", ")
                ))
            })
    }
}
