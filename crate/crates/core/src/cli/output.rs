use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::Result;

/// A real with 17 significant digits, enough to round-trip any double.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table preceded by a `# config` comment line holding the resolved
/// configuration. Missing values are written as empty fields.
pub struct CsvWriter {
    text: String,
}

impl CsvWriter {
    pub fn new(config: &Value, columns: &[&str]) -> Self {
        Self {
            text: format!("# config {config}\n{}\n", columns.join(",")),
        }
    }

    pub fn row(&mut self, values: &[Option<f64>]) {
        let fields: Vec<String> = values.iter().map(|v| v.map(format_real).unwrap_or_default()).collect();
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn header_and_empty_fields() {
        let mut w = CsvWriter::new(&serde_json::json!({"p": 2.0}), &["a", "b"]);
        w.row(&[Some(1.0), None]);
        assert_eq!(w.as_str(), "# config {\"p\":2.0}\na,b\n1.0000000000000000e0,\n");
    }
}
