use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use hqnn_core::MetricsRecord;

use crate::CliError;

pub const HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc,wall_seconds";

/// One CSV line, without the trailing newline.
pub fn format_row(r: &MetricsRecord) -> String {
    format!(
        "{},{:.8},{:.6},{:.8},{:.6},{:.3}",
        r.epoch, r.train_loss, r.train_accuracy, r.test_loss, r.test_accuracy, r.wall_seconds
    )
}

/// Streams rows to disk as epochs finish, so an aborted run keeps its history.
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{HEADER}").and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))?;
        Ok(MetricsWriter { out })
    }

    pub fn append(&mut self, record: &MetricsRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", format_row(record))?;
        self.out.flush()
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    epoch: usize,
    train_loss: f64,
    train_acc: f64,
    test_loss: f64,
    test_acc: f64,
    wall_seconds: f64,
}

/// Parses a metrics file, rejecting a wrong header, non-finite values and
/// non-increasing epochs. Errors name the offending line.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_metrics(&text).map_err(|msg| CliError::Data(format!("{}: {msg}", path.display())))
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>, String> {
    let first = text.lines().next().unwrap_or("");
    if first.trim_end() != HEADER {
        return Err(format!("line 1: expected header `{HEADER}`"));
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut records: Vec<MetricsRecord> = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| match e.position() {
            Some(pos) => format!("line {}: {e}", pos.line()),
            None => e.to_string(),
        })?;
        let line = records.len() + 2;
        let values = [row.train_loss, row.train_acc, row.test_loss, row.test_acc, row.wall_seconds];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("line {line}: non-finite value"));
        }
        if records.last().is_some_and(|prev| prev.epoch >= row.epoch) {
            return Err(format!("line {line}: epoch {} does not increase", row.epoch));
        }
        records.push(MetricsRecord {
            epoch: row.epoch,
            train_loss: row.train_loss,
            train_accuracy: row.train_acc,
            test_loss: row.test_loss,
            test_accuracy: row.test_acc,
            wall_seconds: row.wall_seconds,
        });
    }
    Ok(records)
}

/// The file with its `wall_seconds` column dropped, for determinism comparisons.
pub fn without_wall_seconds(text: &str) -> String {
    text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let r = MetricsRecord {
            epoch: 3,
            train_loss: 0.5,
            train_accuracy: 0.75,
            test_loss: 0.625,
            test_accuracy: 0.8,
            wall_seconds: 1.25,
        };
        let text = format!("{HEADER}\n{}\n", format_row(&r));
        assert_eq!(text.lines().nth(1).unwrap(), "3,0.50000000,0.750000,0.62500000,0.800000,1.250");
        assert_eq!(parse_metrics(&text).unwrap(), vec![r]);
    }

    #[test]
    fn errors_name_the_line() {
        let text = format!("{HEADER}\n1,0.5,0.5,0.5,0.5,1.0\n1,0.4,0.5,0.5,0.5,1.0\n");
        assert!(parse_metrics(&text).unwrap_err().starts_with("line 3"));
        let text = format!("{HEADER}\n1,0.5,0.5,0.5,0.5,1.0\n2,abc,0.5,0.5,0.5,1.0\n");
        assert!(parse_metrics(&text).unwrap_err().starts_with("line 3"));
        assert!(parse_metrics("epoch,loss\n").unwrap_err().starts_with("line 1"));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_metrics(&format!("{HEADER}\n")).unwrap().is_empty());
    }

    #[test]
    fn wall_column_is_dropped() {
        assert_eq!(without_wall_seconds("a,b,c\n1,2,3\n"), "a,b\n1,2");
    }
}
