//! Per-tick metrics and their serializations.
//!
//! Columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `tick` | tick index |
//! | `<pool>.reserve_w`, `<pool>.reserve_o` | reserves, minimal units |
//! | `<pool>.spot` | counter per wrapped, reduced fraction `n/d`; empty if the pool is empty |
//! | `<pool>.slippage` | slippage of selling `slippage_ref` wrapped, reduced fraction; empty if the pool is empty |
//! | `<gateway>.escrow`, `<gateway>.outstanding` | escrow and escrow net of queued unlocks |
//! | `rgu.supply`, `rgu.emitted`, `rgu.claimed`, `rgu.burned`, `rgu.residual` | RGU books, cumulative |
//! | `agent<id>.wealth` | holdings marked at feed prices in the numeraire, floored |
//!
//! Pool and gateway columns follow genesis registration order; entities
//! added later by governance are not tracked. Wealth columns are present only
//! when a numeraire is known.

use std::io::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Records,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl MetricsTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, top to bottom.
    pub fn series(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.column(name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Records => self.write_records(out),
        }
    }

    pub fn to_bytes(&self, format: Format) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory cannot fail");
        buf
    }

    fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    fn write_records(&self, out: &mut impl Write) -> io::Result<()> {
        for row in &self.rows {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row)
                .map(|(k, v)| format!("{}:{}", serde_json::Value::from(k.as_str()), serde_json::Value::from(v.as_str())))
                .collect();
            writeln!(out, "{{{}}}", fields.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> MetricsTable {
        MetricsTable {
            columns: vec!["tick".into(), "p.spot".into()],
            rows: vec![vec!["0".into(), "1/3".into()], vec!["1".into(), "".into()]],
        }
    }

    #[test]
    fn csv_layout() {
        let text = String::from_utf8(table().to_bytes(Format::Csv)).unwrap();
        assert_eq!(text, "tick,p.spot\n0,1/3\n1,\n");
    }

    #[test]
    fn records_keep_column_order() {
        let text = String::from_utf8(table().to_bytes(Format::Records)).unwrap();
        assert_eq!(text, "{\"tick\":\"0\",\"p.spot\":\"1/3\"}\n{\"tick\":\"1\",\"p.spot\":\"\"}\n");
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.is_object());
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = MetricsTable { columns: vec!["tick".into()], rows: vec![] };
        assert_eq!(t.to_bytes(Format::Csv), b"tick\n");
        assert!(t.to_bytes(Format::Records).is_empty());
    }
}
