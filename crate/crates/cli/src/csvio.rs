//! Tidy CSV tables with fixed nine-significant-digit numbers.

use std::io::{Read, Write};

use crate::error::CliError;

/// Formats a number with nine significant digits so reruns are byte-identical.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // keeps -0.0 and 0.0 on one spelling
        return "0.00000000e0".to_string();
    }
    format!("{x:.8e}")
}

/// Joins per-link values with `;` inside one CSV field.
pub fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(";")
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    if s.is_empty() {
        return Ok(vec![]);
    }
    s.split(';')
        .map(|p| p.parse::<f64>().map_err(|_| CliError::Runtime(format!("bad number {p:?}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric value of `name` in row `row`.
    pub fn num(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.parse().ok()
    }

    pub fn write_to(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(CliError::runtime)?;
        for r in &self.rows {
            w.write_record(r).map_err(CliError::runtime)?;
        }
        w.flush().map_err(CliError::runtime)
    }

    pub fn to_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV fields are UTF-8")
    }

    pub fn read_from(input: impl Read) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(CliError::runtime)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(CliError::runtime)?;
        Ok(Self { header, rows })
    }
}

/// One simulated (configuration point, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub governor: String,
    pub strategy: String,
    pub links: usize,
    pub seed: u64,
    /// Percent of the bundle capacity.
    pub load_pct: f64,
    /// Target delay in seconds, 0 for static strategies.
    pub target_s: f64,
    pub per_link_loads: Vec<f64>,
    pub per_link_energy: Vec<f64>,
    pub bundle_energy: f64,
    /// Analytic bundle energy at the realized per-link loads.
    pub model_energy: f64,
    pub mean_delay_s: f64,
}

impl ResultRow {
    pub const HEADER: [&'static str; 12] = [
        "experiment",
        "governor",
        "strategy",
        "links",
        "seed",
        "load_pct",
        "target_s",
        "per_link_loads",
        "per_link_energy",
        "bundle_energy",
        "model_energy",
        "mean_delay_s",
    ];

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.governor.clone(),
            self.strategy.clone(),
            self.links.to_string(),
            self.seed.to_string(),
            fmt_num(self.load_pct),
            fmt_num(self.target_s),
            fmt_list(&self.per_link_loads),
            fmt_list(&self.per_link_energy),
            fmt_num(self.bundle_energy),
            fmt_num(self.model_energy),
            fmt_num(self.mean_delay_s),
        ]
    }

    pub fn from_record(r: &[String]) -> Result<Self, CliError> {
        if r.len() != Self::HEADER.len() {
            return Err(CliError::Runtime(format!("expected {} fields, got {}", Self::HEADER.len(), r.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::Runtime(format!("bad number {s:?}")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| CliError::Runtime(format!("bad integer {s:?}")));
        Ok(Self {
            experiment: r[0].clone(),
            governor: r[1].clone(),
            strategy: r[2].clone(),
            links: int(&r[3])? as usize,
            seed: int(&r[4])?,
            load_pct: num(&r[5])?,
            target_s: num(&r[6])?,
            per_link_loads: parse_list(&r[7])?,
            per_link_energy: parse_list(&r[8])?,
            bundle_energy: num(&r[9])?,
            model_energy: num(&r[10])?,
            mean_delay_s: num(&r[11])?,
        })
    }

    pub fn table(rows: &[ResultRow]) -> CsvTable {
        let mut t = CsvTable::new(&Self::HEADER);
        for r in rows {
            t.push(r.to_record());
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.9843903810769204), "9.84390381e-1");
        assert_eq!(fmt_num(-0.0), fmt_num(0.0));
        assert_eq!(fmt_num(1e10), "1.00000000e10");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn table_round_trip() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["x,y".into(), fmt_list(&[1.0, 2.5])]);
        let back = CsvTable::read_from(t.to_string().as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(parse_list(&back.rows[0][1]).unwrap(), vec![1.0, 2.5]);
    }
}
