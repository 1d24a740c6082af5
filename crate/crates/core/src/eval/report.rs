use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{EvalError, Result};
use crate::embed::{ConsumerMethod, ProductMethod};
use crate::features::StockMode;

pub const CSV_HEADER: [&str; 9] = ["consumer", "product", "stock_mode", "emd", "jsd", "acc", "seed", "n_real", "n_fake"];

/// Row order of the rendered grid.
pub const METHOD_PAIRS: [(ConsumerMethod, ProductMethod); 4] = [
    (ConsumerMethod::Rnn, ProductMethod::W2v),
    (ConsumerMethod::Rnn, ProductMethod::Cleora),
    (ConsumerMethod::Cleora, ProductMethod::W2v),
    (ConsumerMethod::Cleora, ProductMethod::Cleora),
];

/// Column-group order of the rendered grid.
pub const MODE_COLUMNS: [(StockMode, &str); 3] = [
    (StockMode::Unweighted, "Stocks (Unweighted)"),
    (StockMode::Weighted, "Stocks (Weighted)"),
    (StockMode::None, "No Stocks"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub consumer: ConsumerMethod,
    pub product: ProductMethod,
    pub mode: StockMode,
}

/// Metrics for one experiment cell and one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub key: CellKey,
    pub emd: f64,
    pub jsd: f64,
    pub acc: f64,
    pub seed: u64,
    pub n_real: usize,
    pub n_fake: usize,
}

/// Mean over the seeds recorded for a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub emd: f64,
    pub jsd: f64,
    pub acc: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    rows: Vec<MetricRow>,
    pub bins: usize,
}

impl MetricRow {
    fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(EvalError::Report(format!("{} {} {} seed {}: {what}", self.key.consumer, self.key.product, self.key.mode, self.seed)));
        if !(self.emd.is_finite() && self.jsd.is_finite() && self.acc.is_finite()) {
            return bad("non-finite metric");
        }
        if self.emd < 0.0 {
            return bad("negative EMD");
        }
        if !(0.0..=std::f64::consts::LN_2).contains(&self.jsd) {
            return bad("JSD outside [0, ln 2]");
        }
        if !(0.0..=1.0).contains(&self.acc) {
            return bad("accuracy outside [0, 1]");
        }
        Ok(())
    }
}

/// Validates and sorts per-seed rows. A cell may appear once per seed.
pub fn build_report(mut rows: Vec<MetricRow>, bins: usize) -> Result<MetricReport> {
    if rows.is_empty() {
        return Err(EvalError::Report("no configuration evaluated".into()));
    }
    for r in &rows {
        r.check()?;
    }
    rows.sort_by_key(|r| (r.key, r.seed));
    if let Some(w) = rows.windows(2).find(|w| w[0].key == w[1].key && w[0].seed == w[1].seed) {
        return Err(EvalError::Report(format!(
            "{} {} {} seed {} recorded twice",
            w[0].key.consumer, w[0].key.product, w[0].key.mode, w[0].seed
        )));
    }
    Ok(MetricReport { rows, bins })
}

impl MetricReport {
    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn seeds(&self) -> BTreeSet<u64> {
        self.rows.iter().map(|r| r.seed).collect()
    }

    pub fn cells(&self) -> BTreeMap<CellKey, CellSummary> {
        let mut out: BTreeMap<CellKey, CellSummary> = BTreeMap::new();
        for r in &self.rows {
            let c = out.entry(r.key).or_insert(CellSummary { emd: 0.0, jsd: 0.0, acc: 0.0, seeds: 0 });
            c.emd += r.emd;
            c.jsd += r.jsd;
            c.acc += r.acc;
            c.seeds += 1;
        }
        for c in out.values_mut() {
            let n = c.seeds as f64;
            c.emd /= n;
            c.jsd /= n;
            c.acc /= n;
        }
        out
    }

    pub fn cell(&self, key: CellKey) -> Option<CellSummary> {
        self.cells().get(&key).copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.key.consumer.to_string(),
                r.key.product.to_string(),
                r.key.mode.to_string(),
                r.emd.to_string(),
                r.jsd.to_string(),
                r.acc.to_string(),
                r.seed.to_string(),
                r.n_real.to_string(),
                r.n_fake.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`MetricReport::write_csv`]. The bin count is
    /// not part of the CSV and must be supplied.
    pub fn read_csv<R: Read>(input: R, bins: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        if rd.headers()?.iter().ne(CSV_HEADER) {
            return Err(EvalError::Report(format!("expected header {}", CSV_HEADER.join(","))));
        }
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let err = |what: &str| EvalError::Report(format!("row {}: bad {what}", line + 2));
            let real = |i: usize| field(i).parse::<f64>().map_err(|_| err(CSV_HEADER[i]));
            let int = |i: usize| field(i).parse::<u64>().map_err(|_| err(CSV_HEADER[i]));
            rows.push(MetricRow {
                key: CellKey {
                    consumer: field(0).parse().map_err(|_| err("consumer"))?,
                    product: field(1).parse().map_err(|_| err("product"))?,
                    mode: field(2).parse().map_err(|_| err("stock_mode"))?,
                },
                emd: real(3)?,
                jsd: real(4)?,
                acc: real(5)?,
                seed: int(6)?,
                n_real: int(7)? as usize,
                n_fake: int(8)? as usize,
            });
        }
        build_report(rows, bins)
    }

    /// Aligned text grid: method pairs down, stock modes across, seed means
    /// in each cell and `—` where a cell was not run.
    pub fn render_table(&self) -> String {
        const W: usize = 8;
        let cells = self.cells();
        let group = 3 * W + 2;
        let mut s = String::new();
        let _ = write!(s, "{:<18}", "");
        for (_, title) in MODE_COLUMNS {
            let _ = write!(s, "  {title:<group$}");
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        let _ = write!(s, "{:<9}{:<9}", "consumer", "product");
        for _ in MODE_COLUMNS {
            let _ = write!(s, "  {:>W$} {:>W$} {:>W$}", "EMD", "JSD", "Acc");
        }
        s.push('\n');
        for (consumer, product) in METHOD_PAIRS {
            let _ = write!(s, "{:<9}{:<9}", consumer.as_str(), product.as_str());
            for (mode, _) in MODE_COLUMNS {
                match cells.get(&CellKey { consumer, product, mode }) {
                    Some(c) => {
                        let _ = write!(s, "  {:>W$.4} {:>W$.4} {:>W$.4}", c.emd, c.jsd, c.acc);
                    }
                    None => {
                        let _ = write!(s, "  {:>W$} {:>W$} {:>W$}", "—", "—", "—");
                    }
                }
            }
            s.push('\n');
        }
        let seeds: Vec<String> = self.seeds().iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "seeds: {}; histogram bins: {}", seeds.join(", "), self.bins);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(consumer: ConsumerMethod, product: ProductMethod, mode: StockMode, seed: u64, emd: f64) -> MetricRow {
        MetricRow { key: CellKey { consumer, product, mode }, emd, jsd: emd / 3.0, acc: 0.5 + emd / 10.0, seed, n_real: 120, n_fake: 130 }
    }

    fn full_grid(seeds: &[u64]) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        for &seed in seeds {
            for (i, (c, p)) in METHOD_PAIRS.iter().enumerate() {
                for (j, mode) in StockMode::ALL.iter().enumerate() {
                    rows.push(row(*c, *p, *mode, seed, 0.1 * (i * 3 + j) as f64 / 7.0 + seed as f64 * 1e-3));
                }
            }
        }
        rows
    }

    #[test]
    fn grid_has_36_cells() {
        let report = build_report(full_grid(&[1]), 64).unwrap();
        let cells = report.cells();
        assert_eq!(cells.len() * 3, 36);
        let text = report.render_table();
        assert!(!text.contains('—'));
        for (_, title) in MODE_COLUMNS {
            assert!(text.contains(title));
        }
        let data_lines: Vec<&str> = text.lines().skip(2).take(4).collect();
        let numbers: usize = data_lines.iter().map(|l| l.split_whitespace().skip(2).count()).sum();
        assert_eq!(numbers, 36);
    }

    #[test]
    fn missing_cells_render_as_dash() {
        let rows = vec![row(ConsumerMethod::Cleora, ProductMethod::Cleora, StockMode::Weighted, 0, 0.2)];
        let text = build_report(rows, 64).unwrap().render_table();
        assert_eq!(text.matches('—').count(), 33);
        let last = text.lines().nth(5).unwrap();
        assert!(last.starts_with("cleora   cleora"));
        assert!(last.contains("0.2000"));
    }

    #[test]
    fn means_over_seeds() {
        let k = (ConsumerMethod::Rnn, ProductMethod::W2v, StockMode::None);
        let rows = vec![row(k.0, k.1, k.2, 1, 0.2), row(k.0, k.1, k.2, 2, 0.4)];
        let report = build_report(rows, 64).unwrap();
        let c = report.cell(CellKey { consumer: k.0, product: k.1, mode: k.2 }).unwrap();
        assert_eq!(c.seeds, 2);
        assert!((c.emd - 0.3).abs() < 1e-15);
        assert!((c.acc - 0.53).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = full_grid(&[3, 4]);
        rows[5].emd = 0.1 + 0.2;
        rows[7].acc = 1.0 / 3.0;
        let report = build_report(rows, 32).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("consumer,product,stock_mode,emd,jsd,acc,seed,n_real,n_fake\n"));
        assert_eq!(MetricReport::read_csv(&buf[..], 32).unwrap(), report);
    }

    #[test]
    fn rejects_invalid_rows() {
        assert!(build_report(vec![], 64).is_err());
        let mut r = row(ConsumerMethod::Rnn, ProductMethod::W2v, StockMode::None, 0, 0.1);
        r.jsd = 0.7;
        assert!(build_report(vec![r.clone()], 64).is_err());
        r.jsd = 0.1;
        r.acc = f64::NAN;
        assert!(build_report(vec![r.clone()], 64).is_err());
        r.acc = 0.5;
        assert!(build_report(vec![r.clone(), r], 64).is_err());
        assert!(MetricReport::read_csv("a,b\n1,2\n".as_bytes(), 64).is_err());
    }
}
