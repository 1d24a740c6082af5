use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{CorpusError, Id, Result, SkuRecord, StockSnapshot, StoreRecord, TransactionLine};

const TRANSACTIONS_HEADER: &str = "transaction_id,customer_id,store_id,date,sku_id,quantity,unit_price";
const STOCKS_HEADER: &str = "store_id,date,sku_id,quantity_on_hand";
const SKUS_HEADER: &str = "sku_id,name,category_id";
const STORES_HEADER: &str = "store_id,city";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Rows<R: Read> {
    reader: csv::Reader<R>,
    record: csv::StringRecord,
}

impl<R: Read> Rows<R> {
    fn new(input: R, expected: &'static str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != expected {
            return Err(CorpusError::Header { line: 1, expected });
        }
        Ok(Rows {
            reader,
            record: csv::StringRecord::new(),
        })
    }

    /// Advances to the next row, returning its 1-based line number.
    fn next(&mut self) -> Result<Option<u64>> {
        if !self.reader.read_record(&mut self.record)? {
            return Ok(None);
        }
        let line = self.record.position().map(|p| p.line()).unwrap_or(0);
        Ok(Some(line))
    }

    fn field(&self, line: u64, index: usize, name: &'static str) -> Result<&str> {
        match self.record.get(index) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(CorpusError::Parse {
                line,
                field: name,
                message: "missing value".into(),
            }),
        }
    }
}

fn parse_date(line: u64, field: &'static str, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|e| CorpusError::Parse {
        line,
        field,
        message: format!("invalid date {raw:?}: {e}"),
    })
}

fn parse_u32(line: u64, field: &'static str, raw: &str) -> Result<u32> {
    raw.parse::<i64>()
        .map_err(|e| CorpusError::Parse {
            line,
            field,
            message: format!("invalid integer {raw:?}: {e}"),
        })
        .and_then(|v| {
            u32::try_from(v).map_err(|_| CorpusError::Parse {
                line,
                field,
                message: format!("must be non-negative, got {v}"),
            })
        })
}

pub fn read_transactions<R: Read>(input: R) -> Result<Vec<TransactionLine>> {
    let mut rows = Rows::new(input, TRANSACTIONS_HEADER)?;
    let mut out = Vec::new();
    while let Some(line) = rows.next()? {
        let quantity = parse_u32(line, "quantity", rows.field(line, 5, "quantity")?)?;
        if quantity == 0 {
            return Err(CorpusError::Parse {
                line,
                field: "quantity",
                message: "must be at least 1".into(),
            });
        }
        let raw_price = rows.field(line, 6, "unit_price")?;
        let unit_price: f64 = raw_price.parse().map_err(|e| CorpusError::Parse {
            line,
            field: "unit_price",
            message: format!("invalid number {raw_price:?}: {e}"),
        })?;
        if !(unit_price.is_finite() && unit_price > 0.0) {
            return Err(CorpusError::Parse {
                line,
                field: "unit_price",
                message: format!("must be positive, got {unit_price}"),
            });
        }
        out.push(TransactionLine {
            transaction_id: rows.field(line, 0, "transaction_id")?.into(),
            customer_id: rows.field(line, 1, "customer_id")?.into(),
            store_id: rows.field(line, 2, "store_id")?.into(),
            date: parse_date(line, "date", rows.field(line, 3, "date")?)?,
            sku_id: rows.field(line, 4, "sku_id")?.into(),
            quantity,
            unit_price,
        });
    }
    Ok(out)
}

pub fn load_transactions(path: &Path) -> Result<Vec<TransactionLine>> {
    read_transactions(open(path)?)
}

/// Reads stock rows and groups them by `(store_id, date)` in order of first
/// appearance.
pub fn read_stocks<R: Read>(input: R) -> Result<Vec<StockSnapshot>> {
    let mut rows = Rows::new(input, STOCKS_HEADER)?;
    let mut index: std::collections::HashMap<(Id, NaiveDate), usize> = Default::default();
    let mut out: Vec<StockSnapshot> = Vec::new();
    while let Some(line) = rows.next()? {
        let store: Id = rows.field(line, 0, "store_id")?.into();
        let date = parse_date(line, "date", rows.field(line, 1, "date")?)?;
        let sku: Id = rows.field(line, 2, "sku_id")?.into();
        let quantity = parse_u32(line, "quantity_on_hand", rows.field(line, 3, "quantity_on_hand")?)?;
        let slot = *index.entry((store.clone(), date)).or_insert_with(|| {
            out.push(StockSnapshot {
                store_id: store.clone(),
                date,
                entries: BTreeMap::new(),
            });
            out.len() - 1
        });
        if out[slot].entries.insert(sku.clone(), quantity).is_some() {
            return Err(CorpusError::DuplicateStock {
                line,
                store,
                date,
                sku,
            });
        }
    }
    Ok(out)
}

pub fn load_stocks(path: &Path) -> Result<Vec<StockSnapshot>> {
    read_stocks(open(path)?)
}

pub fn read_skus<R: Read>(input: R) -> Result<Vec<SkuRecord>> {
    let mut rows = Rows::new(input, SKUS_HEADER)?;
    let mut out = Vec::new();
    while let Some(line) = rows.next()? {
        let name: Vec<String> = rows
            .field(line, 1, "name")?
            .split_whitespace()
            .map(str::to_owned)
            .collect();
        out.push(SkuRecord {
            sku_id: rows.field(line, 0, "sku_id")?.into(),
            name,
            category_id: rows.field(line, 2, "category_id")?.into(),
        });
    }
    Ok(out)
}

pub fn load_skus(path: &Path) -> Result<Vec<SkuRecord>> {
    read_skus(open(path)?)
}

pub fn read_stores<R: Read>(input: R) -> Result<Vec<StoreRecord>> {
    let mut rows = Rows::new(input, STORES_HEADER)?;
    let mut out = Vec::new();
    while let Some(line) = rows.next()? {
        out.push(StoreRecord {
            store_id: rows.field(line, 0, "store_id")?.into(),
            city: rows.field(line, 1, "city")?.to_owned(),
        });
    }
    Ok(out)
}

pub fn load_stores(path: &Path) -> Result<Vec<StoreRecord>> {
    read_stores(open(path)?)
}

fn writer<W: Write>(out: W, header: &str) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header.split(','))?;
    Ok(w)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| CorpusError::Io {
            path: "<csv>".into(),
            source: e.into_error(),
        })?
        .flush()
        .map_err(|source| CorpusError::Io {
            path: "<csv>".into(),
            source,
        })
}

pub fn write_transactions<W: Write>(out: W, lines: &[TransactionLine]) -> Result<()> {
    let mut w = writer(out, TRANSACTIONS_HEADER)?;
    for l in lines {
        w.write_record([
            l.transaction_id.as_str(),
            l.customer_id.as_str(),
            l.store_id.as_str(),
            &l.date.format("%Y-%m-%d").to_string(),
            l.sku_id.as_str(),
            &l.quantity.to_string(),
            // Shortest representation that round-trips through `parse`.
            &format!("{}", l.unit_price),
        ])?;
    }
    finish(w)
}

pub fn write_stocks<W: Write>(out: W, stocks: &[StockSnapshot]) -> Result<()> {
    let mut w = writer(out, STOCKS_HEADER)?;
    for s in stocks {
        let date = s.date.format("%Y-%m-%d").to_string();
        for (sku, q) in &s.entries {
            w.write_record([s.store_id.as_str(), &date, sku.as_str(), &q.to_string()])?;
        }
    }
    finish(w)
}

pub fn write_skus<W: Write>(out: W, skus: &[SkuRecord]) -> Result<()> {
    let mut w = writer(out, SKUS_HEADER)?;
    for s in skus {
        w.write_record([s.sku_id.as_str(), &s.name.join(" "), s.category_id.as_str()])?;
    }
    finish(w)
}

pub fn write_stores<W: Write>(out: W, stores: &[StoreRecord]) -> Result<()> {
    let mut w = writer(out, STORES_HEADER)?;
    for s in stores {
        w.write_record([s.store_id.as_str(), s.city.as_str()])?;
    }
    finish(w)
}

/// Writes the four corpus files into `dir`.
pub(crate) fn write_all(dir: &Path, corpus: &super::SyntheticCorpus) -> Result<()> {
    write_skus(create(&dir.join("skus.csv"))?, &corpus.skus)?;
    write_stores(create(&dir.join("stores.csv"))?, &corpus.stores)?;
    write_transactions(create(&dir.join("transactions.csv"))?, &corpus.transactions)?;
    write_stocks(create(&dir.join("stocks.csv"))?, &corpus.stocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TX: &str = "transaction_id,customer_id,store_id,date,sku_id,quantity,unit_price\n";

    #[test]
    fn three_rows_in_order() {
        let data = format!(
            "{TX}t1,c1,s1,2023-01-02,a,1,2.5\nt1,c1,s1,2023-01-02,b,2,1\nt2,c2,s1,2023-01-03,a,1,2.5\n"
        );
        let lines = read_transactions(data.as_bytes()).unwrap();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].sku_id.as_str(), "b");
        assert_eq!(lines[1].quantity, 2);
        assert_eq!(lines[2].transaction_id.as_str(), "t2");
    }

    #[test]
    fn zero_quantity_names_line() {
        let data = format!("{TX}t1,c1,s1,2023-01-02,a,1,2.5\nt1,c1,s1,2023-01-02,b,0,1\n");
        match read_transactions(data.as_bytes()) {
            Err(CorpusError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "quantity");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_calendar_date() {
        let data = format!("{TX}t1,c1,s1,2023-13-01,a,1,2.5\n");
        match read_transactions(data.as_bytes()) {
            Err(CorpusError::Parse { line: 2, field: "date", .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_price_rejected() {
        let data = format!("{TX}t1,c1,s1,2023-01-02,a,1,0\n");
        assert!(matches!(
            read_transactions(data.as_bytes()),
            Err(CorpusError::Parse { field: "unit_price", .. })
        ));
        let data = format!("{TX}t1,c1,s1,2023-01-02,a,1,-3\n");
        assert!(read_transactions(data.as_bytes()).is_err());
    }

    #[test]
    fn wrong_header() {
        assert!(matches!(
            read_transactions("a,b,c\n".as_bytes()),
            Err(CorpusError::Header { .. })
        ));
    }

    #[test]
    fn stocks_grouped_by_store_and_day() {
        let data = "store_id,date,sku_id,quantity_on_hand\n\
                    s1,2023-01-02,a,3\ns1,2023-01-03,a,2\ns2,2023-01-02,a,0\ns2,2023-01-03,a,5\n";
        let snaps = read_stocks(data.as_bytes()).unwrap();
        assert_eq!(snaps.len(), 4);
        assert_eq!(snaps[3].on_hand("a"), 5);
    }

    #[test]
    fn duplicate_stock_row() {
        let data = "store_id,date,sku_id,quantity_on_hand\ns1,2023-01-02,a,3\ns1,2023-01-02,a,1\n";
        assert!(matches!(
            read_stocks(data.as_bytes()),
            Err(CorpusError::DuplicateStock { line: 3, .. })
        ));
    }

    #[test]
    fn negative_stock_rejected() {
        let data = "store_id,date,sku_id,quantity_on_hand\ns1,2023-01-02,a,-1\n";
        assert!(matches!(
            read_stocks(data.as_bytes()),
            Err(CorpusError::Parse { field: "quantity_on_hand", .. })
        ));
    }

    #[test]
    fn catalog_round_trip() {
        let skus = vec![SkuRecord {
            sku_id: "a".into(),
            name: vec!["red".into(), "apple".into()],
            category_id: "fruit".into(),
        }];
        let mut buf = Vec::new();
        write_skus(&mut buf, &skus).unwrap();
        assert_eq!(read_skus(buf.as_slice()).unwrap(), skus);
    }
}
