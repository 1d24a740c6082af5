//! `EMB1`: magic, u32 dim, u32 count, then per row u16 id length, UTF-8 id
//! bytes and `dim` little-endian `f32` values.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{EmbedError, EmbeddingTable, Result};
use crate::corpus::Id;

pub const MAGIC: &[u8; 4] = b"EMB1";

pub fn write_embeddings<W: Write>(mut out: W, table: &EmbeddingTable) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + table.len() * (table.dim() * 4 + 16));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(table.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (i, id) in table.ids().iter().enumerate() {
        let bytes = id.as_str().as_bytes();
        let len = u16::try_from(bytes.len()).map_err(|_| EmbedError::Format(format!("id {id} longer than 65535 bytes")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(bytes);
        for v in table.row_at(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingTable> {
    let fmt = |m: String| EmbedError::Format(m);
    if bytes.len() < 12 {
        return Err(fmt("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(fmt("bad magic, expected EMB1".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if dim == 0 {
        return Err(fmt("dim is zero".into()));
    }
    let mut pos = 12;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    let mut values = Vec::with_capacity(count.min(1 << 20) * dim);
    for row in 0..count {
        let Some(len) = bytes.get(pos..pos + 2) else {
            return Err(fmt(format!("truncated at row {row}")));
        };
        let len = u16::from_le_bytes(len.try_into().expect("2 bytes")) as usize;
        pos += 2;
        let Some(raw) = bytes.get(pos..pos + len) else {
            return Err(fmt(format!("truncated id at row {row}")));
        };
        let id = std::str::from_utf8(raw).map_err(|_| fmt(format!("row {row}: id is not UTF-8")))?;
        ids.push(Id::new(id));
        pos += len;
        let Some(raw) = bytes.get(pos..pos + 4 * dim) else {
            return Err(fmt(format!("truncated values at row {row}: header dim {dim}")));
        };
        values.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
        pos += 4 * dim;
    }
    if pos != bytes.len() {
        return Err(fmt(format!(
            "{} trailing bytes after {count} rows: rows do not match header dim {dim}",
            bytes.len() - pos
        )));
    }
    let matrix = Array2::from_shape_vec((count, dim), values).map_err(|e| fmt(e.to_string()))?;
    EmbeddingTable::new(ids, matrix)
}

pub fn save_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_embeddings(&mut buf, table)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    read_embeddings(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(
            vec!["a".into(), "bé".into(), "c:1".into()],
            Array2::from_shape_vec((3, 2), vec![1.0, -0.5, f32::MIN_POSITIVE, 3.25e7, 0.0, -0.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = table();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &t).unwrap();
        let back = read_embeddings(&buf).unwrap();
        assert_eq!(back.ids(), t.ids());
        let bits = |t: &EmbeddingTable| t.matrix().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn corrupt_magic() {
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &table()).unwrap();
        buf[1] = b'X';
        assert!(matches!(read_embeddings(&buf), Err(EmbedError::Format(_))));
    }

    #[test]
    fn dim_mismatch_with_header() {
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &table()).unwrap();
        // Claim dim 3 while rows carry 2 values.
        buf[4..8].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(read_embeddings(&buf), Err(EmbedError::Format(_))));
        // Claim dim 1: rows misparse and leave trailing bytes or bad ids.
        buf[4..8].copy_from_slice(&1u32.to_le_bytes());
        assert!(read_embeddings(&buf).is_err());
    }

    #[test]
    fn truncated_file() {
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &table()).unwrap();
        for cut in [3, 11, 14, buf.len() - 1] {
            assert!(read_embeddings(&buf[..cut]).is_err(), "cut {cut}");
        }
    }

    proptest! {
        #[test]
        fn arbitrary_tables_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e6f32..1e6, 3), 1..8)) {
            let ids: Vec<Id> = (0..rows.len()).map(|i| Id::new(format!("id{i}"))).collect();
            let n = rows.len();
            let t = EmbeddingTable::new(ids, Array2::from_shape_vec((n, 3), rows.concat()).unwrap()).unwrap();
            let mut buf = Vec::new();
            write_embeddings(&mut buf, &t).unwrap();
            prop_assert_eq!(read_embeddings(&buf).unwrap(), t);
        }
    }
}
