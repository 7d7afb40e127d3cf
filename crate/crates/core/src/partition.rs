//! Element ingestion and block partitioning.
//!
//! Three input formats are understood:
//!
//! * `csv`: one element per row, comma-separated decimal features.
//! * `bin`: two little-endian `u64` (`n`, `dim`) followed by `n * dim`
//!   little-endian `f64`, row-major.
//! * `count`: a single decimal integer `n`; no feature values.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Bin,
    Count,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "bin" | "binary-matrix" => Ok(Format::Bin),
            "count" | "index-only" => Ok(Format::Count),
            other => Err(Error::Config(format!("unknown format {other:?} (csv|bin|count)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Bin => "bin",
            Format::Count => "count",
        })
    }
}

/// `n` elements, each either a row of `dim` finite features or, in
/// index-only mode, just an index.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementTable {
    n: usize,
    dim: usize,
    values: Option<Vec<f64>>,
}

impl ElementTable {
    pub fn index_only(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("element count must be at least 1".into()));
        }
        Ok(Self { n, dim: 0, values: None })
    }

    /// Row-major values; `values.len()` must be a multiple of `dim`.
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values cannot form rows of width {dim}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ingest(
                format!("row {}", i / dim + 1),
                format!("non-finite value {}", values[i]),
            ));
        }
        Ok(Self {
            n: values.len() / dim,
            dim,
            values: Some(values),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_values(&self) -> bool {
        self.values.is_some()
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    /// Features of element `i`. Panics in index-only mode.
    pub fn row(&self, i: usize) -> &[f64] {
        let values = self.values.as_ref().expect("index-only table has no rows");
        &values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ingest(path: impl AsRef<Path>, format: Format) -> Result<Self> {
        let path = path.as_ref();
        match format {
            Format::Csv => Self::parse_csv(fs::File::open(path)?),
            Format::Bin => Self::parse_binary(&fs::read(path)?),
            Format::Count => Self::parse_count(&fs::read_to_string(path)?),
        }
    }

    pub fn parse_csv(reader: impl io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = None;
        let mut values = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record.map_err(|e| Error::ingest(format!("row {row}"), e.to_string()))?;
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            let width = *dim.get_or_insert(record.len());
            if record.len() != width {
                return Err(Error::ingest(
                    format!("row {row}"),
                    format!("expected {width} columns, found {}", record.len()),
                ));
            }
            for (c, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::ingest(format!("row {row}, column {}", c + 1), format!("not a number: {cell:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::ingest(
                        format!("row {row}, column {}", c + 1),
                        format!("non-finite value {cell}"),
                    ));
                }
                values.push(v);
            }
        }
        let Some(dim) = dim else {
            return Err(Error::ingest("row 1", "no elements"));
        };
        Self::from_rows(dim, values)
    }

    pub fn parse_binary(bytes: &[u8]) -> Result<Self> {
        let (n, dim, values) = read_matrix(bytes)?;
        if n == 0 {
            return Err(Error::ingest("header", "element count must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::ingest("header", "dim must be at least 1"));
        }
        Self::from_rows(dim, values)
    }

    pub fn parse_count(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let n: usize = trimmed
            .parse()
            .map_err(|_| Error::ingest("line 1", format!("expected an element count, found {trimmed:?}")))?;
        Self::index_only(n).map_err(|_| Error::ingest("line 1", "element count must be at least 1"))
    }

    /// Writes the table in `bin` layout. Index-only tables have nothing to write.
    pub fn write_binary(&self, out: impl Write) -> Result<()> {
        let values = self
            .values
            .as_deref()
            .ok_or_else(|| Error::Config("index-only table has no values to export".into()))?;
        write_matrix(out, self.n, self.dim, values)
    }
}

/// Writes `rows x cols` row-major values in the `bin` layout.
pub fn write_matrix(mut out: impl Write, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    debug_assert_eq!(values.len(), rows * cols);
    let mut buf = Vec::with_capacity(16 + 8 * values.len());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Parses the `bin` layout into `(rows, cols, values)` without
/// interpreting the contents.
pub fn read_matrix(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 16 {
        return Err(Error::ingest(
            "header",
            format!("truncated header: {} of 16 bytes", bytes.len()),
        ));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(0), word(8));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::ingest("header", format!("{rows} x {cols} is too large")))?;
    let payload = &bytes[16..];
    let have = payload.len() / 8;
    if have < count {
        return Err(Error::ingest(
            format!("byte {}", bytes.len()),
            format!("truncated payload: {have} of {count} values"),
        ));
    }
    if payload.len() != count * 8 {
        return Err(Error::ingest(
            format!("byte {}", 16 + count * 8),
            format!("{} trailing bytes", payload.len() - count * 8),
        ));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((rows as usize, cols as usize, values))
}

/// `n` element indices split into `p` contiguous blocks whose sizes differ by
/// at most one. Block `b` is `boundaries[b]..boundaries[b + 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    boundaries: Vec<usize>,
}

impl Partition {
    /// The first `n mod p` blocks get `ceil(n/p)` elements, the rest
    /// `floor(n/p)`. Empty blocks are not allowed, so `p > n` is an error.
    pub fn split(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!("cannot split n={n} into p={p} blocks")));
        }
        if p > n {
            return Err(Error::InvalidInput(format!(
                "p={p} exceeds n={n}; every block needs at least one element"
            )));
        }
        let (base, extra) = (n / p, n % p);
        let mut boundaries = Vec::with_capacity(p + 1);
        boundaries.push(0);
        let mut at = 0;
        for b in 0..p {
            at += base + usize::from(b < extra);
            boundaries.push(at);
        }
        Ok(Self { boundaries })
    }

    pub fn p(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn n(&self) -> usize {
        *self.boundaries.last().expect("at least two boundaries")
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn block(&self, b: usize) -> Range<usize> {
        self.boundaries[b]..self.boundaries[b + 1]
    }

    pub fn block_len(&self, b: usize) -> usize {
        self.boundaries[b + 1] - self.boundaries[b]
    }

    pub fn max_block_len(&self) -> usize {
        (0..self.p()).map(|b| self.block_len(b)).max().unwrap_or(0)
    }

    /// Number of element pairs in block pair `(j, k)`: intra-block pairs
    /// when `j == k`, the full cross product otherwise.
    pub fn pair_cost(&self, j: usize, k: usize) -> u64 {
        let (a, b) = (self.block_len(j) as u64, self.block_len(k) as u64);
        if j == k {
            a * a.saturating_sub(1) / 2
        } else {
            a * b
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(p: &Partition) -> Vec<usize> {
        (0..p.p()).map(|b| p.block_len(b)).collect()
    }

    #[test]
    fn split_examples() {
        let p = Partition::split(7, 3).unwrap();
        assert_eq!(p.boundaries(), &[0, 3, 5, 7]);
        assert_eq!(sizes(&Partition::split(8, 4).unwrap()), vec![2, 2, 2, 2]);
        assert_eq!(sizes(&Partition::split(5, 5).unwrap()), vec![1; 5]);
    }

    #[test]
    fn split_rejects_empty_blocks() {
        assert!(Partition::split(3, 4).is_err());
        assert!(Partition::split(0, 1).is_err());
        assert!(Partition::split(3, 0).is_err());
    }

    #[test]
    fn csv_examples() {
        let t = ElementTable::parse_csv("1,2\n3,4\n5,6".as_bytes()).unwrap();
        assert_eq!((t.n(), t.dim()), (3, 2));
        assert_eq!(t.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_errors_carry_location() {
        let ragged = ElementTable::parse_csv("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(ragged.to_string().contains("row 2"), "{ragged}");

        let text = ElementTable::parse_csv("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(text.to_string().contains("row 2, column 2"), "{text}");

        let nan = ElementTable::parse_csv("1,2\nNaN,4\n".as_bytes()).unwrap_err();
        assert!(nan.to_string().contains("row 2, column 1"), "{nan}");

        let inf = ElementTable::parse_csv("inf,2\n".as_bytes()).unwrap_err();
        assert!(matches!(inf, Error::Ingest { .. }));

        assert!(ElementTable::parse_csv("".as_bytes()).is_err());
    }

    #[test]
    fn count_examples() {
        let t = ElementTable::parse_count("100\n").unwrap();
        assert_eq!(t.n(), 100);
        assert!(!t.has_values());
        assert!(ElementTable::parse_count("0").is_err());
        assert!(ElementTable::parse_count("ten").is_err());
    }

    #[test]
    fn binary_truncation() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&3u64.to_le_bytes());
        for v in 0..5 {
            bytes.extend_from_slice(&(v as f64).to_le_bytes());
        }
        let err = ElementTable::parse_binary(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated payload: 5 of 6"), "{err}");
        assert!(ElementTable::parse_binary(&bytes[..10]).is_err());
    }

    #[test]
    fn binary_layout_is_exact() {
        let t = ElementTable::from_rows(2, vec![1.0, -2.5, 3.0, 4.0]).unwrap();
        let mut bytes = Vec::new();
        t.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 32);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.5f64).to_le_bytes());
    }

    #[test]
    fn binary_rejects_non_finite() {
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, 1, 2, &[1.0, f64::NAN]).unwrap();
        assert!(ElementTable::parse_binary(&bytes).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_near_equal_and_exhaustive(n in 1usize..5000, p in 1usize..200) {
                prop_assume!(p <= n);
                let part = Partition::split(n, p).unwrap();
                let sizes: Vec<usize> = (0..p).map(|b| part.block_len(b)).collect();
                prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                prop_assert!(part.boundaries().windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(part.boundaries()[0], 0);
            }

            #[test]
            fn csv_to_binary_round_trip(
                rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..20)
            ) {
                let text: String = rows
                    .iter()
                    .map(|r| r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",") + "\n")
                    .collect();
                let table = ElementTable::parse_csv(text.as_bytes()).unwrap();
                let mut bytes = Vec::new();
                table.write_binary(&mut bytes).unwrap();
                prop_assert_eq!(ElementTable::parse_binary(&bytes).unwrap(), table);
            }
        }
    }
}
