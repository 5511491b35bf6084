//! Sparse ternary user × item matrix.
//!
//! Entries are `0`, `1` or erased. Only unerased entries are stored; a missing
//! `(row, col)` pair is an erasure. The matrix keeps both a row-major and a
//! column-major index so that row similarities can be accumulated column by column.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{check_index, Error, Result};

/// Unerased entries of one row (or one column), sorted by index.
#[derive(Debug, Clone, Copy)]
pub struct Line<'a> {
    pub indices: &'a [u32],
    pub bits: &'a [bool],
}

impl<'a> Line<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + 'a {
        self.indices
            .iter()
            .zip(self.bits.iter())
            .map(|(&i, &b)| (i as usize, b))
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.indices
            .binary_search(&(index as u32))
            .ok()
            .map(|pos| self.bits[pos])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Compressed {
    ptr: Vec<usize>,
    indices: Vec<u32>,
    bits: Vec<bool>,
}

impl Compressed {
    fn line(&self, i: usize) -> Line<'_> {
        let range = self.ptr[i]..self.ptr[i + 1];
        Line {
            indices: &self.indices[range.clone()],
            bits: &self.bits[range],
        }
    }

    /// Transposes a compressed layout with `outer` lines and `inner` positions.
    fn transpose(&self, outer: usize, inner: usize) -> Compressed {
        let mut counts = vec![0usize; inner + 1];
        for &j in &self.indices {
            counts[j as usize + 1] += 1;
        }
        for j in 0..inner {
            counts[j + 1] += counts[j];
        }
        let ptr = counts.clone();
        let mut next = counts;
        let nnz = self.indices.len();
        let mut indices = vec![0u32; nnz];
        let mut bits = vec![false; nnz];
        for i in 0..outer {
            for pos in self.ptr[i]..self.ptr[i + 1] {
                let j = self.indices[pos] as usize;
                let dst = next[j];
                indices[dst] = i as u32;
                bits[dst] = self.bits[pos];
                next[j] += 1;
            }
        }
        Compressed { ptr, indices, bits }
    }
}

/// Sparse matrix over `{0, 1, erased}`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Compressed,
    cols: Compressed,
}

/// Builds an [`ObservedMatrix`] one row at a time, columns strictly increasing.
#[derive(Debug)]
pub struct RowBuilder {
    n_rows: usize,
    n_cols: usize,
    ptr: Vec<usize>,
    indices: Vec<u32>,
    bits: Vec<bool>,
}

impl RowBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        let mut ptr = Vec::with_capacity(n_rows + 1);
        ptr.push(0);
        RowBuilder {
            n_rows,
            n_cols,
            ptr,
            indices: Vec::new(),
            bits: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, nnz: usize) -> Self {
        let mut b = Self::new(n_rows, n_cols);
        b.indices.reserve(nnz);
        b.bits.reserve(nnz);
        b
    }

    /// Rows already closed.
    pub fn current_row(&self) -> usize {
        self.ptr.len() - 1
    }

    /// Appends an entry to the current row. Columns must be pushed in increasing order.
    #[inline]
    pub fn push(&mut self, col: usize, bit: bool) {
        debug_assert!(col < self.n_cols);
        debug_assert!(
            self.indices.len() == *self.ptr.last().unwrap()
                || (*self.indices.last().unwrap() as usize) < col
        );
        self.indices.push(col as u32);
        self.bits.push(bit);
    }

    pub fn end_row(&mut self) {
        self.ptr.push(self.indices.len());
    }

    pub fn finish(mut self) -> ObservedMatrix {
        while self.ptr.len() < self.n_rows + 1 {
            self.end_row();
        }
        assert_eq!(self.ptr.len(), self.n_rows + 1, "too many rows pushed");
        let rows = Compressed {
            ptr: self.ptr,
            indices: self.indices,
            bits: self.bits,
        };
        let cols = rows.transpose(self.n_rows, self.n_cols);
        ObservedMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            rows,
            cols,
        }
    }
}

impl ObservedMatrix {
    /// Fully erased matrix.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        RowBuilder::new(n_rows, n_cols).finish()
    }

    /// Builds a matrix from arbitrary `(row, col, bit)` triples. A repeated pair keeps
    /// its last value.
    pub fn from_entries<I>(n_rows: usize, n_cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, bool)>,
    {
        let mut triples: Vec<(usize, usize, usize, bool)> = Vec::new();
        for (seq, (r, c, b)) in entries.into_iter().enumerate() {
            check_index("row", r, n_rows)?;
            check_index("column", c, n_cols)?;
            triples.push((r, c, seq, b));
        }
        triples.sort_unstable_by_key(|&(r, c, seq, _)| (r, c, std::cmp::Reverse(seq)));
        triples.dedup_by_key(|t| (t.0, t.1));
        let mut builder = RowBuilder::with_capacity(n_rows, n_cols, triples.len());
        let mut iter = triples.into_iter().peekable();
        for r in 0..n_rows {
            while let Some(&(row, c, _, b)) = iter.peek() {
                if row != r {
                    break;
                }
                builder.push(c, b);
                iter.next();
            }
            builder.end_row();
        }
        Ok(builder.finish())
    }

    /// Builds a matrix from a dense grid where `None` means erased.
    pub fn from_dense(rows: &[Vec<Option<bool>>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut builder = RowBuilder::new(n_rows, n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::Parameter("ragged dense matrix".into()));
            }
            for (c, v) in row.iter().enumerate() {
                if let Some(b) = v {
                    builder.push(c, *b);
                }
            }
            builder.end_row();
        }
        Ok(builder.finish())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of unerased entries.
    pub fn nnz(&self) -> usize {
        self.rows.indices.len()
    }

    /// Total lookup: `Some(bit)` for an observed entry, `None` for an erasure.
    pub fn get(&self, row: usize, col: usize) -> Result<Option<bool>> {
        check_index("row", row, self.n_rows)?;
        check_index("column", col, self.n_cols)?;
        Ok(self.rows.line(row).get(col))
    }

    pub fn is_erased(&self, row: usize, col: usize) -> Result<bool> {
        Ok(self.get(row, col)?.is_none())
    }

    /// Panics if `row` is out of range.
    pub fn row(&self, row: usize) -> Line<'_> {
        self.rows.line(row)
    }

    /// Panics if `col` is out of range.
    pub fn col(&self, col: usize) -> Line<'_> {
        self.cols.line(col)
    }

    /// Columns erased in `row`, in increasing order.
    pub fn erased_in_row(&self, row: usize) -> Result<Vec<usize>> {
        check_index("row", row, self.n_rows)?;
        let line = self.row(row);
        let mut observed = line.indices.iter().peekable();
        let mut out = Vec::with_capacity(self.n_cols - line.len());
        for c in 0..self.n_cols {
            if observed.peek() == Some(&&(c as u32)) {
                observed.next();
            } else {
                out.push(c);
            }
        }
        Ok(out)
    }

    /// Swaps the roles of rows and columns.
    pub fn transpose(&self) -> ObservedMatrix {
        ObservedMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).iter().map(move |(c, b)| (r, c, b)))
    }

    /// Writes the text format: a `n_rows n_cols` header, then `row col bit` per entry.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n_rows, self.n_cols)?;
        let mut buf = String::new();
        for r in 0..self.n_rows {
            buf.clear();
            for (c, b) in self.row(r).iter() {
                let _ = writeln!(buf, "{} {} {}", r, c, b as u8);
            }
            w.write_all(buf.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_text(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("ascii")
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (n_rows, n_cols) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                });
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(i + 1, "header must be `n_rows n_cols`"));
            }
            break (parse_field(fields[0], i + 1)?, parse_field(fields[1], i + 1)?);
        };
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(i + 1, "entry must be `row col bit`"));
            }
            let r = parse_field(fields[0], i + 1)?;
            let c = parse_field(fields[1], i + 1)?;
            let b = match fields[2] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(i + 1, &format!("bit must be 0 or 1, got {other}"))),
            };
            if r >= n_rows || c >= n_cols {
                return Err(parse_err(i + 1, "entry outside matrix"));
            }
            entries.push((r, c, b));
        }
        Self::from_entries(n_rows, n_cols, entries)
    }
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn parse_field(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("expected a non-negative integer, got {s:?}")))
}
