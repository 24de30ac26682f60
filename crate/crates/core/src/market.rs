//! Market representations: price-relative sequences, windows onto them,
//! CSV ingestion and the synthetic generators used as exact oracles.
//!
//! Rows are stored 0-based internally; periods exposed through
//! [`MarketWindow`] are 1-based, matching how reports number them.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, OlpsError, Result};

/// An n x m matrix of gross per-period returns `x[t][i] = close_t / close_{t-1}`.
///
/// Immutable after construction, so one sequence can back any number of
/// concurrent backtests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRelatives {
    data: Vec<f64>,
    n: usize,
    m: usize,
    asset_names: Option<Vec<String>>,
}

impl PriceRelatives {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || m == 0 {
            return Err(OlpsError::Shape(
                "a market needs at least one period and one asset".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * m);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(OlpsError::Shape(format!(
                    "row {} has {} entries, expected {}",
                    t + 1,
                    row.len(),
                    m
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                check_positive(v, t + 1, i + 1)?;
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            n: rows.len(),
            m,
            asset_names: None,
        })
    }

    pub fn with_asset_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m {
            return Err(OlpsError::Shape(format!(
                "{} asset names for {} assets",
                names.len(),
                self.m
            )));
        }
        self.asset_names = Some(names);
        Ok(self)
    }

    /// Converts a price table (one row per period) into relatives.
    pub fn from_prices(prices: &[Vec<f64>]) -> Result<Self> {
        if prices.len() < 2 {
            return Err(OlpsError::Shape(
                "a price table needs at least two rows".into(),
            ));
        }
        let m = prices[0].len();
        let mut rows = Vec::with_capacity(prices.len() - 1);
        for (t, pair) in prices.windows(2).enumerate() {
            let (prev, cur) = (&pair[0], &pair[1]);
            if cur.len() != m {
                return Err(OlpsError::Shape(format!(
                    "row {} has {} entries, expected {}",
                    t + 2,
                    cur.len(),
                    m
                )));
            }
            rows.push(prev.iter().zip(cur).map(|(p0, p1)| p1 / p0).collect());
        }
        for (t, row) in prices.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                check_positive(v, t + 1, i + 1)?;
            }
        }
        Self::new(rows)
    }

    /// Appends one period.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.m {
            return Err(OlpsError::Shape(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.m
            )));
        }
        for (i, &v) in row.iter().enumerate() {
            check_positive(v, self.n + 1, i + 1)?;
        }
        self.data.extend_from_slice(row);
        self.n += 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn asset_names(&self) -> Option<&[String]> {
        self.asset_names.as_deref()
    }

    /// Row by 0-based index.
    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.m..(idx + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.m)
    }

    /// Periods `start..=end` (1-based).
    pub fn window(&self, start: usize, end: usize) -> Result<MarketWindow<'_>> {
        if start < 1 || start > end || end > self.n {
            return Err(argument(format!(
                "window [{start}, {end}] outside 1..={}",
                self.n
            )));
        }
        Ok(MarketWindow {
            seq: self,
            start,
            end,
        })
    }

    /// The first `len` periods, `x_1..x_len`. `len == 0` yields an empty history.
    pub fn prefix(&self, len: usize) -> MarketWindow<'_> {
        assert!(len <= self.n, "prefix {len} longer than market {}", self.n);
        MarketWindow {
            seq: self,
            start: 1,
            end: len,
        }
    }

    pub fn full(&self) -> MarketWindow<'_> {
        self.prefix(self.n)
    }

    /// A copy holding only the first `len` periods.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.n {
            return Err(argument(format!("cannot truncate to {len} periods")));
        }
        Ok(Self {
            data: self.data[..len * self.m].to_vec(),
            n: len,
            m: self.m,
            asset_names: self.asset_names.clone(),
        })
    }

    /// A copy with rows reordered by `order` (a permutation of `0..n`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if order.len() != self.n {
            return Err(argument("permutation length differs from period count"));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &idx in order {
            if idx >= self.n || std::mem::replace(&mut seen[idx], true) {
                return Err(argument("not a permutation of the periods"));
            }
            data.extend_from_slice(self.row(idx));
        }
        Ok(Self {
            data,
            n: self.n,
            m: self.m,
            asset_names: self.asset_names.clone(),
        })
    }

    /// Cumulative product of each column (the wealth of each single-asset
    /// buy-and-hold).
    pub fn column_products(&self) -> Vec<f64> {
        let mut acc = vec![1.0; self.m];
        for row in self.rows() {
            for (a, x) in acc.iter_mut().zip(row) {
                *a *= x;
            }
        }
        acc
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if let Some(names) = &self.asset_names {
            w.write_record(names).map_err(csv_io)?;
        }
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn check_positive(v: f64, row: usize, column: usize) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(OlpsError::Parse {
            row,
            column,
            message: format!("value {v} is not a finite positive number"),
        })
    }
}

fn csv_io(e: csv::Error) -> OlpsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => OlpsError::Io(io),
        other => OlpsError::Numeric(format!("csv writer: {other:?}")),
    }
}

/// A contiguous run of periods `start..=end` (1-based) of a sequence.
///
/// Histories handed to strategies are prefixes `x_1..x_t`; a prefix of
/// length zero is the empty history before the first period.
#[derive(Debug, Clone, Copy)]
pub struct MarketWindow<'a> {
    seq: &'a PriceRelatives,
    start: usize,
    end: usize,
}

impl<'a> MarketWindow<'a> {
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m(&self) -> usize {
        self.seq.m
    }

    /// Price relative of period `t` (1-based, absolute period index).
    pub fn period(&self, t: usize) -> &'a [f64] {
        assert!(
            t >= self.start && t <= self.end,
            "period {t} outside window [{}, {}]",
            self.start,
            self.end
        );
        self.seq.row(t - 1)
    }

    pub fn last(&self) -> Option<&'a [f64]> {
        (!self.is_empty()).then(|| self.seq.row(self.end - 1))
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &'a [f64]> + ExactSizeIterator + 'a {
        let seq = self.seq;
        (self.start..self.end + 1).map(move |t| seq.row(t - 1))
    }

    /// The last `k` rows of the window (all rows when fewer exist).
    pub fn tail(&self, k: usize) -> MarketWindow<'a> {
        let k = k.min(self.len());
        MarketWindow {
            seq: self.seq,
            start: self.end + 1 - k,
            end: self.end,
        }
    }

    /// Periods `start..=end` of the same underlying sequence.
    pub fn sub(&self, start: usize, end: usize) -> MarketWindow<'a> {
        assert!(start >= self.start && end <= self.end && start <= end + 1);
        MarketWindow {
            seq: self.seq,
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Relatives,
    Prices,
}

pub fn load_price_relatives(
    path: impl AsRef<Path>,
    format: FileFormat,
    has_header: bool,
) -> Result<PriceRelatives> {
    let file = std::fs::File::open(path)?;
    read_price_relatives(file, format, has_header)
}

pub fn read_price_relatives<R: Read>(
    reader: R,
    format: FileFormat,
    has_header: bool,
) -> Result<PriceRelatives> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let names = if has_header {
        let header = rdr.headers().map_err(|e| csv_parse(e, 1))?;
        Some(header.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row_no = idx + 1;
        let record = record.map_err(|e| csv_parse(e, row_no))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| OlpsError::Parse {
                row: row_no,
                column: col + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            check_positive(v, row_no, col + 1)?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(OlpsError::Shape(format!(
                    "row {row_no} has {} columns, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }

    let seq = match format {
        FileFormat::Relatives => PriceRelatives::new(rows)?,
        FileFormat::Prices => PriceRelatives::from_prices(&rows)?,
    };
    match names {
        Some(names) if names.len() == seq.m() => seq.with_asset_names(names),
        Some(names) => Err(OlpsError::Shape(format!(
            "header has {} names for {} columns",
            names.len(),
            seq.m()
        ))),
        None => Ok(seq),
    }
}

fn csv_parse(e: csv::Error, row: usize) -> OlpsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => OlpsError::Io(io),
        other => OlpsError::Parse {
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Cash alongside an asset alternating between doubling
/// and halving, `(1,2), (1,1/2), (1,2), ...`.
pub fn synthetic_cg86(n: usize) -> Result<PriceRelatives> {
    if n == 0 {
        return Err(argument("period count must be at least 1"));
    }
    let rows = (1..=n)
        .map(|t| if t % 2 == 1 { vec![1.0, 2.0] } else { vec![1.0, 0.5] })
        .collect();
    PriceRelatives::new(rows)
}

/// I.i.d. uniform relatives in `[low, high]`, reproducible from `seed`.
pub fn synthetic_iid(m: usize, n: usize, seed: u64, low: f64, high: f64) -> Result<PriceRelatives> {
    if m == 0 || n == 0 {
        return Err(argument("asset and period counts must be at least 1"));
    }
    if !(low > 0.0) || !(high >= low) || !high.is_finite() {
        return Err(argument(format!("need 0 < low <= high, got [{low}, {high}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| low + (high - low) * rng.random::<f64>())
                .collect()
        })
        .collect();
    PriceRelatives::new(rows)
}
