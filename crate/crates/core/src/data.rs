//! Price ingestion, log returns, realized volatility and daily feature panels.
//!
//! All returns are in percent: `100 * ln(close_t / close_{t-1})`. Monthly
//! macro series are forward-filled onto the trading-day axis.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub const CLOSE: &str = "close";
pub const LOG_RETURN: &str = "log_return";
pub const REALIZED_VOL: &str = "realized_vol";

fn check_increasing(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::validation(format!(
                "dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    close: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, close: Vec<f64>) -> Result<Self> {
        if dates.len() != close.len() {
            return Err(Error::Shape(format!(
                "{} dates vs {} prices",
                dates.len(),
                close.len()
            )));
        }
        if close.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: close.len(),
            });
        }
        check_increasing(&dates)?;
        if let Some((d, p)) = dates
            .iter()
            .zip(&close)
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::validation(format!("non-positive price {p} on {d}")));
        }
        Ok(Self { dates, close })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn close(&self) -> &[f64] {
        &self.close
    }

    pub fn len(&self) -> usize {
        self.close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} dates vs {} returns",
                dates.len(),
                values.len()
            )));
        }
        check_increasing(&dates)?;
        Ok(Self { dates, values })
    }

    /// Return series on a synthetic business-day calendar.
    pub fn from_values(values: Vec<f64>) -> Self {
        let dates = business_days(default_start(), values.len());
        Self { dates, values }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn head(&self, n: usize) -> ReturnSeries {
        ReturnSeries {
            dates: self.dates[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }
}

pub(crate) fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// `n` consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: prices.len(),
        });
    }
    let values = prices
        .close
        .windows(2)
        .map(|w| 100.0 * (w[1] / w[0]).ln())
        .collect();
    Ok(ReturnSeries {
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

/// Inverse of [`log_returns`]: compounds percent log returns from `start`.
pub fn compound_prices(start: f64, returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    let mut log_p = start.ln();
    out.push(start);
    for r in returns {
        log_p += r / 100.0;
        out.push(log_p.exp());
    }
    out
}

/// Root mean squared deviation of `returns[0..=t]` from their mean.
pub fn realized_volatility(returns: &ReturnSeries, t: usize) -> Result<f64> {
    if t == 0 || t >= returns.len() {
        return Err(Error::InsufficientData {
            needed: 2,
            got: (t + 1).min(returns.len()),
        });
    }
    let xs = &returns.values[..=t];
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let msd = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(msd.sqrt())
}

/// Expanding-window realized volatility for every index; NaN at index 0.
pub fn realized_volatility_series(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let n = (i + 1) as f64;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
        out.push(if i == 0 { f64::NAN } else { (m2 / n).max(0.0).sqrt() });
    }
    out
}

/// A named series on its own date axis. NaN marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedColumn {
    pub name: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DatedColumn {
    pub fn new(name: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            dates,
            values,
        }
    }
}

/// Column-name map for a delimited input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSchema {
    pub date: String,
    pub close: String,
    /// Explicit feature columns; `None` takes every other numeric column.
    pub features: Option<Vec<String>>,
    /// Columns never used as features (e.g. simulated ground truth).
    pub exclude: Vec<String>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            close: CLOSE.into(),
            features: None,
            exclude: vec!["state".into()],
        }
    }
}

/// A parsed delimited file: one date column plus numeric columns, sorted by
/// date with duplicates rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedTable {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl DatedTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

pub fn read_dated_table(path: &Path, date_column: &str) -> Result<DatedTable> {
    let file = std::fs::File::open(path)?;
    read_dated_table_from(file, path, date_column)
}

fn read_dated_table_from<R: Read>(reader: R, path: &Path, date_column: &str) -> Result<DatedTable> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| parse_err(1, format!("missing date column `{date_column}`")))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&rec[date_idx], DATE_FORMAT)
            .map_err(|e| parse_err(line, format!("bad date `{}`: {e}", &rec[date_idx])))?;
        let mut values = Vec::with_capacity(names.len());
        for (i, field) in rec.iter().enumerate() {
            if i == date_idx {
                continue;
            }
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("bad number `{field}`")))?
            };
            values.push(v);
        }
        rows.push((date, values));
    }
    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::validation(format!("duplicate date {}", w[0].0)));
    }
    let dates = rows.iter().map(|(d, _)| *d).collect();
    let columns = (0..names.len())
        .map(|j| rows.iter().map(|(_, v)| v[j]).collect())
        .collect();
    Ok(DatedTable {
        dates,
        names,
        columns,
    })
}

/// Reads a daily price file. Returns the close series and every remaining
/// feature column (missing cells as NaN) on the same date axis.
pub fn load_price_panel(path: &Path, schema: &PanelSchema) -> Result<(PriceSeries, Vec<DatedColumn>)> {
    let table = read_dated_table(path, &schema.date)?;
    price_panel_from_table(table, schema)
}

pub(crate) fn price_panel_from_table(
    table: DatedTable,
    schema: &PanelSchema,
) -> Result<(PriceSeries, Vec<DatedColumn>)> {
    let close = table
        .column(&schema.close)
        .ok_or_else(|| Error::validation(format!("missing price column `{}`", schema.close)))?
        .to_vec();
    let prices = PriceSeries::new(table.dates.clone(), close)?;
    let wanted: Vec<String> = match &schema.features {
        Some(f) => f.clone(),
        None => table
            .names
            .iter()
            .filter(|n| **n != schema.close && !schema.exclude.contains(n))
            .cloned()
            .collect(),
    };
    let mut features = Vec::with_capacity(wanted.len());
    for name in wanted {
        let values = table
            .column(&name)
            .ok_or_else(|| Error::validation(format!("missing feature column `{name}`")))?
            .to_vec();
        features.push(DatedColumn::new(name, table.dates.clone(), values));
    }
    Ok((prices, features))
}

/// Daily feature matrix on a single shared date axis, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FeaturePanel {
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} names vs {} columns",
                names.len(),
                columns.len()
            )));
        }
        check_increasing(&dates)?;
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != dates.len() {
                return Err(Error::Shape(format!(
                    "column `{name}` has {} rows, axis has {}",
                    col.len(),
                    dates.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "column `{name}` has a missing value on {}",
                    dates[i]
                )));
            }
        }
        let mut seen = HashMap::new();
        for n in &names {
            if seen.insert(n.as_str(), ()).is_some() {
                return Err(Error::validation(format!("duplicate column `{n}`")));
            }
        }
        Ok(Self {
            dates,
            names,
            columns,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|i| self.columns[i].as_slice())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn slice(&self, rows: Range<usize>) -> FeaturePanel {
        FeaturePanel {
            dates: self.dates[rows.clone()].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[rows.clone()].to_vec()).collect(),
        }
    }

    pub fn head(&self, n: usize) -> FeaturePanel {
        self.slice(0..n.min(self.n_rows()))
    }

    /// Appends the rows of `other`, which must share column names and
    /// continue the date axis.
    pub fn concat(&self, other: &FeaturePanel) -> Result<FeaturePanel> {
        if self.names != other.names {
            return Err(Error::Shape("column names differ".into()));
        }
        let mut dates = self.dates.clone();
        dates.extend_from_slice(&other.dates);
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        FeaturePanel::new(dates, self.names.clone(), columns)
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<FeaturePanel> {
        self.names.push(name.into());
        self.columns.push(values);
        FeaturePanel::new(self.dates, self.names, self.columns)
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeaturePanel> {
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            let i = self
                .column_index(n)
                .ok_or_else(|| Error::validation(format!("no column `{n}` in panel")))?;
            columns.push(self.columns[i].clone());
        }
        FeaturePanel::new(self.dates.clone(), names.to_vec(), columns)
    }

    /// Drops the named columns; names that are absent are ignored.
    pub fn without(&self, names: &[String]) -> FeaturePanel {
        let keep = self.names.iter().enumerate().filter(|(_, n)| !names.contains(n));
        let (names, columns) = keep.map(|(i, n)| (n.clone(), self.columns[i].clone())).unzip();
        FeaturePanel {
            dates: self.dates.clone(),
            names,
            columns,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.dates[i].format(DATE_FORMAT).to_string()];
            rec.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeaturePanel> {
        let t = read_dated_table(path, "date")?;
        FeaturePanel::new(t.dates, t.names, t.columns)
    }
}

/// Forward-fills every column onto the date axis of `daily[0]`.
///
/// Monthly columns must have an observation on or before the first daily
/// date. Daily rows that still hold a gap (leading NaNs, or a secondary
/// daily column that starts late) are dropped from the head.
pub fn align_panel(daily: &[DatedColumn], monthly: &[DatedColumn]) -> Result<FeaturePanel> {
    let base = daily
        .first()
        .ok_or_else(|| Error::validation("align_panel needs at least one daily column"))?;
    let axis = &base.dates;
    check_increasing(axis)?;
    if axis.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    for m in monthly {
        let first = m
            .dates
            .iter()
            .zip(&m.values)
            .find(|(_, v)| v.is_finite())
            .map(|(d, _)| *d);
        match first {
            Some(d) if d <= axis[0] => {}
            _ => {
                return Err(Error::Alignment {
                    column: m.name.clone(),
                    date: axis[0].to_string(),
                })
            }
        }
    }

    let mut names = Vec::new();
    let mut columns = Vec::new();
    for c in daily.iter().chain(monthly) {
        if c.dates.len() != c.values.len() {
            return Err(Error::Shape(format!("column `{}` dates/values differ", c.name)));
        }
        check_increasing(&c.dates)?;
        names.push(c.name.clone());
        columns.push(as_of_join(axis, c));
    }
    let start = (0..axis.len())
        .find(|&i| columns.iter().all(|c| c[i].is_finite()))
        .unwrap_or(axis.len());
    let columns = columns.into_iter().map(|c| c[start..].to_vec()).collect();
    FeaturePanel::new(axis[start..].to_vec(), names, columns)
}

/// Latest finite observation dated on or before each axis date.
fn as_of_join(axis: &[NaiveDate], col: &DatedColumn) -> Vec<f64> {
    let mut out = Vec::with_capacity(axis.len());
    let mut j = 0;
    let mut last = f64::NAN;
    for d in axis {
        while j < col.dates.len() && col.dates[j] <= *d {
            if col.values[j].is_finite() {
                last = col.values[j];
            }
            j += 1;
        }
        out.push(last);
    }
    out
}

/// Builds the daily panel used by the predictors: close, log return and
/// realized volatility followed by the given extra columns.
pub fn build_feature_panel(
    prices: &PriceSeries,
    extra_daily: &[DatedColumn],
    monthly: &[DatedColumn],
) -> Result<FeaturePanel> {
    let returns = log_returns(prices)?;
    let rv = realized_volatility_series(returns.values());
    let dates = returns.dates().to_vec();
    let mut daily = vec![
        DatedColumn::new(CLOSE, dates.clone(), prices.close()[1..].to_vec()),
        DatedColumn::new(LOG_RETURN, dates.clone(), returns.values().to_vec()),
        DatedColumn::new(REALIZED_VOL, dates, rv),
    ];
    daily.extend(extra_daily.iter().cloned());
    align_panel(&daily, monthly)
}

/// Per-column z-score transform with statistics from a fixed row range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Fits on `rows` of `columns`. Constant columns keep scale 1.
    pub fn fit(columns: &[Vec<f64>], rows: Range<usize>) -> Standardizer {
        let n = rows.len().max(1) as f64;
        let mut means = Vec::with_capacity(columns.len());
        let mut scales = Vec::with_capacity(columns.len());
        for c in columns {
            let xs = &c[rows.clone()];
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            means.push(mean);
            scales.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Standardizer { means, scales }
    }

    pub fn identity(n: usize) -> Standardizer {
        Standardizer {
            means: vec![0.0; n],
            scales: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.means).zip(&self.scales) {
            *x = (*x - m) / s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    fn prices(close: &[f64]) -> PriceSeries {
        PriceSeries::new(business_days(default_start(), close.len()), close.to_vec()).unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = write_tmp("date,close\n2018-01-01,100\n2018-01-02,101\n2018-01-03,102\n");
        let (p, feats) = load_price_panel(f.path(), &PanelSchema::default()).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.close(), &[100.0, 101.0, 102.0]);
        assert!(feats.is_empty());
    }

    #[test]
    fn duplicate_date_is_named() {
        let f = write_tmp("date,close\n2018-01-01,100\n2018-01-01,101\n2018-01-03,102\n");
        let err = load_price_panel(f.path(), &PanelSchema::default()).unwrap_err();
        assert!(err.to_string().contains("2018-01-01"), "{err}");
    }

    #[test]
    fn shuffled_rows_match_sorted() {
        let sorted = write_tmp("date,close,gold\n2018-01-01,100,1\n2018-01-02,101,2\n2018-01-03,102,3\n");
        let shuffled = write_tmp("date,close,gold\n2018-01-03,102,3\n2018-01-01,100,1\n2018-01-02,101,2\n");
        let a = load_price_panel(sorted.path(), &PanelSchema::default()).unwrap();
        let b = load_price_panel(shuffled.path(), &PanelSchema::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write_tmp("date,close\n2018-01-01,100\n2018-01-02,abc\n");
        match load_price_panel(f.path(), &PanelSchema::default()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_positive_price_rejected() {
        let f = write_tmp("date,close\n2018-01-01,100\n2018-01-02,0\n");
        assert!(matches!(
            load_price_panel(f.path(), &PanelSchema::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn log_return_examples() {
        assert_eq!(log_returns(&prices(&[100.0, 100.0])).unwrap().values(), &[0.0]);
        let r = log_returns(&prices(&[100.0, 100.0 * 0.01f64.exp()])).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-12);
        let r = log_returns(&prices(&[100.0, 110.0, 99.0])).unwrap();
        assert!((r.values()[0] - 9.531).abs() < 1e-3);
        assert!((r.values()[1] + 10.536).abs() < 1e-3);
        assert_eq!(r.dates().len(), 2);
    }

    #[test]
    fn short_price_series_rejected() {
        let err = PriceSeries::new(vec![d("2018-01-01")], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }

    #[test]
    fn realized_volatility_examples() {
        let rv = |v: &[f64], t| realized_volatility(&ReturnSeries::from_values(v.to_vec()), t);
        assert_eq!(rv(&[2.0, 2.0, 2.0], 2).unwrap(), 0.0);
        assert!((rv(&[1.0, -1.0], 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((rv(&[0.0, 0.0, 3.0], 2).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(rv(&[1.0, 2.0], 0), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn realized_volatility_series_matches_pointwise() {
        let v = vec![0.3, -1.2, 2.5, 0.0, 0.7, -0.4];
        let rs = ReturnSeries::from_values(v.clone());
        let series = realized_volatility_series(&v);
        assert!(series[0].is_nan());
        for t in 1..v.len() {
            assert!((series[t] - realized_volatility(&rs, t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn monthly_step_function() {
        let daily_dates: Vec<NaiveDate> = business_days(d("2018-01-02"), 30);
        let n = daily_dates.len();
        let daily = DatedColumn::new("close", daily_dates.clone(), vec![1.0; n]);
        let cpi = DatedColumn::new("cpi", vec![d("2018-01-01"), d("2018-02-01")], vec![95.0, 96.0]);
        let panel = align_panel(&[daily], &[cpi]).unwrap();
        let col = panel.column("cpi").unwrap();
        for (date, v) in panel.dates().iter().zip(col) {
            let expect = if *date < d("2018-02-01") { 95.0 } else { 96.0 };
            assert_eq!(*v, expect, "{date}");
        }
        assert_eq!(*panel.dates().last().unwrap(), d("2018-02-12"));
    }

    #[test]
    fn all_daily_is_identity() {
        let dates = business_days(d("2018-01-02"), 5);
        let a = DatedColumn::new("a", dates.clone(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = DatedColumn::new("b", dates.clone(), vec![5.0, 4.0, 3.0, 2.0, 1.0]);
        let panel = align_panel(&[a.clone(), b.clone()], &[]).unwrap();
        assert_eq!(panel.dates(), dates.as_slice());
        assert_eq!(panel.column("a").unwrap(), a.values.as_slice());
        assert_eq!(panel.column("b").unwrap(), b.values.as_slice());
    }

    #[test]
    fn daily_before_monthly_is_error() {
        let daily = DatedColumn::new("close", business_days(d("2017-12-20"), 10), vec![1.0; 10]);
        let cpi = DatedColumn::new("cpi", vec![d("2018-01-01")], vec![95.0]);
        match align_panel(&[daily], &[cpi]).unwrap_err() {
            Error::Alignment { column, .. } => assert_eq!(column, "cpi"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn leading_gaps_dropped_and_interior_forward_filled() {
        let dates = business_days(d("2018-01-02"), 5);
        let a = DatedColumn::new("a", dates.clone(), vec![f64::NAN, 2.0, 3.0, f64::NAN, 5.0]);
        let panel = align_panel(&[a], &[]).unwrap();
        assert_eq!(panel.n_rows(), 4);
        assert_eq!(panel.column("a").unwrap(), &[2.0, 3.0, 3.0, 5.0]);
    }

    #[test]
    fn feature_panel_drops_first_return_row() {
        let p = prices(&[100.0, 101.0, 99.0, 102.0, 103.0]);
        let panel = build_feature_panel(&p, &[], &[]).unwrap();
        assert_eq!(panel.n_rows(), 3);
        assert_eq!(panel.names(), &[CLOSE, LOG_RETURN, REALIZED_VOL]);
        assert_eq!(panel.column(CLOSE).unwrap(), &[99.0, 102.0, 103.0]);
    }

    #[test]
    fn panel_csv_round_trip() {
        let p = prices(&[100.0, 101.0, 99.0, 102.0, 103.0, 101.5]);
        let panel = build_feature_panel(&p, &[], &[]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        panel.write_csv(std::fs::File::create(f.path()).unwrap()).unwrap();
        assert_eq!(FeaturePanel::read_csv(f.path()).unwrap(), panel);
    }

    #[test]
    fn standardizer_uses_given_rows_only() {
        let cols = vec![vec![1.0, 3.0, 100.0], vec![7.0, 7.0, 7.0]];
        let s = Standardizer::fit(&cols, 0..2);
        assert_eq!(s.means, vec![2.0, 7.0]);
        assert_eq!(s.scales, vec![1.0, 1.0]);
        let mut row = vec![3.0, 8.0];
        s.apply(&mut row);
        assert_eq!(row, vec![1.0, 1.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn compounding_inverts_log_returns(rs in proptest::collection::vec(-10.0f64..10.0, 1..60)) {
                let closes = compound_prices(100.0, &rs);
                let back = log_returns(&prices(&closes)).unwrap();
                for (a, b) in back.values().iter().zip(&rs) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }

            #[test]
            fn realized_volatility_shift_invariant(
                rs in proptest::collection::vec(-5.0f64..5.0, 2..40),
                shift in -100.0f64..100.0,
            ) {
                let t = rs.len() - 1;
                let a = realized_volatility(&ReturnSeries::from_values(rs.clone()), t).unwrap();
                let shifted: Vec<f64> = rs.iter().map(|x| x + shift).collect();
                let b = realized_volatility(&ReturnSeries::from_values(shifted), t).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }

            #[test]
            fn aligned_panel_has_no_gaps(
                vals in proptest::collection::vec(proptest::option::of(-5.0f64..5.0), 3..40),
                monthly_offset in 0usize..3,
            ) {
                let dates = business_days(d("2018-01-02"), vals.len());
                let a = DatedColumn::new("a", dates.clone(),
                    vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect());
                let m_dates: Vec<NaiveDate> = (0..4)
                    .map(|k| d("2017-12-01") + Duration::days(30 * k as i64 + monthly_offset as i64))
                    .collect();
                let m = DatedColumn::new("m", m_dates, vec![1.0, 2.0, 3.0, 4.0]);
                if let Ok(panel) = align_panel(&[a], &[m]) {
                    for i in 0..panel.n_rows() {
                        prop_assert!(panel.row(i).iter().all(|v| v.is_finite()));
                    }
                    prop_assert_eq!(panel.column("a").unwrap().len(), panel.n_rows());
                }
            }
        }
    }
}
