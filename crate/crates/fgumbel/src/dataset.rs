//! CSV ingestion. Selected columns must be fully numeric: missing or
//! unparsable cells are rejected with their row numbers, never imputed or
//! dropped.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use fgumbel_core::{DataSample, Matrix, Source};

use crate::error::{AppError, AppResult};

/// Cap on how many offending rows an error message lists.
const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    source: Option<PathBuf>,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    units: BTreeMap<String, String>,
}

impl Dataset {
    pub fn from_path(path: &Path) -> AppResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        let mut ds = Self::from_reader(file)?;
        ds.source = Some(path.to_path_buf());
        Ok(ds)
    }

    /// Header row required; lines starting with `#` are comments.
    pub fn from_reader<R: Read>(reader: R) -> AppResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(AppError::Data("missing header row".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Dataset { source: None, headers, rows, units: BTreeMap::new() })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn set_units(&mut self, column: &str, units: &str) {
        self.units.insert(column.to_string(), units.to_string());
    }

    pub fn units(&self, column: &str) -> Option<&str> {
        self.units.get(column).map(String::as_str)
    }

    fn index(&self, name: &str) -> AppResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Data(format!("column '{name}' not found; available: {}", self.headers.join(", "))))
    }

    /// Raw text of a column.
    pub fn text_column(&self, name: &str) -> AppResult<Vec<&str>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r.get(j).map(String::as_str).unwrap_or("")).collect())
    }

    /// Numeric column. Data rows are numbered from 1 in error messages.
    pub fn numeric_column(&self, name: &str) -> AppResult<Vec<f64>> {
        let text = self.text_column(name)?;
        let mut out = Vec::with_capacity(text.len());
        let mut bad = Vec::new();
        for (i, cell) in text.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => bad.push((i + 1, *cell)),
            }
        }
        if !bad.is_empty() {
            let listed: Vec<String> = bad
                .iter()
                .take(MAX_LISTED)
                .map(|(r, c)| if c.is_empty() { format!("row {r} (missing)") } else { format!("row {r} ('{c}')") })
                .collect();
            let more = if bad.len() > MAX_LISTED { format!(" and {} more", bad.len() - MAX_LISTED) } else { String::new() };
            return Err(AppError::Data(format!(
                "column '{name}' has {} non-numeric or missing entries: {}{more}",
                bad.len(),
                listed.join(", ")
            )));
        }
        Ok(out)
    }

    pub fn sample(&self, column: &str) -> AppResult<DataSample> {
        let values = self.numeric_column(column)?;
        let source = match &self.source {
            Some(p) => Source::File { path: p.display().to_string(), column: column.to_string() },
            None => Source::Other(format!("column {column}")),
        };
        Ok(DataSample::new(values, source)?)
    }

    /// Design matrix with a leading intercept column, and the response.
    pub fn design(&self, response: &str, covariates: &[String]) -> AppResult<(Matrix, Vec<f64>, Vec<String>)> {
        if let Some(c) = covariates.iter().find(|c| c.as_str() == response) {
            return Err(AppError::Data(format!("response '{c}' also listed as a covariate")));
        }
        let y = self.numeric_column(response)?;
        let cols: Vec<Vec<f64>> = covariates.iter().map(|c| self.numeric_column(c)).collect::<AppResult<_>>()?;
        let rows: Vec<Vec<f64>> = (0..y.len())
            .map(|i| std::iter::once(1.0).chain(cols.iter().map(|c| c[i])).collect())
            .collect();
        let mut names = vec!["intercept".to_string()];
        names.extend(covariates.iter().cloned());
        let x = if rows.is_empty() { Matrix::zeros(0, names.len()) } else { Matrix::from_rows(&rows) };
        Ok((x, y, names))
    }
}

/// One day of the derived elevation-change series.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyChange {
    pub date: String,
    pub change: f64,
}

/// Daily max-minus-min gauge elevation, positive when the day's maximum is
/// recorded after its minimum and negative when before.
///
/// `time_column` holds timestamps `YYYY-MM-DD[ T]hh:mm[:ss]` in a single
/// time zone; readings within a day are ordered by timestamp. The first
/// occurrence wins when the extreme value repeats.
pub fn elevation_change(ds: &Dataset, time_column: &str, value_column: &str) -> AppResult<Vec<DailyChange>> {
    let times = ds.text_column(time_column)?;
    let values = ds.numeric_column(value_column)?;
    let mut bad = Vec::new();
    let mut days: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (i, (t, v)) in times.iter().zip(&values).enumerate() {
        if !valid_timestamp(t) {
            bad.push(i + 1);
            continue;
        }
        days.entry(&t[..10]).or_default().push((&t[10..], *v));
    }
    if !bad.is_empty() {
        let listed: Vec<String> = bad.iter().take(MAX_LISTED).map(|r| r.to_string()).collect();
        return Err(AppError::Data(format!("malformed timestamps in rows {}", listed.join(", "))));
    }
    let mut out = Vec::with_capacity(days.len());
    for (date, mut obs) in days {
        obs.sort_by(|a, b| a.0.trim_start_matches(['T', ' ']).cmp(b.0.trim_start_matches(['T', ' '])));
        let (mut imax, mut imin) = (0, 0);
        for (k, (_, v)) in obs.iter().enumerate() {
            if *v > obs[imax].1 {
                imax = k;
            }
            if *v < obs[imin].1 {
                imin = k;
            }
        }
        let range = obs[imax].1 - obs[imin].1;
        let change = if imax > imin { range } else { -range };
        out.push(DailyChange { date: date.to_string(), change: if range == 0.0 { 0.0 } else { change } });
    }
    Ok(out)
}

fn valid_timestamp(t: &str) -> bool {
    let b = t.as_bytes();
    if b.len() < 16 {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    digits(0..4)
        && b[4] == b'-'
        && digits(5..7)
        && b[7] == b'-'
        && digits(8..10)
        && (b[10] == b' ' || b[10] == b'T')
        && digits(11..13)
        && b[13] == b':'
        && digits(14..16)
}

/// Write a derived series as `date,change` CSV.
pub fn write_daily_changes(path: &Path, series: &[DailyChange]) -> AppResult<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["date", "change"])?;
        for d in series {
            w.write_record([d.date.clone(), format!("{}", d.change)])?;
        }
        w.flush()?;
    }
    crate::document::write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_cells_with_rows() {
        let ds = Dataset::from_reader("a,b\n1,2\n,3\nx,4\n5,6\n".as_bytes()).unwrap();
        let err = ds.numeric_column("a").unwrap_err().to_string();
        assert!(err.contains("row 2 (missing)") && err.contains("row 3 ('x')"), "{err}");
        assert_eq!(ds.numeric_column("b").unwrap(), vec![2.0, 3.0, 4.0, 6.0]);
        assert!(ds.numeric_column("c").is_err());
    }

    #[test]
    fn elevation_sign_follows_order() {
        let csv = "datetime,value\n\
                   2020-01-01 00:00,10\n2020-01-01 06:00,9\n2020-01-01 12:00,12\n\
                   2020-01-02 00:00,12\n2020-01-02 06:00,8\n2020-01-02 12:00,11\n";
        let ds = Dataset::from_reader(csv.as_bytes()).unwrap();
        let s = elevation_change(&ds, "datetime", "value").unwrap();
        assert_eq!(s, vec![
            DailyChange { date: "2020-01-01".into(), change: 3.0 },
            DailyChange { date: "2020-01-02".into(), change: -4.0 },
        ]);
    }

    #[test]
    fn malformed_timestamp_rejected() {
        let ds = Dataset::from_reader("datetime,value\n01/02/2020,3\n".as_bytes()).unwrap();
        assert!(elevation_change(&ds, "datetime", "value").is_err());
    }
}
