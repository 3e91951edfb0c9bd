//! Discrete fields, collar differential operators and Hölder estimators.

pub mod holder;
pub mod operator;
pub mod ops;

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::CollarChart;

pub use holder::{estimate_exponent, holder_seminorm, ExponentFit};
pub use operator::{classify_operator, FuchsianOperator, OperatorClass, OperatorForm};
pub use ops::{ambient_gradient, collar_gradient, collar_laplacian, fd_weights};

/// Which kind of grid a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Rows are T layers, columns are Y nodes.
    Collar,
    /// Rows are y lines, columns are x nodes.
    Interior,
}

/// Values on a tensor grid, stored row-major (`row * n_cols + col`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub quantity_tag: String,
    pub kind: GridKind,
    pub grid_hash: u64,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub values: Vec<f64>,
    /// Nodes that carry data (interior grids); `None` means all.
    pub mask: Option<Vec<bool>>,
}

impl ScalarField {
    pub fn on_chart(chart: &CollarChart, tag: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), chart.len(), "field size does not match chart");
        Self {
            quantity_tag: tag.to_string(),
            kind: GridKind::Collar,
            grid_hash: chart.hash(),
            rows: chart.t_nodes.clone(),
            cols: chart.y_nodes.clone(),
            values,
            mask: None,
        }
    }

    /// Field on any `(T, Y)` tensor grid other than a collar chart.
    pub fn on_tensor(tag: &str, grid_hash: u64, rows: &[f64], cols: &[f64], values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows.len() * cols.len(), "field size does not match grid");
        Self {
            quantity_tag: tag.to_string(),
            kind: GridKind::Collar,
            grid_hash,
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            values,
            mask: None,
        }
    }

    pub fn from_fn(chart: &CollarChart, tag: &str, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut v = Vec::with_capacity(chart.len());
        for &t in &chart.t_nodes {
            for &y in &chart.y_nodes {
                v.push(f(t, y));
            }
        }
        Self::on_chart(chart, tag, v)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.cols.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.quantity_tag = tag.to_string();
        self
    }

    pub fn map(&self, tag: &str, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.quantity_tag = tag.to_string();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip(&self, other: &Self, tag: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.values.len() != other.values.len() || self.grid_hash != other.grid_hash {
            return Err(Error::Shape(format!(
                "fields `{}` and `{}` live on different grids",
                self.quantity_tag, other.quantity_tag
            )));
        }
        let mut out = self.clone();
        out.quantity_tag = tag.to_string();
        for (o, b) in out.values.iter_mut().zip(&other.values) {
            *o = f(*o, *b);
        }
        Ok(out)
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[k])
    }

    /// Largest absolute value over active nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.is_active(*k))
            .fold(0.0, |m: f64, (_, v)| m.max(v.abs()))
    }

    /// Finiteness invariant: all active nodes finite, except the first row of
    /// a collar field whose tag ends in `_blowup`.
    pub fn check_finite(&self) -> Result<()> {
        let skip_first = self.kind == GridKind::Collar && self.quantity_tag.ends_with("_blowup");
        let n = self.cols.len();
        for (k, v) in self.values.iter().enumerate() {
            if !self.is_active(k) || (skip_first && k < n) {
                continue;
            }
            if !v.is_finite() {
                return Err(Error::Shape(format!(
                    "non-finite value in `{}` at row {}, column {}",
                    self.quantity_tag,
                    k / n,
                    k % n
                )));
            }
        }
        Ok(())
    }

    /// CSV dump: a `#` metadata line, a header, then one line per active node.
    pub fn to_csv(&self) -> String {
        let (a, b) = match self.kind {
            GridKind::Collar => ("T", "Y"),
            GridKind::Interior => ("x", "y"),
        };
        let kind = match self.kind {
            GridKind::Collar => "collar",
            GridKind::Interior => "interior",
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# tag={} hash={:016x} grid={} rows={} cols={}",
            self.quantity_tag,
            self.grid_hash,
            kind,
            self.rows.len(),
            self.cols.len()
        );
        let _ = writeln!(s, "{a},{b},value");
        let n = self.cols.len();
        for (k, v) in self.values.iter().enumerate() {
            if !self.is_active(k) {
                continue;
            }
            let (r, c) = (k / n, k % n);
            match self.kind {
                GridKind::Collar => {
                    let _ = writeln!(s, "{},{},{}", self.rows[r], self.cols[c], v);
                }
                GridKind::Interior => {
                    let _ = writeln!(s, "{},{},{}", self.cols[c], self.rows[r], v);
                }
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_csv(BufReader::new(file))
    }

    pub fn parse_csv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field file".into()))??;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing `#` metadata line".into()))?;
        let mut tag = String::new();
        let mut hash = 0u64;
        let mut kind = GridKind::Collar;
        let (mut n_rows, mut n_cols) = (0usize, 0usize);
        for item in meta.split_whitespace() {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata item `{item}`")))?;
            let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("metadata `{k}`: {e}"));
            match k {
                "tag" => tag = v.to_string(),
                "hash" => hash = u64::from_str_radix(v, 16).map_err(|e| bad(&e))?,
                "grid" => {
                    kind = match v {
                        "collar" => GridKind::Collar,
                        "interior" => GridKind::Interior,
                        _ => return Err(bad(&v)),
                    }
                }
                "rows" => n_rows = v.parse().map_err(|e| bad(&e))?,
                "cols" => n_cols = v.parse().map_err(|e| bad(&e))?,
                _ => {}
            }
        }
        lines
            .next()
            .ok_or_else(|| Error::Parse("missing column header".into()))??;
        let mut triples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<f64> = line
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line `{line}`: {e}")))?;
            if parts.len() != 3 {
                return Err(Error::Parse(format!("expected 3 columns in `{line}`")));
            }
            triples.push((parts[0], parts[1], parts[2]));
        }
        // rows/cols: collar lists (T, Y); interior lists (x, y) with rows = y
        let (row_of, col_of): (fn(&(f64, f64, f64)) -> f64, fn(&(f64, f64, f64)) -> f64) =
            match kind {
                GridKind::Collar => (|t| t.0, |t| t.1),
                GridKind::Interior => (|t| t.1, |t| t.0),
            };
        let uniq = |get: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = triples.iter().map(get).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v
        };
        let rows = uniq(row_of);
        let cols = uniq(col_of);
        if kind == GridKind::Collar && (rows.len() != n_rows || cols.len() != n_cols) {
            return Err(Error::Parse(format!(
                "header declares {n_rows}x{n_cols} nodes, data has {}x{}",
                rows.len(),
                cols.len()
            )));
        }
        let nc = cols.len();
        let mut values = vec![f64::NAN; rows.len() * nc];
        let mut mask = vec![false; rows.len() * nc];
        for t in &triples {
            let r = rows
                .binary_search_by(|x| x.partial_cmp(&row_of(t)).unwrap())
                .unwrap();
            let c = cols
                .binary_search_by(|x| x.partial_cmp(&col_of(t)).unwrap())
                .unwrap();
            values[r * nc + c] = t.2;
            mask[r * nc + c] = true;
        }
        let mask = if mask.iter().all(|m| *m) { None } else { Some(mask) };
        Ok(Self {
            quantity_tag: tag,
            kind,
            grid_hash: hash,
            rows,
            cols,
            values,
            mask,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_profile_chart, Grading};
    use std::sync::Arc;

    fn chart() -> CollarChart {
        build_profile_chart(Arc::new(|y: f64| (1.0 + 0.3 * y.sin(), 0.3 * y.cos())), 6.0, 0.2, 8, 16, Grading::default())
            .unwrap()
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let c = chart();
        let f = ScalarField::from_fn(&c, "w", |t, y| (t * 3.1).exp() - y / 7.0);
        let text = f.to_csv();
        assert!(text.starts_with("# tag=w hash="));
        let back = ScalarField::parse_csv(text.as_bytes()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn blowup_tag_allows_infinite_first_row() {
        let c = chart();
        let f = ScalarField::from_fn(&c, "u_blowup", |t, _| -(2.0 * t).ln());
        assert!(f.check_finite().is_ok());
        assert!(f.clone().with_tag("u").check_finite().is_err());
    }

    #[test]
    fn zip_rejects_foreign_grid() {
        let a = ScalarField::from_fn(&chart(), "a", |t, _| t);
        let other = chart().refined().unwrap();
        let b = ScalarField::from_fn(&other, "b", |t, _| t);
        assert!(a.zip(&b, "c", |x, y| x + y).is_err());
    }
}
