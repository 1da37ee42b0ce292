//! Uniform rectangular grids of nodal values over one side of the flattened
//! interface `{x_n = 0}`, plus their CSV form.
//!
//! Storage is row-major with the last axis (`x_n`) fastest, so each
//! `x_n`-column is contiguous.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("shape {shape:?} does not match {len} values")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("non-finite value at {0:?}")]
    NonFinite(Vec<usize>),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which half of the chart a grid lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "+",
            Side::Minus => "-",
        })
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+" | "plus" => Ok(Side::Plus),
            "-" | "minus" => Ok(Side::Minus),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Nodal values of a graph function on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction {
    shape: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    side: Side,
    values: Vec<f64>,
}

impl GraphFunction {
    pub fn new(
        shape: Vec<usize>,
        origin: Vec<f64>,
        h: f64,
        side: Side,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::BadSpacing(h));
        }
        if shape.len() != origin.len() || shape.iter().product::<usize>() != values.len() {
            return Err(GridError::ShapeMismatch {
                shape,
                len: values.len(),
            });
        }
        let g = Self {
            shape,
            origin,
            h,
            side,
            values,
        };
        if let Some(i) = g.values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(g.unflatten(i)));
        }
        Ok(g)
    }

    /// Samples `f` at every node.
    pub fn from_fn(
        shape: Vec<usize>,
        origin: Vec<f64>,
        h: f64,
        side: Side,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self, GridError> {
        let len = shape.iter().product();
        let mut g = Self {
            shape,
            origin,
            h,
            side,
            values: vec![0.0; len],
        };
        for flat in 0..len {
            let x = g.coord(&g.unflatten(flat));
            g.values[flat] = f(&x);
        }
        Self::new(g.shape, g.origin, g.h, g.side, g.values)
    }

    /// Grid on `[x0', x0' + (m'-1)h] x [0, (m_n-1)h]` (plus side) or its
    /// mirror `[-(m_n-1)h, 0]` (minus side) in the normal direction.
    pub fn half_grid(
        side: Side,
        tangential_origin: &[f64],
        tangential_shape: &[usize],
        normal_nodes: usize,
        h: f64,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self, GridError> {
        let mut shape = tangential_shape.to_vec();
        shape.push(normal_nodes);
        let mut origin = tangential_origin.to_vec();
        origin.push(match side {
            Side::Plus => 0.0,
            Side::Minus => -((normal_nodes - 1) as f64) * h,
        });
        Self::from_fn(shape, origin, h, side, f)
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn side(&self) -> Side {
        self.side
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

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &m)| acc * m + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + i as f64 * self.h)
            .collect()
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.flatten(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let f = self.flatten(idx);
        self.values[f] = v;
    }

    /// Value at `idx + offset * e_axis`, if inside the grid.
    pub fn shifted(&self, idx: &[usize], axis: usize, offset: isize) -> Option<f64> {
        let i = idx[axis] as isize + offset;
        if i < 0 || i >= self.shape[axis] as isize {
            return None;
        }
        let mut j = idx.to_vec();
        j[axis] = i as usize;
        Some(self.at(&j))
    }

    /// Whether every neighbour `idx +- e_a` exists.
    pub fn is_interior(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(&self.shape)
            .all(|(&i, &m)| i >= 1 && i + 1 < m)
    }

    /// Index of the `x_n = 0` layer, if the grid has one.
    pub fn interface_layer(&self) -> Option<usize> {
        let last = self.n() - 1;
        let i = -self.origin[last] / self.h;
        let r = i.round();
        if (i - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < self.shape[last] {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Number of tangential nodes (product of all but the last axis).
    pub fn column_count(&self) -> usize {
        self.shape[..self.n() - 1].iter().product()
    }

    /// Contiguous `x_n`-column for a flattened tangential index.
    pub fn column(&self, col: usize) -> &[f64] {
        let m = self.shape[self.n() - 1];
        &self.values[col * m..(col + 1) * m]
    }

    /// Tangential multi-index for a flattened column index.
    pub fn column_index(&self, mut col: usize) -> Vec<usize> {
        let t = &self.shape[..self.n() - 1];
        let mut idx = vec![0; t.len()];
        for a in (0..t.len()).rev() {
            idx[a] = col % t[a];
            col /= t[a];
        }
        idx
    }

    pub fn column_of(&self, tangential: &[usize]) -> usize {
        tangential
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &m)| acc * m + i)
    }

    /// Interior nodes (one-node margin on every axis).
    pub fn interior_nodes(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len())
            .map(|f| self.unflatten(f))
            .filter(|i| self.is_interior(i))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV form: a header record `n,h,side,origin_1..origin_n,shape_1..shape_n`,
    /// its values, then a `i_1..i_n,value` record per node.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GridError> {
        let n = self.n();
        let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        let mut head = vec!["n".to_string(), "h".to_string(), "side".to_string()];
        head.extend((1..=n).map(|i| format!("origin_{i}")));
        head.extend((1..=n).map(|i| format!("shape_{i}")));
        wr.write_record(&head)?;
        let mut meta = vec![n.to_string(), fmt_f64(self.h), self.side.to_string()];
        meta.extend(self.origin.iter().map(|&o| fmt_f64(o)));
        meta.extend(self.shape.iter().map(|m| m.to_string()));
        wr.write_record(&meta)?;
        let mut cols: Vec<String> = (1..=n).map(|i| format!("i_{i}")).collect();
        cols.push("value".into());
        wr.write_record(&cols)?;
        for flat in 0..self.len() {
            let mut rec: Vec<String> = self.unflatten(flat).iter().map(|i| i.to_string()).collect();
            rec.push(fmt_f64(self.values[flat]));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, GridError> {
        let mut rd = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_reader(r);
        let mut records = rd.records();
        let mut next = |line: usize| -> Result<csv::StringRecord, GridError> {
            records
                .next()
                .ok_or(GridError::Parse {
                    line,
                    msg: "unexpected end of file".into(),
                })?
                .map_err(GridError::from)
        };
        let _head = next(1)?;
        let meta = next(2)?;
        let p = |line: usize, s: &str| -> Result<f64, GridError> {
            s.trim().parse::<f64>().map_err(|e| GridError::Parse {
                line,
                msg: format!("`{s}`: {e}"),
            })
        };
        let n: usize = meta
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or(GridError::Parse {
                line: 2,
                msg: "bad dimension".into(),
            })?;
        if meta.len() != 3 + 2 * n {
            return Err(GridError::Parse {
                line: 2,
                msg: format!("expected {} fields", 3 + 2 * n),
            });
        }
        let h = p(2, &meta[1])?;
        let side: Side = meta[2]
            .parse()
            .map_err(|msg| GridError::Parse { line: 2, msg })?;
        let origin = (0..n)
            .map(|i| p(2, &meta[3 + i]))
            .collect::<Result<Vec<_>, _>>()?;
        let shape = (0..n)
            .map(|i| {
                meta[3 + n + i]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| GridError::Parse {
                        line: 2,
                        msg: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let _cols = next(3)?;
        let len: usize = shape.iter().product();
        let mut values = vec![f64::NAN; len];
        let mut seen = vec![false; len];
        let probe = Self {
            shape: shape.clone(),
            origin: origin.clone(),
            h,
            side,
            values: vec![],
        };
        let mut line = 3;
        for rec in records {
            line += 1;
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(GridError::Parse {
                    line,
                    msg: format!("expected {} fields", n + 1),
                });
            }
            let idx = (0..n)
                .map(|i| {
                    rec[i]
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| GridError::Parse {
                            line,
                            msg: e.to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if idx.iter().zip(&shape).any(|(&i, &m)| i >= m) {
                return Err(GridError::Parse {
                    line,
                    msg: format!("index {idx:?} out of range"),
                });
            }
            let f = probe.flatten(&idx);
            values[f] = p(line, &rec[n])?;
            seen[f] = true;
        }
        if let Some(f) = seen.iter().position(|s| !s) {
            return Err(GridError::Parse {
                line,
                msg: format!("missing node {:?}", probe.unflatten(f)),
            });
        }
        Self::new(shape, origin, h, side, values)
    }
}

/// Shortest round-trip representation; stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let g = GraphFunction::from_fn(vec![3, 4, 5], vec![0.0, 1.0, 0.0], 0.5, Side::Plus, |x| {
            x[0] + x[1] * x[2]
        })
        .unwrap();
        for f in 0..g.len() {
            assert_eq!(g.flatten(&g.unflatten(f)), f);
        }
        assert_eq!(g.coord(&[2, 1, 4]), vec![1.0, 1.5, 2.0]);
        assert_eq!(g.column(g.column_of(&[1, 2])).len(), 5);
        assert_eq!(g.column_index(g.column_of(&[1, 2])), vec![1, 2]);
        assert_eq!(g.interface_layer(), Some(0));
    }

    #[test]
    fn minus_half_grid_has_interface_last() {
        let g = GraphFunction::half_grid(Side::Minus, &[-1.0], &[5], 4, 0.25, |x| x[1]).unwrap();
        assert_eq!(g.interface_layer(), Some(3));
        assert_eq!(g.at(&[0, 0]), -0.75);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let g = GraphFunction::from_fn(vec![3, 4], vec![-0.1, 0.0], 0.1, Side::Minus, |x| {
            (x[0] * 3.0).sin() + x[1]
        })
        .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = GraphFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "n,h,side,origin_1,shape_1\n1,0.5,+,0.0,2\ni_1,value\n0,1.0\n1,abc\n";
        match GraphFunction::read_csv(text.as_bytes()) {
            Err(GridError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "n,h,side,origin_1,shape_1\n1,0.5,+,0.0,2\ni_1,value\n0,1.0\n";
        assert!(matches!(
            GraphFunction::read_csv(missing.as_bytes()),
            Err(GridError::Parse { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            GraphFunction::new(vec![2], vec![0.0], 0.0, Side::Plus, vec![0.0, 0.0]),
            Err(GridError::BadSpacing(_))
        ));
        assert!(matches!(
            GraphFunction::new(vec![2], vec![0.0], 1.0, Side::Plus, vec![0.0, f64::NAN]),
            Err(GridError::NonFinite(_))
        ));
    }
}
