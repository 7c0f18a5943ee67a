//! Observation storage and CSV ingestion.
//!
//! A row is `(y, d, v, x)`: outcome, treatment or running variable, an
//! optional scalar localization covariate, and a covariate vector of fixed
//! dimension. Which raw CSV column plays which role is declared by the
//! caller through [`ColumnRoles`]; nothing is inferred from the header.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};

/// Maps CSV header names onto observation roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRoles {
    pub y: String,
    pub d: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
    #[serde(default)]
    pub x: Vec<String>,
}

impl ColumnRoles {
    /// Roles used by CSV files written with [`Dataset::write_csv`].
    pub fn standard(has_v: bool, p: usize) -> Self {
        ColumnRoles {
            y: "y".into(),
            d: "d".into(),
            v: has_v.then(|| "v".into()),
            x: (1..=p).map(|j| format!("x{j}")).collect(),
        }
    }
}

/// A single observation borrowed from a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obs<'a> {
    pub y: f64,
    pub d: f64,
    pub v: Option<f64>,
    pub x: &'a [f64],
}

impl<'a> Obs<'a> {
    /// The same observation with its treatment replaced (counterfactual).
    pub fn with_d(self, d: f64) -> Self {
        Obs { d, ..self }
    }

    /// Number of regressors `(d, v?, x)`.
    pub fn n_vars(&self) -> usize {
        1 + usize::from(self.v.is_some()) + self.x.len()
    }

    /// Writes the regressors `(d, v?, x)` into `out`, replacing its contents.
    pub fn vars_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.d);
        if let Some(v) = self.v {
            out.push(v);
        }
        out.extend_from_slice(self.x);
    }

    pub fn vars(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_vars());
        self.vars_into(&mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    d: Vec<f64>,
    v: Option<Vec<f64>>,
    x: Vec<f64>,
    p: usize,
}

impl Dataset {
    /// Builds a dataset from columns; `x` is row-major with `p` entries per row.
    pub fn new(y: Vec<f64>, d: Vec<f64>, v: Option<Vec<f64>>, x: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if d.len() != n {
            return Err(DmlError::InvalidData(format!("d has {} rows, y has {n}", d.len())));
        }
        if let Some(v) = &v {
            if v.len() != n {
                return Err(DmlError::InvalidData(format!("v has {} rows, y has {n}", v.len())));
            }
        }
        if x.len() != n * p {
            return Err(DmlError::InvalidData(format!(
                "x has {} entries, expected {n} rows x {p} columns",
                x.len()
            )));
        }
        let all = y.iter().chain(&d).chain(v.iter().flatten()).chain(&x);
        if let Some(bad) = all.clone().position(|a| !a.is_finite()) {
            return Err(DmlError::InvalidData(format!("non-finite value at flat position {bad}")));
        }
        Ok(Dataset { y, d, v, x, p })
    }

    /// Builds a dataset from row tuples `(y, d, v, x)`.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64, Option<f64>, &'a [f64])>,
    {
        let mut y = Vec::new();
        let mut d = Vec::new();
        let mut v = Vec::new();
        let mut has_v = None;
        let mut x = Vec::new();
        let mut p = None;
        for (i, (yi, di, vi, xi)) in rows.into_iter().enumerate() {
            if *p.get_or_insert(xi.len()) != xi.len() {
                return Err(DmlError::InvalidData(format!("row {i} has {} covariates", xi.len())));
            }
            if *has_v.get_or_insert(vi.is_some()) != vi.is_some() {
                return Err(DmlError::InvalidData(format!("row {i} disagrees on presence of v")));
            }
            y.push(yi);
            d.push(di);
            v.extend(vi);
            x.extend_from_slice(xi);
        }
        let v = has_v.unwrap_or(false).then_some(v);
        Dataset::new(y, d, v, x, p.unwrap_or(0))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Covariate dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn has_v(&self) -> bool {
        self.v.is_some()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn v(&self) -> Option<&[f64]> {
        self.v.as_deref()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn obs(&self, i: usize) -> Obs<'_> {
        Obs {
            y: self.y[i],
            d: self.d[i],
            v: self.v.as_ref().map(|v| v[i]),
            x: self.x_row(i),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Obs<'_>> + '_ {
        (0..self.n()).map(move |i| self.obs(i))
    }

    /// Copies the given rows, in the given order, into a new dataset.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            d: rows.iter().map(|&i| self.d[i]).collect(),
            v: self.v.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
            x: rows.iter().flat_map(|&i| self.x_row(i).iter().copied()).collect(),
            p: self.p,
        }
    }

    /// Total order on row contents, used to make fits independent of the
    /// order rows happen to be stored in.
    pub fn cmp_rows(&self, a: usize, b: usize) -> Ordering {
        let (ra, rb) = (self.obs(a), self.obs(b));
        ra.y.total_cmp(&rb.y)
            .then(ra.d.total_cmp(&rb.d))
            .then_with(|| match (ra.v, rb.v) {
                (Some(va), Some(vb)) => va.total_cmp(&vb),
                _ => Ordering::Equal,
            })
            .then_with(|| {
                ra.x.iter()
                    .zip(rb.x)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    }

    /// Sorts row indices into canonical content order.
    pub fn sort_canonical(&self, rows: &mut [usize]) {
        rows.sort_by(|&a, &b| self.cmp_rows(a, b));
    }

    /// Reads a headered CSV, assigning columns by role.
    pub fn read_csv(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, roles)
    }

    pub fn from_csv_reader<R: Read>(reader: R, roles: &ColumnRoles) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DmlError::InvalidData(format!("column `{name}` not found in header")))
        };
        let yi = find(&roles.y)?;
        let di = find(&roles.d)?;
        let vi = roles.v.as_deref().map(find).transpose()?;
        let xi = roles.x.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

        let (mut y, mut d, mut v, mut x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (r, rec) in rdr.records().enumerate() {
            // Row numbers are 1-based data rows (the header is row 0).
            let row = r + 1;
            let rec = rec.map_err(|e| DmlError::Ingestion { row, message: e.to_string() })?;
            let field = |col: usize| -> Result<f64> {
                let raw = rec.get(col).unwrap_or("");
                if raw.is_empty() {
                    return Err(DmlError::Ingestion {
                        row,
                        message: format!("missing value in column `{}`", &headers[col]),
                    });
                }
                let val: f64 = raw.parse().map_err(|_| DmlError::Ingestion {
                    row,
                    message: format!("cannot parse `{raw}` in column `{}` as a number", &headers[col]),
                })?;
                if !val.is_finite() {
                    return Err(DmlError::Ingestion {
                        row,
                        message: format!("non-finite value in column `{}`", &headers[col]),
                    });
                }
                Ok(val)
            };
            y.push(field(yi)?);
            d.push(field(di)?);
            if let Some(c) = vi {
                v.push(field(c)?);
            }
            for &c in &xi {
                x.push(field(c)?);
            }
        }
        Dataset::new(y, d, vi.map(|_| v), x, xi.len())
    }

    /// Writes the dataset with the header produced by [`ColumnRoles::standard`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let roles = ColumnRoles::standard(self.has_v(), self.p);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![roles.y.clone(), roles.d.clone()];
        header.extend(roles.v.clone());
        header.extend(roles.x.iter().cloned());
        w.write_record(&header)?;
        for o in self.iter() {
            let mut rec = vec![o.y.to_string(), o.d.to_string()];
            rec.extend(o.v.map(|v| v.to_string()));
            rec.extend(o.x.iter().map(|a| a.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> ColumnRoles {
        ColumnRoles { y: "out".into(), d: "treat".into(), v: Some("age".into()), x: vec!["a".into(), "b".into()] }
    }

    #[test]
    fn csv_roles_are_assigned_by_name() {
        let csv = "a,treat,out,b,age\n1,0,2.5,3,0.1\n4,1,5.5,6,0.2\n";
        let data = Dataset::from_csv_reader(csv.as_bytes(), &roles()).unwrap();
        assert_eq!(data.n(), 2);
        assert_eq!(data.y(), &[2.5, 5.5]);
        assert_eq!(data.d(), &[0.0, 1.0]);
        assert_eq!(data.v().unwrap(), &[0.1, 0.2]);
        assert_eq!(data.x_row(1), &[4.0, 6.0]);
    }

    #[test]
    fn malformed_row_is_named() {
        let csv = "a,treat,out,b,age\n1,0,2.5,3,0.1\n4,1,oops,6,0.2\n";
        let err = Dataset::from_csv_reader(csv.as_bytes(), &roles()).unwrap_err();
        match err {
            DmlError::Ingestion { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_value_rejected() {
        let csv = "a,treat,out,b,age\n1,0,,3,0.1\n";
        assert!(matches!(
            Dataset::from_csv_reader(csv.as_bytes(), &roles()),
            Err(DmlError::Ingestion { row: 1, .. })
        ));
    }

    #[test]
    fn missing_column_rejected() {
        let csv = "a,treat,out,age\n1,0,1,3\n";
        assert!(matches!(Dataset::from_csv_reader(csv.as_bytes(), &roles()), Err(DmlError::InvalidData(_))));
    }

    #[test]
    fn write_then_read_preserves_values() {
        let x = [0.25, -1.0 / 3.0];
        let data = Dataset::from_rows([(1.5, 1.0, Some(0.125), &x[..]), (0.0, 0.0, Some(-0.4), &x[..])]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::from_csv_reader(&buf[..], &ColumnRoles::standard(true, 2)).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn counterfactual_keeps_other_fields() {
        let x = [1.0, 2.0];
        let o = Obs { y: 3.0, d: 0.0, v: Some(0.5), x: &x };
        let c = o.with_d(1.0);
        assert_eq!(c.d, 1.0);
        assert_eq!(c.vars(), vec![1.0, 0.5, 1.0, 2.0]);
    }
}
