//! Polynomial feature dictionaries over the regressors `(d, v?, x)`.
//!
//! Every basis function is a monomial, so its partial derivative in `d`
//! (always variable 0) is available in closed form.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Obs};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryKind {
    /// Constant, the raw regressors and all pairwise products of distinct regressors.
    Low,
    /// All monomials of total degree at most four.
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    kind: DictionaryKind,
    n_vars: usize,
    /// Exponent vector per basis function; the first is the constant.
    terms: Vec<Vec<u8>>,
    max_degree: usize,
}

impl Dictionary {
    pub fn new(kind: DictionaryKind, n_vars: usize) -> Self {
        let terms = match kind {
            DictionaryKind::Low => {
                let mut t = vec![vec![0u8; n_vars]];
                for i in 0..n_vars {
                    let mut e = vec![0; n_vars];
                    e[i] = 1;
                    t.push(e);
                }
                for i in 0..n_vars {
                    for j in i + 1..n_vars {
                        let mut e = vec![0; n_vars];
                        e[i] = 1;
                        e[j] = 1;
                        t.push(e);
                    }
                }
                t
            }
            DictionaryKind::High => monomials(n_vars, 4),
        };
        let max_degree = terms.iter().flat_map(|e| e.iter()).map(|&a| a as usize).max().unwrap_or(0);
        Dictionary { kind, n_vars, terms, max_degree }
    }

    /// Dictionary sized for the regressors of `data`.
    pub fn for_data(kind: DictionaryKind, data: &Dataset) -> Self {
        Dictionary::new(kind, 1 + usize::from(data.has_v()) + data.p())
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn exponents(&self, j: usize) -> &[u8] {
        &self.terms[j]
    }

    fn powers(&self, vars: &[f64]) -> Vec<f64> {
        assert_eq!(vars.len(), self.n_vars, "observation has {} regressors, dictionary expects {}", vars.len(), self.n_vars);
        let k = self.max_degree + 1;
        let mut pw = vec![1.0; self.n_vars * k];
        for (i, &x) in vars.iter().enumerate() {
            for e in 1..k {
                pw[i * k + e] = pw[i * k + e - 1] * x;
            }
        }
        pw
    }

    /// Basis values `b_j(vars)` for raw regressors `vars = (d, v?, x)`.
    pub fn expand_vars_into(&self, vars: &[f64], out: &mut Vec<f64>) {
        let k = self.max_degree + 1;
        let pw = self.powers(vars);
        out.clear();
        out.extend(self.terms.iter().map(|e| e.iter().enumerate().map(|(i, &a)| pw[i * k + a as usize]).product::<f64>()));
    }

    pub fn expand(&self, obs: &Obs<'_>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.expand_vars_into(&obs.vars(), &mut out);
        out
    }

    /// Analytic partial derivatives `d b_j / d d` at `obs`.
    pub fn d_derivative(&self, obs: &Obs<'_>) -> Vec<f64> {
        let vars = obs.vars();
        let k = self.max_degree + 1;
        let pw = self.powers(&vars);
        self.terms
            .iter()
            .map(|e| {
                if e[0] == 0 {
                    return 0.0;
                }
                let lead = e[0] as f64 * pw[e[0] as usize - 1];
                lead * e.iter().enumerate().skip(1).map(|(i, &a)| pw[i * k + a as usize]).product::<f64>()
            })
            .collect()
    }

    /// Design matrix with one row per observation.
    pub fn design(&self, data: &Dataset) -> Matrix {
        let mut m = Matrix::zeros(data.n(), self.len());
        let mut vars = Vec::new();
        let mut row = Vec::new();
        for i in 0..data.n() {
            data.obs(i).vars_into(&mut vars);
            self.expand_vars_into(&vars, &mut row);
            m.row_mut(i).copy_from_slice(&row);
        }
        m
    }

    /// Human-readable names such as `d*v` or `x1^2`, given variable names.
    pub fn term_names(&self, var_names: &[String]) -> Vec<String> {
        self.terms
            .iter()
            .map(|e| {
                let parts: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a > 0)
                    .map(|(i, &a)| if a == 1 { var_names[i].clone() } else { format!("{}^{a}", var_names[i]) })
                    .collect();
                if parts.is_empty() {
                    "1".into()
                } else {
                    parts.join("*")
                }
            })
            .collect()
    }
}

/// All exponent vectors over `n` variables with total degree `<= degree`,
/// ordered by degree then lexicographically (descending in the first variable).
fn monomials(n: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(n: usize, remaining: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == n - 1 {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a as u8);
            rec(n, remaining - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return vec![vec![]];
    }
    for deg in 0..=degree {
        rec(n, deg, &mut Vec::new(), &mut out);
    }
    out
}
