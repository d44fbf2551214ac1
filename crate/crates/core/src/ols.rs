//! Ordinary least squares with classical diagnostics.
//!
//! The solver works on a column-equilibrated copy of the design (each column
//! scaled to unit Euclidean norm) and factors it with Householder QR. The
//! same equilibrated triangle supplies the condition number used to reject
//! near-collinear designs, so the rejection rule does not depend on the units
//! of individual regressors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Name of the explicit column of ones.
pub const INTERCEPT: &str = "const";

/// Designs whose equilibrated condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    values: DMatrix<f64>,
    response: DVector<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, values: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::Design(format!("{} names for {} columns", names.len(), values.ncols())));
        }
        if response.len() != values.nrows() {
            return Err(Error::Design(format!("response has {} rows, design has {}", response.len(), values.nrows())));
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Design(format!("duplicate column name `{n}`")));
            }
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let col = idx / values.nrows().max(1);
            return Err(Error::Design(format!("non-finite value in column `{}`", names[col])));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::Design("non-finite value in response".into()));
        }
        Ok(DesignMatrix { names, values, response })
    }

    /// Build from column vectors; no intercept is added.
    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::Design(format!("column of length {} for {n} observations", c.len())));
        }
        let values = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Self::new(names, values, DVector::from_vec(response))
    }

    /// Build from regressor columns, prepending the intercept column.
    pub fn with_intercept(names: &[&str], columns: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        let mut all_names = vec![INTERCEPT.to_string()];
        all_names.extend(names.iter().map(|s| s.to_string()));
        let mut all_cols = vec![vec![1.0; n]];
        all_cols.extend(columns.iter().cloned());
        Self::from_columns(all_names, &all_cols, response)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.values.column(j).iter().copied().collect())
    }
}

/// Result of an OLS fit. Vectors are aligned with `names`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub df_resid: usize,
    /// Residual standard error.
    pub sigma: f64,
    pub condition_number: f64,
}

impl RegressionFit {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    pub fn intercept(&self) -> Option<f64> {
        self.coefficient(INTERCEPT)
    }

    /// Two-sided confidence bounds at `level` (e.g. 0.95) from the t distribution.
    pub fn conf_int(&self, level: f64) -> Vec<(f64, f64)> {
        let q = t_quantile(0.5 + level / 2.0, self.df_resid as f64);
        self.coefficients.iter().zip(&self.std_errors).map(|(b, se)| (b - q * se, b + q * se)).collect()
    }

    /// Fitted values for the rows of `design` (columns matched by position).
    pub fn fitted(&self, design: &DesignMatrix) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (design.values() * beta).iter().copied().collect()
    }
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").cdf(t)
}

/// Two-sided p-value for a t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    2.0 * StudentsT::new(0.0, 1.0, df).expect("df > 0").sf(t.abs())
}

pub fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(p)
}

/// Columns carrying weight in the near-null direction of the design.
fn offending_columns(r: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let svd = r.clone().svd(false, true);
    let Some(v_t) = svd.v_t else {
        return names.to_vec();
    };
    let (imin, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let direction = v_t.row(imin);
    let peak = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    names.iter().zip(direction.iter()).filter(|(_, v)| v.abs() >= 0.1 * peak).map(|(n, _)| n.clone()).collect()
}

/// Fit by least squares; see the module docs for the numerical approach.
pub fn fit_ols(design: &DesignMatrix) -> Result<RegressionFit> {
    let n = design.n_obs();
    let k = design.n_cols();
    if k == 0 {
        return Err(Error::Design("no columns".into()));
    }
    if n < k + 1 {
        return Err(Error::Design(format!("{n} observations for {k} columns; need at least {}", k + 1)));
    }
    let x = design.values();
    let y = design.response();

    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let zero_cols: Vec<String> =
        norms.iter().zip(design.names()).filter(|(nm, _)| **nm == 0.0).map(|(_, name)| name.clone()).collect();
    if !zero_cols.is_empty() {
        return Err(Error::SingularFit { condition: f64::INFINITY, columns: zero_cols });
    }
    let mut scaled = x.clone();
    for (j, nm) in norms.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*nm);
    }

    let qr = scaled.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularFit { condition, columns: offending_columns(&r, design.names()) });
    }

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty_k = qty.rows(0, k).into_owned();
    let beta_scaled = r
        .solve_upper_triangular(&qty_k)
        .ok_or_else(|| Error::SingularFit { condition, columns: offending_columns(&r, design.names()) })?;
    let coefficients: Vec<f64> = beta_scaled.iter().zip(&norms).map(|(b, nm)| b / nm).collect();

    let beta = DVector::from_column_slice(&coefficients);
    let residuals: DVector<f64> = y - x * &beta;
    let ssr = residuals.norm_squared();
    let df_resid = n - k;
    let sigma2 = ssr / df_resid as f64;

    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).expect("checked conditioning");
    let std_errors: Vec<f64> = (0..k).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt() / norms[j]).collect();
    let t_stats: Vec<f64> =
        coefficients.iter().zip(&std_errors).map(|(b, se)| if *se > 0.0 { b / se } else { f64::NAN }).collect();
    let p_values: Vec<f64> = t_stats.iter().map(|t| t_two_sided_p(*t, df_resid as f64)).collect();

    let mean_y = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df_resid as f64;

    Ok(RegressionFit {
        names: design.names().to_vec(),
        coefficients,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        residuals: residuals.iter().copied().collect(),
        n_obs: n,
        df_resid,
        sigma: sigma2.sqrt(),
        condition_number: condition,
    })
}

/// Recorded transform of one standardized column: `z = (x - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub scale: f64,
}

/// Standardize every non-intercept column to mean 0 and sample standard deviation 1.
pub fn standardize_features(design: &DesignMatrix) -> Result<(DesignMatrix, BTreeMap<String, ColumnScaling>)> {
    rescale_columns(design, true)
}

/// Divide every non-intercept column by its sample standard deviation without centering.
///
/// The intercept keeps its meaning on the original scale, and each slope is
/// the raw slope times the column's scale. Recorded means are 0.
pub fn scale_features(design: &DesignMatrix) -> Result<(DesignMatrix, BTreeMap<String, ColumnScaling>)> {
    rescale_columns(design, false)
}

fn rescale_columns(design: &DesignMatrix, center: bool) -> Result<(DesignMatrix, BTreeMap<String, ColumnScaling>)> {
    let n = design.n_obs();
    if n < 2 {
        return Err(Error::Design("standardization needs at least two observations".into()));
    }
    let mut values = design.values().clone();
    let mut transforms = BTreeMap::new();
    for (j, name) in design.names().iter().enumerate() {
        if name == INTERCEPT {
            continue;
        }
        let col = values.column(j);
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            return Err(Error::ZeroVariance(name.clone()));
        }
        let col_mean = col.mean();
        let var = col.iter().map(|v| (v - col_mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let scale = var.sqrt();
        if !(scale > 0.0) {
            return Err(Error::ZeroVariance(name.clone()));
        }
        let mean = if center { col_mean } else { 0.0 };
        values.column_mut(j).apply(|v| *v = (*v - mean) / scale);
        transforms.insert(name.clone(), ColumnScaling { mean, scale });
    }
    let standardized = DesignMatrix::new(design.names().to_vec(), values, design.response().clone())?;
    Ok((standardized, transforms))
}

/// Evaluate the fitted linear predictor on one row of named regressor values.
///
/// The intercept contributes its coefficient; names not in the fit are ignored.
pub fn predict<'a>(fit: &RegressionFit, row: impl IntoIterator<Item = (&'a str, f64)>) -> Result<f64> {
    let row: BTreeMap<&str, f64> = row.into_iter().collect();
    let mut total = 0.0;
    for (name, coef) in fit.names.iter().zip(&fit.coefficients) {
        let value = if name == INTERCEPT {
            1.0
        } else {
            *row.get(name.as_str()).ok_or_else(|| Error::MissingRegressor(name.clone()))?
        };
        total += coef * value;
    }
    Ok(total)
}
