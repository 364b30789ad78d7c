use crate::error::{Error, Result};

/// Ridge added to the normal equations for conditioning.
pub const RIDGE: f64 = 1e-6;

/// Least-squares linear model `y = b + x·w`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// In-place Cholesky solve of `a z = b` for symmetric positive definite `a` (row-major `n x n`).
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NonFinite { op: "linear_baseline" });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b)
}

/// Ordinary least squares on `[1, x]` via the normal equations with ridge [`RIDGE`].
pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let Some(first) = x.first() else {
        return Err(Error::invalid("linear baseline needs at least one row"));
    };
    let p = first.len() + 1;
    if x.iter().any(|r| r.len() + 1 != p) {
        return Err(Error::invalid("rows have different widths"));
    }
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut row = vec![1.0; p];
    for (r, &t) in x.iter().zip(y) {
        row[1..].copy_from_slice(r);
        for i in 0..p {
            xty[i] += row[i] * t;
            for j in 0..=i {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[j * p + i] = xtx[i * p + j];
        }
        xtx[i * p + i] += RIDGE;
    }
    let z = cholesky_solve(xtx, xty, p)?;
    Ok(LinearModel {
        intercept: z[0],
        weights: z[1..].to_vec(),
    })
}

/// Fit on training rows and predict the test rows.
pub fn linear_baseline(train_x: &[Vec<f64>], train_y: &[f64], test_x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let model = fit_linear(train_x, train_y)?;
    Ok(test_x.iter().map(|x| model.predict(x)).collect())
}
