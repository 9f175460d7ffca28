//! Regression and matching baselines for treatment-effect estimation.

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::model::Kind;
use crate::numerics::linalg::solve_spd_with_ridge;
use crate::numerics::Matrix;

const RIDGE: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;

/// Per-subject predictions of both potential outcomes (first outcome column).
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactuals {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Counterfactuals {
    pub fn ite(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect()
    }
}

fn with_intercept(x: &Matrix) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols() + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) })
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// Least squares for continuous targets, logistic regression for binary ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Intercept first.
    pub coef: Vec<f64>,
    pub logistic: bool,
}

impl LinearModel {
    pub fn fit(x: &Matrix, y: &[f64], logistic: bool) -> Result<Self> {
        if x.rows() == 0 || x.rows() != y.len() {
            return Err(Error::shape("regression rows", x.rows(), y.len()));
        }
        let a = with_intercept(x);
        let coef = if logistic { Self::newton(&a, y)? } else { Self::least_squares(&a, y)? };
        Ok(Self { coef, logistic })
    }

    fn least_squares(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
        let ata = a.t_matmul(a)?;
        let aty = a.t_matmul(&Matrix::column(y.to_vec()))?;
        solve_spd_with_ridge(&ata, aty.as_slice(), RIDGE)
    }

    /// Newton–Raphson on the logistic log-likelihood.
    fn newton(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
        let (n, p) = (a.rows(), a.cols());
        let mut w = vec![0.0; p];
        for _ in 0..NEWTON_MAX_ITER {
            let mut grad = vec![0.0; p];
            let mut hess = Matrix::zeros(p, p);
            for i in 0..n {
                let row = a.row(i);
                let eta: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                let mu = sigmoid(eta);
                let s = (mu * (1.0 - mu)).max(1e-12);
                for j in 0..p {
                    grad[j] += (y[i] - mu) * row[j];
                    for k in 0..=j {
                        let v = hess.get(j, k) + s * row[j] * row[k];
                        hess.set(j, k, v);
                    }
                }
            }
            for j in 0..p {
                for k in 0..j {
                    hess.set(k, j, hess.get(j, k));
                }
            }
            let step = solve_spd_with_ridge(&hess, &grad, RIDGE)?;
            let mut change: f64 = 0.0;
            for (wj, sj) in w.iter_mut().zip(&step) {
                *wj += sj;
                change = change.max(sj.abs());
            }
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("logistic regression coefficients".into()));
            }
            if change < NEWTON_TOL {
                break;
            }
        }
        Ok(w)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|i| {
                let eta = self.coef[0] + x.row(i).iter().zip(&self.coef[1..]).map(|(a, b)| a * b).sum::<f64>();
                if self.logistic { sigmoid(eta) } else { eta }
            })
            .collect()
    }
}

fn outcome(train: &Dataset) -> Result<(Vec<f64>, bool)> {
    let schema = train.schema();
    if schema.y_dim() != 1 {
        return Err(Error::Data(format!("baselines need a single outcome column, found {}", schema.y_dim())));
    }
    Ok((train.y().col_vec(0), schema.outcome_kinds[0] == Kind::Binary))
}

/// One regression on `[x, t]`; counterfactuals by toggling `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lr1(pub LinearModel);

pub fn fit_lr1(train: &Dataset) -> Result<Lr1> {
    if train.is_empty() {
        return Err(Error::Data("LR-1 needs a non-empty training set".into()));
    }
    let (y, logistic) = outcome(train)?;
    let xt = Matrix::hcat(&[train.x(), &train.t_column()])?;
    Ok(Lr1(LinearModel::fit(&xt, &y, logistic)?))
}

impl Lr1 {
    pub fn predict(&self, x: &Matrix) -> Result<Counterfactuals> {
        let arm = |t: f64| -> Result<Vec<f64>> {
            Ok(self.0.predict(&Matrix::hcat(&[x, &Matrix::filled(x.rows(), 1, t)])?))
        };
        Ok(Counterfactuals { y1: arm(1.0)?, y0: arm(0.0)? })
    }
}

/// Separate regressions per treatment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lr2 {
    pub treated: LinearModel,
    pub control: LinearModel,
}

pub fn fit_lr2(train: &Dataset) -> Result<Lr2> {
    let (y, logistic) = outcome(train)?;
    let mut arms = Vec::with_capacity(2);
    for arm in [1u8, 0] {
        let idx = train.arm_indices(arm);
        if idx.is_empty() {
            return Err(Error::InsufficientArm { arm, available: 0, required: 1 });
        }
        let ya: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        arms.push(LinearModel::fit(&train.x().select_rows(&idx), &ya, logistic)?);
    }
    let control = arms.pop().expect("two arms");
    let treated = arms.pop().expect("two arms");
    Ok(Lr2 { treated, control })
}

impl Lr2 {
    pub fn predict(&self, x: &Matrix) -> Result<Counterfactuals> {
        Ok(Counterfactuals { y1: self.treated.predict(x), y0: self.control.predict(x) })
    }
}

/// k-nearest-neighbour matching within each arm (Euclidean on `x`, ties to
/// the lower training index).
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    k: usize,
    arms: [(Matrix, Vec<f64>); 2],
}

pub fn fit_knn(train: &Dataset, k: usize) -> Result<Knn> {
    if k == 0 {
        return Err(Error::config("eval.knn_k", "must be >= 1"));
    }
    let (y, _) = outcome(train)?;
    let arm = |a: u8| -> Result<(Matrix, Vec<f64>)> {
        let idx = train.arm_indices(a);
        if idx.len() < k {
            return Err(Error::InsufficientArm { arm: a, available: idx.len(), required: k });
        }
        Ok((train.x().select_rows(&idx), idx.iter().map(|&i| y[i]).collect()))
    };
    Ok(Knn { k, arms: [arm(0)?, arm(1)?] })
}

impl Knn {
    /// Indices (within the arm) of the `k` nearest points to `q`.
    pub fn neighbours(&self, arm: u8, q: &[f64]) -> Vec<usize> {
        let (xs, _) = &self.arms[arm as usize];
        let mut d: Vec<(f64, usize)> = (0..xs.rows())
            .map(|i| (xs.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by);
            d.truncate(self.k);
        }
        d.sort_unstable_by(by);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn arm_mean(&self, arm: u8, q: &[f64]) -> f64 {
        let ys = &self.arms[arm as usize].1;
        let nb = self.neighbours(arm, q);
        nb.iter().map(|&i| ys[i]).sum::<f64>() / nb.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Counterfactuals> {
        if x.cols() != self.arms[0].0.cols() {
            return Err(Error::shape("kNN query columns", self.arms[0].0.cols(), x.cols()));
        }
        let rows = 0..x.rows();
        Ok(Counterfactuals {
            y1: rows.clone().map(|i| self.arm_mean(1, x.row(i))).collect(),
            y0: rows.map(|i| self.arm_mean(0, x.row(i))).collect(),
        })
    }
}
