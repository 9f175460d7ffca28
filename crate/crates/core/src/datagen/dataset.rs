use crate::error::{Error, Result};
use crate::model::{DataSchema, Kind};
use crate::numerics::Matrix;

/// Observational records `(x, t, y)`, optionally with both potential
/// outcomes and the latent variables that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DataSchema,
    x: Matrix,
    t: Vec<u8>,
    y: Matrix,
    potential: Option<(Matrix, Matrix)>,
    z_true: Option<Matrix>,
}

/// Rows of a dataset as dense matrices; `t` is an `n x 1` column of 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub t: Matrix,
    pub y: Matrix,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_kinds(m: &Matrix, kinds: &[Kind], what: &str) -> Result<()> {
    for r in 0..m.rows() {
        for (c, (&v, k)) in m.row(r).iter().zip(kinds).enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!("{what}{c} row {r}: non-finite value {v}")));
            }
            if *k == Kind::Binary && v != 0.0 && v != 1.0 {
                return Err(Error::Data(format!(
                    "{what}{c} row {r}: binary column holds {v}"
                )));
            }
        }
    }
    Ok(())
}

impl Dataset {
    pub fn new(
        schema: DataSchema,
        x: Matrix,
        t: Vec<u8>,
        y: Matrix,
        potential: Option<(Matrix, Matrix)>,
        z_true: Option<Matrix>,
    ) -> Result<Self> {
        let d = Self {
            schema,
            x,
            t,
            y,
            potential,
            z_true,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let n = self.t.len();
        if self.x.shape() != (n, self.schema.x_dim()) {
            return Err(Error::shape(
                "dataset x",
                format!("{n}x{}", self.schema.x_dim()),
                format!("{:?}", self.x.shape()),
            ));
        }
        if self.y.shape() != (n, self.schema.y_dim()) {
            return Err(Error::shape(
                "dataset y",
                format!("{n}x{}", self.schema.y_dim()),
                format!("{:?}", self.y.shape()),
            ));
        }
        if let Some(i) = self.t.iter().position(|&t| t > 1) {
            return Err(Error::Data(format!("t row {i}: treatment must be 0 or 1")));
        }
        check_kinds(&self.x, &self.schema.feature_kinds, "x")?;
        check_kinds(&self.y, &self.schema.outcome_kinds, "y")?;
        if let Some((y0, y1)) = &self.potential {
            for (m, name) in [(y0, "y0"), (y1, "y1")] {
                if m.shape() != self.y.shape() {
                    return Err(Error::shape(
                        format!("dataset {name}"),
                        format!("{:?}", self.y.shape()),
                        format!("{:?}", m.shape()),
                    ));
                }
                if !m.is_finite() {
                    return Err(Error::Data(format!("{name}: non-finite value")));
                }
            }
            for i in 0..n {
                let chosen = if self.t[i] == 1 { y1 } else { y0 };
                if chosen.row(i) != self.y.row(i) {
                    return Err(Error::Data(format!(
                        "row {i}: factual y differs from the potential outcome of arm {}",
                        self.t[i]
                    )));
                }
            }
        }
        if let Some(z) = &self.z_true {
            if z.rows() != n {
                return Err(Error::shape("dataset z_true rows", n, z.rows()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn schema(&self) -> &DataSchema {
        &self.schema
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn t_column(&self) -> Matrix {
        Matrix::column(self.t.iter().map(|&t| t as f64).collect())
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    /// `(y0, y1)` when ground truth is known.
    pub fn potential_outcomes(&self) -> Option<(&Matrix, &Matrix)> {
        self.potential.as_ref().map(|(a, b)| (a, b))
    }

    pub fn z_true(&self) -> Option<&Matrix> {
        self.z_true.as_ref()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            x: self.x.select_rows(indices),
            t: indices.iter().map(|&i| self.t[i]).collect(),
            y: self.y.select_rows(indices),
            potential: self
                .potential
                .as_ref()
                .map(|(a, b)| (a.select_rows(indices), b.select_rows(indices))),
            z_true: self.z_true.as_ref().map(|z| z.select_rows(indices)),
        }
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        Batch {
            x: self.x.select_rows(indices),
            t: Matrix::column(indices.iter().map(|&i| self.t[i] as f64).collect()),
            y: self.y.select_rows(indices),
        }
    }

    pub fn full_batch(&self) -> Batch {
        Batch {
            x: self.x.clone(),
            t: self.t_column(),
            y: self.y.clone(),
        }
    }

    /// Indices of rows with treatment `arm`.
    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.t[i] == arm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (DataSchema, Matrix, Vec<u8>, Matrix) {
        let schema = DataSchema::new(vec![Kind::Continuous, Kind::Binary], vec![Kind::Continuous]).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.0]]).unwrap();
        (schema, x, vec![1, 0], Matrix::column(vec![2.0, 3.0]))
    }

    #[test]
    fn factual_consistency_enforced() {
        let (s, x, t, y) = tiny();
        let y0 = Matrix::column(vec![0.0, 3.0]);
        let y1 = Matrix::column(vec![2.0, 9.0]);
        assert!(Dataset::new(s.clone(), x.clone(), t.clone(), y.clone(), Some((y0.clone(), y1)), None).is_ok());
        let bad_y1 = Matrix::column(vec![2.5, 9.0]);
        assert!(Dataset::new(s, x, t, y, Some((y0, bad_y1)), None).is_err());
    }

    #[test]
    fn binary_columns_and_treatment_checked() {
        let (s, mut x, t, y) = tiny();
        assert!(Dataset::new(s.clone(), x.clone(), vec![1, 2], y.clone(), None, None).is_err());
        x.set(0, 1, 2.0);
        let err = Dataset::new(s, x, t, y, None, None).unwrap_err();
        assert!(err.to_string().contains("x1"));
    }

    #[test]
    fn subset_and_batch() {
        let (s, x, t, y) = tiny();
        let d = Dataset::new(s, x, t, y, None, None).unwrap();
        let sub = d.subset(&[1]);
        assert_eq!(sub.len(), 1);
        assert_eq!(sub.t(), &[0]);
        let b = d.batch(&[1, 0, 1]);
        assert_eq!(b.t.as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(d.arm_indices(1), vec![0]);
    }
}
