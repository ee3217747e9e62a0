use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-column min-max map onto `[0, 1]`. Constant columns map to 0 and invert to their value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(values: &ArrayView2<'_, f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let min = values.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let max = values.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        if min.iter().chain(max.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Scaler("non-finite value in fitted data".into()));
        }
        Ok(ColumnScaler {
            min: min.to_vec(),
            max: max.to_vec(),
        })
    }

    pub fn is_fitted(&self) -> bool {
        !self.min.is_empty() && self.min.len() == self.max.len()
    }

    pub fn columns(&self) -> usize {
        self.min.len()
    }

    /// Indices of columns whose fitted range is empty.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.min.len())
            .filter(|&j| self.max[j] <= self.min[j])
            .collect()
    }

    fn check(&self, values: &ArrayView2<'_, f64>) -> Result<()> {
        if !self.is_fitted() {
            return Err(Error::Scaler("scaler has not been fitted".into()));
        }
        if values.ncols() != self.columns() {
            return Err(Error::Shape(format!(
                "{} columns given to a scaler fitted on {}",
                values.ncols(),
                self.columns()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, values: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(values)?;
        let mut out = values.to_owned();
        for (j, mut column) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            if hi > lo {
                column.mapv_inplace(|x| (x - lo) / (hi - lo));
            } else {
                column.fill(0.0);
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, values: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(values)?;
        let mut out = values.to_owned();
        for (j, mut column) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            if hi > lo {
                column.mapv_inplace(|x| lo + x * (hi - lo));
            } else {
                column.fill(lo);
            }
        }
        Ok(out)
    }
}

/// Scalers for the 12 inputs and the 21 stiffness outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub inputs: ColumnScaler,
    pub outputs: ColumnScaler,
}

impl MinMaxScaler {
    pub fn fit(inputs: &ArrayView2<'_, f64>, outputs: &ArrayView2<'_, f64>) -> Result<Self> {
        Ok(MinMaxScaler {
            inputs: ColumnScaler::fit(inputs)?,
            outputs: ColumnScaler::fit(outputs)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn fit_records_range() {
        let s = ColumnScaler::fit(&array![[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]].view()).unwrap();
        assert_eq!((s.min[0], s.max[0]), (2.0, 6.0));
        assert_eq!(s.constant_columns(), vec![1]);
        let t = s
            .transform(&array![[3.0, 5.0], [2.0, 9.0], [6.0, 5.0]].view())
            .unwrap();
        assert_eq!(t, array![[0.25, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        let back = s.inverse_transform(&t.view()).unwrap();
        assert_eq!(back.column(1).to_vec(), vec![5.0; 3]);
    }

    #[test]
    fn refit_on_transformed_is_unit_range() {
        let data = array![[1.0, -3.0, 7.0], [10.0, 4.0, 7.0], [5.0, 0.5, 7.0]];
        let s = ColumnScaler::fit(&data.view()).unwrap();
        let t = s.transform(&data.view()).unwrap();
        let again = ColumnScaler::fit(&t.view()).unwrap();
        for j in 0..2 {
            assert_eq!((again.min[j], again.max[j]), (0.0, 1.0));
        }
    }

    #[test]
    fn unfitted_and_mismatched() {
        let s = ColumnScaler::default();
        assert!(matches!(
            s.transform(&array![[1.0]].view()),
            Err(Error::Scaler(_))
        ));
        let s = ColumnScaler::fit(&array![[1.0, 2.0]].view()).unwrap();
        assert!(matches!(
            s.transform(&array![[1.0]].view()),
            Err(Error::Shape(_))
        ));
        assert!(ColumnScaler::fit(&Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 4), 2..20),
                      probe in prop::collection::vec(-1e4f64..1e4, 4)) {
            let n = rows.len();
            let data = Array2::from_shape_vec((n, 4), rows.concat()).unwrap();
            let s = ColumnScaler::fit(&data.view()).unwrap();
            let x = Array2::from_shape_vec((1, 4), probe).unwrap();
            let back = s.inverse_transform(&s.transform(&x.view()).unwrap().view()).unwrap();
            for j in 0..4 {
                if s.max[j] > s.min[j] {
                    // relative to the magnitude of the values involved
                    let scale = x[[0, j]].abs().max(s.max[j].abs()).max(s.min[j].abs()).max(1.0);
                    prop_assert!((back[[0, j]] - x[[0, j]]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
