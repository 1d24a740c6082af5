use std::ops::Range;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};

/// Per-dimension min-max map onto `[-1, 1]`. Constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_scaler(data: &Array2<f64>) -> Result<ScalerParams> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(FeatureError::EmptyDataset);
    }
    let (mut min, mut max) = (vec![f64::INFINITY; data.ncols()], vec![f64::NEG_INFINITY; data.ncols()]);
    for row in data.axis_iter(Axis(0)) {
        for (k, &v) in row.iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Parameters for a contiguous block of dimensions.
    pub fn slice(&self, range: Range<usize>) -> ScalerParams {
        ScalerParams { min: self.min[range.clone()].to_vec(), max: self.max[range].to_vec() }
    }

    fn check(&self, got: usize) -> Result<()> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(FeatureError::ScalerDim { expected: self.dim(), got })
        }
    }

    #[inline]
    fn fwd(&self, k: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[k], self.max[k]);
        if hi > lo {
            (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    #[inline]
    fn inv(&self, k: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[k], self.max[k]);
        if hi > lo {
            lo + (v + 1.0) * (hi - lo) / 2.0
        } else {
            lo
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        Ok(v.iter().enumerate().map(|(k, &x)| self.fwd(k, x)).collect())
    }

    pub fn invert(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        Ok(v.iter().enumerate().map(|(k, &x)| self.inv(k, x)).collect())
    }

    pub fn apply_matrix(&self, m: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(m.ncols())?;
        let mut out = m.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (k, x) in row.iter_mut().enumerate() {
                *x = self.fwd(k, *x);
            }
        }
        Ok(out)
    }

    pub fn invert_matrix(&self, m: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(m.ncols())?;
        let mut out = m.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (k, x) in row.iter_mut().enumerate() {
                *x = self.inv(k, *x);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| FeatureError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| FeatureError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::Io(format!("{}: {e}", path.display())))?;
        let s: ScalerParams = serde_json::from_str(&text).map_err(|e| FeatureError::Io(e.to_string()))?;
        if s.min.len() != s.max.len() || s.min.iter().zip(&s.max).any(|(a, b)| !(a <= b)) {
            return Err(FeatureError::Io("scaler needs min <= max in every dimension".into()));
        }
        Ok(s)
    }
}
