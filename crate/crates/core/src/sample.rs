//! Validated, descending-sorted positive samples.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};

/// A positive sample sorted in descending order.
///
/// `values()[0]` is the sample maximum, so the `i`-th largest order statistic
/// sits at index `i - 1` and the pivot of a fit with `k` tail values is
/// `values()[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrderedSample {
    values: Vec<f64>,
}

impl OrderedSample {
    pub const MIN_LEN: usize = 3;

    /// Validates and sorts an arbitrary-order sample.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        validate(&values)?;
        sort_descending(&mut values);
        Ok(Self { values })
    }

    /// Wraps values that must already be sorted in descending order.
    pub fn from_descending(values: Vec<f64>) -> Result<Self> {
        validate(&values)?;
        if let Some(i) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(TailError::domain(format!(
                "values not in descending order at index {}",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The `rank`-th largest value (rank 1 is the maximum).
    pub fn largest(&self, rank: usize) -> Option<f64> {
        rank.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    /// Multiplies every value by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(TailError::domain(format!("scale factor must be positive, got {c}")));
        }
        Self::from_descending(self.values.iter().map(|x| x * c).collect())
    }
}

impl TryFrom<Vec<f64>> for OrderedSample {
    type Error = TailError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<OrderedSample> for Vec<f64> {
    fn from(s: OrderedSample) -> Self {
        s.values
    }
}

impl AsRef<[f64]> for OrderedSample {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn sort_descending(values: &mut [f64]) {
    values.sort_unstable_by(|a, b| b.total_cmp(a));
}

fn validate(values: &[f64]) -> Result<()> {
    if values.len() < OrderedSample::MIN_LEN {
        return Err(TailError::Size {
            min: OrderedSample::MIN_LEN,
            got: values.len(),
        });
    }
    if let Some((i, x)) = values
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x > 0.0))
    {
        return Err(TailError::domain(format!(
            "value at index {i} must be finite and positive, got {x}"
        )));
    }
    Ok(())
}
