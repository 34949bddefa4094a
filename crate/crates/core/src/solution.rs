use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSource {
    Trajectory,
    ClosedForm,
}

/// Anything that can be sampled as a scalar solution `x(t)` with its
/// right-hand derivative: exact closed forms and integrated trajectories.
pub trait SolutionCurve {
    /// Closed time range on which the curve is defined. The upper end may
    /// be infinite for closed forms.
    fn span(&self) -> (f64, f64);

    fn value(&self, t: f64) -> Result<f64>;

    fn derivative(&self, t: f64) -> Result<f64>;

    fn label(&self) -> String;

    fn source(&self) -> CurveSource;
}

/// `n` equispaced points on `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}
