use thiserror::Error;

/// Probabilities paired with strictly increasing, nonnegative time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("time points must be nonnegative and strictly increasing")]
    TimesNotIncreasing,
    #[error("value {0} is not a probability")]
    NotAProbability(f64),
}

impl TimeCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, CurveError> {
        if times.len() != values.len() {
            return Err(CurveError::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        check_times(&times)?;
        if let Some(&bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CurveError::NotAProbability(bad));
        }
        Ok(TimeCurve { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Exact value at a support point, linear interpolation between support
    /// points, `None` outside the support.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => Some(self.values[i]),
            Err(0) => None,
            Err(i) if i == self.times.len() => None,
            Err(i) => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let (p0, p1) = (self.values[i - 1], self.values[i]);
                Some(p0 + (p1 - p0) * (t - t0) / (t1 - t0))
            }
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<(), CurveError> {
    let ok = times.iter().all(|t| *t >= 0.0 && t.is_finite())
        && times.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(CurveError::TimesNotIncreasing)
    }
}

/// `n` evenly spaced points on `[0, horizon]` (both ends included when
/// `n >= 2`; a single point sits at `horizon`).
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![horizon],
        _ => (0..n)
            .map(|i| horizon * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
