//! Mean time to failure of a static tree, `∫₀^∞ (1 - U(t)) dt`, by numerical
//! quadrature over vectorised unreliability evaluations.

use crate::analysis::{evaluate_many, AnalysisError, DEFAULT_CHUNK_SIZE};
use crate::bdd::{BddManager, BddRef};
use crate::model::Distribution;

/// Parameters of the panel-by-panel integration.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitParams {
    /// Stop once a whole panel contributes less than this.
    pub epsilon: f64,
    /// Width of the first panel `[0, initial_step]`.
    pub initial_step: f64,
    /// Each panel is this many times wider than the previous one.
    pub growth: f64,
    pub max_panels: usize,
    /// Relative accuracy floor for the trapezoid refinement inside a panel;
    /// an absolute target of `epsilon / 10` alone is below double precision
    /// for panels with large integrals.
    pub relative_tolerance: f64,
    /// At most `2^max_refinements` trapezoid intervals per panel.
    pub max_refinements: u32,
    pub chunk_size: usize,
}

impl Default for LimitParams {
    fn default() -> Self {
        LimitParams {
            epsilon: 1e-12,
            initial_step: 1e-10,
            growth: 10.0,
            max_panels: 400,
            relative_tolerance: 1e-10,
            max_refinements: 24,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionParams {
    pub samples: usize,
    pub chunk_size: usize,
}

impl Default for SubstitutionParams {
    fn default() -> Self {
        SubstitutionParams {
            samples: 1_000_000,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MttfMethod {
    Limit(LimitParams),
    Substitution(SubstitutionParams),
}

fn check(manager: &BddManager, f: BddRef, dists: &[Distribution]) -> Result<(), AnalysisError> {
    if manager.is_zero(f) {
        return Err(AnalysisError::NeverFails);
    }
    for (level, d) in dists.iter().enumerate() {
        if !d.is_exponential() {
            return Err(AnalysisError::NonExponential(manager.var_name(level).to_string()));
        }
    }
    Ok(())
}

fn survival(
    manager: &BddManager,
    f: BddRef,
    dists: &[Distribution],
    times: &[f64],
    chunk: usize,
) -> Result<Vec<f64>, AnalysisError> {
    Ok(evaluate_many(manager, f, dists, times, chunk)?
        .into_iter()
        .map(|u| 1.0 - u)
        .collect())
}

/// Integrates the survival function over consecutive panels
/// `[r_i, r_{i+1}]` of geometrically growing width until a panel contributes
/// less than `epsilon`. Each panel uses the composite trapezoid rule, doubling
/// the number of intervals until the Richardson error estimate
/// `|T_2n - T_n| / 3` is below `max(epsilon / 10, relative_tolerance · T_2n)`.
pub fn mttf_limit(
    manager: &BddManager,
    f: BddRef,
    dists: &[Distribution],
    params: &LimitParams,
) -> Result<f64, AnalysisError> {
    check(manager, f, dists)?;
    let mut total = 0.0;
    let mut start = 0.0;
    let mut width = params.initial_step;
    for _ in 0..params.max_panels {
        let end = start + width;
        let panel = integrate_panel(manager, f, dists, start, end, params)?;
        total += panel;
        if panel < params.epsilon {
            return Ok(total);
        }
        start = end;
        width *= params.growth;
    }
    Err(AnalysisError::NonConvergence(format!(
        "tail still above {} after {} panels",
        params.epsilon, params.max_panels
    )))
}

fn integrate_panel(
    manager: &BddManager,
    f: BddRef,
    dists: &[Distribution],
    a: f64,
    b: f64,
    params: &LimitParams,
) -> Result<f64, AnalysisError> {
    let ends = survival(manager, f, dists, &[a, b], params.chunk_size)?;
    let mut h = b - a;
    let mut estimate = h * (ends[0] + ends[1]) / 2.0;
    let mut intervals = 1usize;
    for level in 1..=params.max_refinements {
        let mids: Vec<f64> = (0..intervals).map(|i| a + (i as f64 + 0.5) * h).collect();
        let values = survival(manager, f, dists, &mids, params.chunk_size)?;
        let sum: f64 = values.iter().sum();
        let refined = estimate / 2.0 + h / 2.0 * sum;
        let error = (refined - estimate).abs() / 3.0;
        h /= 2.0;
        intervals *= 2;
        estimate = refined;
        let tol = (params.epsilon / 10.0).max(params.relative_tolerance * refined.abs());
        if level >= 4 && error < tol {
            return Ok(estimate);
        }
    }
    Err(AnalysisError::NonConvergence(format!(
        "panel [{a}, {b}] not resolved with 2^{} intervals",
        params.max_refinements
    )))
}

/// Maps `[0, ∞)` onto `[0, 1)` with `t = u / (1 - u)` and integrates
/// `R(u / (1 - u)) / (1 - u)²` by the composite trapezoid rule on `samples`
/// uniform points `u_i = i / samples`; the integrand vanishes at `u = 1`.
pub fn mttf_substitution(
    manager: &BddManager,
    f: BddRef,
    dists: &[Distribution],
    params: &SubstitutionParams,
) -> Result<f64, AnalysisError> {
    check(manager, f, dists)?;
    if params.samples < 2 {
        return Err(AnalysisError::NonConvergence("need at least two samples".into()));
    }
    let n = params.samples;
    let h = 1.0 / n as f64;
    let us: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let times: Vec<f64> = us.iter().map(|u| u / (1.0 - u)).collect();
    let r = survival(manager, f, dists, &times, params.chunk_size)?;
    let mut sum = r[0] / 2.0;
    for i in 1..n {
        let w = 1.0 - us[i];
        sum += r[i] / (w * w);
    }
    Ok(h * sum)
}
