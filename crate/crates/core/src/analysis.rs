//! BDD-based metrics for static fault trees: minimal cut sets,
//! unreliability (single time point and vectorised over many), importance
//! measures.
//!
//! Probabilities are evaluated bottom-up over the diagram using the Shannon
//! decomposition `P[f] = p_x · P[f|x=1] + (1 - p_x) · P[f|x=0]`, with one
//! memoized value per node. The curve evaluation stores a chunk of values per
//! node instead of a single one and performs exactly the same floating-point
//! operations per time point, so curve and scalar results agree bitwise.

use rayon::prelude::*;
use thiserror::Error;

use crate::bdd::{BddError, BddManager, BddRef, CompactBdd};
use crate::curve::{check_times, CurveError, TimeCurve};
use crate::model::{Distribution, DistributionError, FaultTree, NodeType};
use crate::mttf::{self, MttfMethod};
use crate::ordering::VariableOrder;
use crate::translate::{manager_for, translate_with, TranslateError, TranslateOptions};

pub const DEFAULT_CHUNK_SIZE: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("probability assignment covers {got} variables, diagram has {expected}")]
    UncoveredVariables { expected: usize, got: usize },
    #[error("probability {value} for variable {level} is outside [0, 1]")]
    InvalidProbability { level: usize, value: f64 },
    #[error("unknown basic event `{0}`")]
    UnknownBasicEvent(String),
    #[error("{measure} is undefined: {reason}")]
    UndefinedMeasure { measure: ImportanceMeasure, reason: &'static str },
    #[error("basic event `{0}` is not exponentially distributed")]
    NonExponential(String),
    #[error("the top event can never fail, MTTF is infinite")]
    NeverFails,
    #[error("integration did not converge: {0}")]
    NonConvergence(String),
    #[error("no time points given")]
    EmptyTimes,
    #[error("chunk size must be positive")]
    ZeroChunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImportanceMeasure {
    Birnbaum,
    CriticalImportance,
    VeselyFussell,
    RiskAchievementWorth,
    RiskReductionWorth,
}

impl std::fmt::Display for ImportanceMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ImportanceMeasure::Birnbaum => "Birnbaum index",
            ImportanceMeasure::CriticalImportance => "critical importance factor",
            ImportanceMeasure::VeselyFussell => "Vesely-Fussell importance",
            ImportanceMeasure::RiskAchievementWorth => "risk achievement worth",
            ImportanceMeasure::RiskReductionWorth => "risk reduction worth",
        })
    }
}

fn check_probs(manager: &BddManager, probs: &[f64]) -> Result<(), AnalysisError> {
    if probs.len() != manager.num_vars() {
        return Err(AnalysisError::UncoveredVariables {
            expected: manager.num_vars(),
            got: probs.len(),
        });
    }
    if let Some((level, &value)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(AnalysisError::InvalidProbability { level, value });
    }
    Ok(())
}

#[inline]
fn shannon(p: f64, high: f64, low: f64) -> f64 {
    p * high + (1.0 - p) * low
}

fn evaluate_compact(c: &CompactBdd, probs: &[f64]) -> f64 {
    let mut values = Vec::with_capacity(c.nodes.len() + 2);
    values.push(0.0);
    values.push(1.0);
    for n in &c.nodes {
        let v = shannon(probs[n.level], values[n.high as usize], values[n.low as usize]);
        values.push(v);
    }
    values[c.root as usize]
}

/// Exact failure probability of `f` given independent per-variable failure
/// probabilities (indexed by level).
pub fn unreliability(manager: &BddManager, f: BddRef, probs: &[f64]) -> Result<f64, AnalysisError> {
    check_probs(manager, probs)?;
    Ok(evaluate_compact(&manager.compact(f), probs))
}

/// Per-level failure probabilities at time `t`.
pub fn probabilities_at(dists: &[Distribution], t: f64) -> Result<Vec<f64>, AnalysisError> {
    dists
        .iter()
        .map(|d| d.probability_at(t).map_err(AnalysisError::from))
        .collect()
}

/// Unreliability of `f` at every point of `times`, evaluated `chunk_size`
/// time points per diagram pass. Chunks run in parallel; each time point's
/// arithmetic is independent of the chunking.
pub fn unreliability_curve(
    manager: &BddManager,
    f: BddRef,
    dists: &[Distribution],
    times: &[f64],
    chunk_size: usize,
) -> Result<TimeCurve, AnalysisError> {
    if times.is_empty() {
        return Err(AnalysisError::EmptyTimes);
    }
    check_times(times)?;
    let values = evaluate_many(manager, f, dists, times, chunk_size)?;
    Ok(TimeCurve::new(times.to_vec(), values)?)
}

/// Like [`unreliability_curve`] but without the ordering requirement on
/// `times`.
pub(crate) fn evaluate_many(
    manager: &BddManager,
    f: BddRef,
    dists: &[Distribution],
    times: &[f64],
    chunk_size: usize,
) -> Result<Vec<f64>, AnalysisError> {
    if chunk_size == 0 {
        return Err(AnalysisError::ZeroChunk);
    }
    if dists.len() != manager.num_vars() {
        return Err(AnalysisError::UncoveredVariables {
            expected: manager.num_vars(),
            got: dists.len(),
        });
    }
    let compact = manager.compact(f);
    let chunks: Vec<Result<Vec<f64>, AnalysisError>> = times
        .par_chunks(chunk_size)
        .map(|chunk| evaluate_chunk(&compact, dists, chunk))
        .collect();
    let mut out = Vec::with_capacity(times.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn evaluate_chunk(
    c: &CompactBdd,
    dists: &[Distribution],
    times: &[f64],
) -> Result<Vec<f64>, AnalysisError> {
    let width = times.len();
    // Only levels present in the diagram need probabilities.
    let mut level_probs: Vec<Option<Vec<f64>>> = vec![None; dists.len()];
    for n in &c.nodes {
        if level_probs[n.level].is_none() {
            let p = times
                .iter()
                .map(|&t| dists[n.level].probability_at(t))
                .collect::<Result<Vec<f64>, _>>()?;
            if let Some(bad) = p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(AnalysisError::InvalidProbability {
                    level: n.level,
                    value: *bad,
                });
            }
            level_probs[n.level] = Some(p);
        }
    }
    let mut values: Vec<f64> = Vec::with_capacity((c.nodes.len() + 2) * width);
    values.extend(std::iter::repeat_n(0.0, width));
    values.extend(std::iter::repeat_n(1.0, width));
    for n in &c.nodes {
        let p = level_probs[n.level].as_ref().unwrap();
        let (h, l) = (n.high as usize * width, n.low as usize * width);
        for j in 0..width {
            let v = shannon(p[j], values[h + j], values[l + j]);
            values.push(v);
        }
    }
    let r = c.root as usize * width;
    Ok(values[r..r + width].to_vec())
}

/// `P[f | x] - P[f | ¬x]` for the variable at `level`.
pub fn birnbaum(
    manager: &mut BddManager,
    f: BddRef,
    level: usize,
    probs: &[f64],
) -> Result<f64, AnalysisError> {
    check_probs(manager, probs)?;
    let high = manager.restrict(f, level, true)?;
    let low = manager.restrict(f, level, false)?;
    Ok(unreliability(manager, high, probs)? - unreliability(manager, low, probs)?)
}

/// Importance of the variable at `level` under `measure`:
///
/// * critical importance `BI · p_e / U`
/// * Vesely-Fussell `P[some minimal cut set containing e has failed] / U`
/// * risk achievement worth `P[F | e] / U`
/// * risk reduction worth `U / P[F | ¬e]`
pub fn importance(
    manager: &mut BddManager,
    f: BddRef,
    level: usize,
    probs: &[f64],
    measure: ImportanceMeasure,
) -> Result<f64, AnalysisError> {
    check_probs(manager, probs)?;
    let high = manager.restrict(f, level, true)?;
    let low = manager.restrict(f, level, false)?;
    let p_high = unreliability(manager, high, probs)?;
    let p_low = unreliability(manager, low, probs)?;
    if measure == ImportanceMeasure::Birnbaum {
        return Ok(p_high - p_low);
    }
    let u = unreliability(manager, f, probs)?;
    if u == 0.0 {
        return Err(AnalysisError::UndefinedMeasure {
            measure,
            reason: "system unreliability is zero",
        });
    }
    Ok(match measure {
        ImportanceMeasure::Birnbaum => unreachable!(),
        ImportanceMeasure::CriticalImportance => (p_high - p_low) * probs[level] / u,
        ImportanceMeasure::VeselyFussell => {
            let min = manager.minsol(f)?;
            let with_e = manager.containing(min, level)?;
            let closure = manager.upward_closure(with_e)?;
            unreliability(manager, closure, probs)? / u
        }
        ImportanceMeasure::RiskAchievementWorth => p_high / u,
        ImportanceMeasure::RiskReductionWorth => {
            if p_low == 0.0 {
                return Err(AnalysisError::UndefinedMeasure {
                    measure,
                    reason: "unreliability with the event repaired is zero",
                });
            }
            u / p_low
        }
    })
}

/// A static tree translated under a fixed variable order, ready for repeated
/// queries.
#[derive(Debug)]
pub struct StaticAnalysis {
    names: Vec<String>,
    dists: Vec<Distribution>,
    manager: BddManager,
    root: BddRef,
}

impl StaticAnalysis {
    pub fn new(
        ft: &FaultTree,
        order: &VariableOrder,
        options: TranslateOptions,
    ) -> Result<Self, AnalysisError> {
        let mut manager = manager_for(ft, order);
        let root = translate_with(ft, order, &mut manager, options)?;
        let dists = order
            .as_slice()
            .iter()
            .map(|&b| ft.node(b).distribution().cloned().expect("validated tree"))
            .collect();
        Ok(StaticAnalysis {
            names: order.names(ft),
            dists,
            manager,
            root,
        })
    }

    pub fn manager(&self) -> &BddManager {
        &self.manager
    }

    pub fn manager_mut(&mut self) -> &mut BddManager {
        &mut self.manager
    }

    pub fn root(&self) -> BddRef {
        self.root
    }

    /// Basic event names by level.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn distributions(&self) -> &[Distribution] {
        &self.dists
    }

    pub fn level_of(&self, name: &str) -> Result<usize, AnalysisError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| AnalysisError::UnknownBasicEvent(name.to_string()))
    }

    /// Minimal cut sets as name lists (members in variable order), smallest
    /// sets first. `max_order` drops larger sets.
    pub fn minimal_cut_sets(&mut self, max_order: Option<usize>) -> Result<Vec<Vec<String>>, AnalysisError> {
        let min = self.manager.minsol(self.root)?;
        let mut sets = self.manager.enumerate_solutions(min)?;
        if let Some(k) = max_order {
            sets.retain(|s| s.len() <= k);
        }
        sets.sort_by_key(|s| s.len());
        Ok(sets
            .into_iter()
            .map(|s| s.into_iter().map(|l| self.names[l].clone()).collect())
            .collect())
    }

    pub fn probabilities_at(&self, t: f64) -> Result<Vec<f64>, AnalysisError> {
        probabilities_at(&self.dists, t)
    }

    pub fn unreliability_at(&self, t: f64) -> Result<f64, AnalysisError> {
        let probs = self.probabilities_at(t)?;
        unreliability(&self.manager, self.root, &probs)
    }

    pub fn curve(&self, times: &[f64], chunk_size: usize) -> Result<TimeCurve, AnalysisError> {
        unreliability_curve(&self.manager, self.root, &self.dists, times, chunk_size)
    }

    /// `(name, value)` for every basic event, in variable order.
    pub fn importance_at(
        &mut self,
        measure: ImportanceMeasure,
        t: f64,
    ) -> Result<Vec<(String, f64)>, AnalysisError> {
        let probs = self.probabilities_at(t)?;
        (0..self.names.len())
            .map(|level| {
                importance(&mut self.manager, self.root, level, &probs, measure)
                    .map(|v| (self.names[level].clone(), v))
            })
            .collect()
    }

    pub fn mttf(&self, method: &MttfMethod) -> Result<f64, AnalysisError> {
        for (name, d) in self.names.iter().zip(&self.dists) {
            if !d.is_exponential() {
                return Err(AnalysisError::NonExponential(name.clone()));
            }
        }
        match method {
            MttfMethod::Limit(params) => mttf::mttf_limit(&self.manager, self.root, &self.dists, params),
            MttfMethod::Substitution(params) => {
                mttf::mttf_substitution(&self.manager, self.root, &self.dists, params)
            }
        }
    }
}

/// Minimal cut sets of a static tree under `order`.
pub fn minimal_cut_sets(
    ft: &FaultTree,
    order: &VariableOrder,
    max_order: Option<usize>,
) -> Result<Vec<Vec<String>>, AnalysisError> {
    StaticAnalysis::new(ft, order, TranslateOptions::default())?.minimal_cut_sets(max_order)
}

/// Whether the tree only uses gates whose failure function is monotone.
pub fn is_coherent(ft: &FaultTree) -> bool {
    ft.nodes()
        .all(|(_, n)| matches!(n.kind(), NodeType::Be | NodeType::And | NodeType::Or | NodeType::Vot(_)))
}
