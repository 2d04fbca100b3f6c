//! Static fault tree → BDD.

use thiserror::Error;

use crate::bdd::{BddError, BddManager, BddRef};
use crate::model::{FaultTree, NodeType};
use crate::ordering::VariableOrder;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslateError {
    #[error("fault tree is not static (node `{0}` is dynamic)")]
    NotStatic(String),
    #[error("manager variables do not match the variable order")]
    OrderMismatch,
    #[error("voting threshold {k} out of range for {n} inputs")]
    ThresholdOutOfRange { k: usize, n: usize },
    #[error(transparent)]
    Bdd(#[from] BddError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TranslateOptions {
    /// Keep every gate's diagram in the memo table instead of releasing it
    /// once its last parent has consumed it.
    pub cache_gates: bool,
}

/// Fresh manager whose variables follow `order`.
pub fn manager_for(ft: &FaultTree, order: &VariableOrder) -> BddManager {
    BddManager::new(order.names(ft))
}

/// Builds the diagram of the top event of a static tree.
pub fn translate(
    ft: &FaultTree,
    order: &VariableOrder,
    manager: &mut BddManager,
) -> Result<BddRef, TranslateError> {
    translate_with(ft, order, manager, TranslateOptions::default())
}

pub fn translate_with(
    ft: &FaultTree,
    order: &VariableOrder,
    manager: &mut BddManager,
    options: TranslateOptions,
) -> Result<BddRef, TranslateError> {
    if let Some((_, n)) = ft.nodes().find(|(_, n)| !n.kind().is_static()) {
        return Err(TranslateError::NotStatic(n.name().to_string()));
    }
    if manager.num_vars() != order.len()
        || order
            .as_slice()
            .iter()
            .zip(manager.var_names())
            .any(|(&b, name)| ft.name(b) != name)
    {
        return Err(TranslateError::OrderMismatch);
    }
    let levels = order.levels();

    // Outstanding parent edges per node, for releasing consumed gate results.
    let mut pending = vec![0usize; ft.len()];
    for (_, node) in ft.nodes() {
        for c in node.children() {
            pending[c.index()] += 1;
        }
    }
    let mut memo: Vec<Option<BddRef>> = vec![None; ft.len()];
    for id in ft.topological_order() {
        let node = ft.node(id);
        let f = match node.kind() {
            NodeType::Be => {
                let level = *levels.get(&id).ok_or(TranslateError::OrderMismatch)?;
                manager.var(level)?
            }
            kind => {
                let mut inputs = Vec::with_capacity(node.children().len());
                for &c in node.children() {
                    inputs.push(memo[c.index()].expect("children are translated first"));
                    pending[c.index()] -= 1;
                    if pending[c.index()] == 0 && !options.cache_gates && ft.node(c).kind().is_gate() {
                        memo[c.index()] = None;
                    }
                }
                match kind {
                    NodeType::And => {
                        let mut acc = manager.one();
                        for g in inputs {
                            acc = manager.and(acc, g)?;
                        }
                        acc
                    }
                    NodeType::Or => {
                        let mut acc = manager.zero();
                        for g in inputs {
                            acc = manager.or(acc, g)?;
                        }
                        acc
                    }
                    NodeType::Vot(k) => translate_vot(manager, k, &inputs)?,
                    _ => unreachable!("checked static above"),
                }
            }
        };
        memo[id.index()] = Some(f);
    }
    Ok(memo[ft.top().index()].expect("top translated"))
}

/// At-least-`k`-of-`inputs` via Shannon decomposition on the first input:
/// `VOT(k, c1..cn) = ite(c1, VOT(k-1, c2..cn), VOT(k, c2..cn))`.
pub fn translate_vot(
    manager: &mut BddManager,
    k: usize,
    inputs: &[BddRef],
) -> Result<BddRef, TranslateError> {
    let n = inputs.len();
    if k == 0 || k > n {
        return Err(TranslateError::ThresholdOutOfRange { k, n });
    }
    // table[j] = VOT(j, inputs[i..]) while sweeping i from n down to 0.
    let mut table: Vec<BddRef> = (0..=k)
        .map(|j| manager.constant(j == 0))
        .collect();
    for i in (0..n).rev() {
        for j in (1..=k).rev() {
            table[j] = manager.ite(inputs[i], table[j - 1], table[j])?;
        }
    }
    Ok(table[k])
}
